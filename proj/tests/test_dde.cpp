#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "stemflow/dde.hpp"
#include "stemflow/steady.hpp"

using namespace stemflow;

namespace {

RescaledParameters params_for(double d = 1.05) {
    RawParameters raw;
    raw.d = d;
    return rescale(raw);
}

}  // namespace

TEST_CASE("fit recovers a manufactured damped or growing oscillation", "[dde]") {
    for (double rate : {0.1, -0.15}) {
        std::vector<double> t, y;
        for (int i = 0; i < 2000; ++i) {
            t.push_back(0.01 * i);
            y.push_back(std::exp(rate * t.back()) * std::cos(2.0 * t.back()) + 0.3);
        }
        const auto f = linearized_growth_fit(t, y, 0.0, 19.99);
        REQUIRE(f.oscillatory);
        CHECK(std::abs(f.rate - rate) < 0.01 * std::abs(rate));
        CHECK(std::abs(f.frequency - 2.0) < 0.02);
        CHECK(std::abs(f.offset - 0.3) < 1e-6);
    }
}

TEST_CASE("fit flags a monotone signal as non-oscillatory", "[dde]") {
    std::vector<double> t, y;
    for (int i = 0; i < 500; ++i) {
        t.push_back(0.1 * i);
        y.push_back(2.0 - std::exp(-0.2 * t.back()));
    }
    const auto f = linearized_growth_fit(t, y, 0.0, 50.0);
    CHECK_FALSE(f.oscillatory);
    CHECK(f.frequency == 0.0);
    CHECK(std::abs(f.rate + 0.2) < 1e-6);
    CHECK_THROWS_AS(linearized_growth_fit(t, y, 0.0, 0.3), InvalidParameter);
}

TEST_CASE("constant steady history stays put", "[dde]") {
    const auto p = params_for();
    const auto s = solve_steady_approx4(p);
    const DelayOptions o;
    const auto trace = integrate_dde(p, constant_history(p, o, s.a_tilde, s.omega_bar), 100.0, o);
    double drift = 0.0;
    for (const auto& r : trace) {
        drift = std::max({drift, std::abs(r.omega_bar - s.omega_bar) / s.omega_bar,
                          std::abs(r.a_star - s.a_tilde) / s.a_tilde});
    }
    CHECK(drift / 100.0 < 1e-8);
    CHECK(std::abs(trace.back().c - s.b_star / p.rho_d) < 1e-10);
}

TEST_CASE("zero frozen alpha keeps C at zero", "[dde]") {
    const auto p = params_for();
    DelayOptions o;
    o.frozen_alpha = 0.0;
    const auto trace = integrate_dde(p, constant_history(p, o, 1.0, 0.0), 30.0, o);
    for (const auto& r : trace) CHECK(r.c == 0.0);
}

TEST_CASE("the integrated C matches quadrature of the alpha history", "[dde]") {
    const auto p = params_for();
    const DelayOptions o;
    const int n = o.steps_per_delay;
    // A history cut from an earlier solution is smooth: derivative jumps from a
    // non-solution history are smoothed out by one order per delay.
    const auto warmup = integrate_dde(p, constant_history(p, o, 1.0, 0.0), 25.0, o);
    std::vector<double> a, w;
    for (std::size_t k = warmup.size() - n - 1; k < warmup.size(); ++k) {
        a.push_back(warmup[k].a_star);
        w.push_back(warmup[k].omega_bar);
    }
    const auto hist = history_from_samples(p, o, warmup.back().t, a, w);
    const auto trace = integrate_dde(p, hist, 40.0, o);
    const double h = hist.tau / n;
    std::vector<double> al;
    for (double v : hist.a_star) al.push_back(delay_alpha(p, o, v));
    for (std::size_t k = 1; k < trace.size(); ++k) al.push_back(trace[k].alpha);
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double* win = &al[k];
        double s = win[0] + win[n];
        for (int j = 1; j < n; ++j) s += (j % 2 ? 4.0 : 2.0) * win[j];
        worst = std::max(worst, std::abs(s * h / 3.0 - trace[k].c));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("the first delay window is marked transient", "[dde]") {
    const auto p = params_for();
    const DelayOptions o;
    const auto trace = integrate_dde(p, constant_history(p, o, 1.0, 0.0), 20.0, o);
    const double tau = 1.0 / p.rho_d;
    for (const auto& r : trace) CHECK(r.transient == (r.t < tau - 1e-9));
}

TEST_CASE("delay resolution below 64 steps or odd is rejected", "[dde]") {
    const auto p = params_for();
    DelayOptions o;
    o.steps_per_delay = 32;
    CHECK_THROWS_AS(constant_history(p, o, 1.0, 0.0), InvalidParameter);
    o.steps_per_delay = 65;
    CHECK_THROWS_AS(constant_history(p, o, 1.0, 0.0), InvalidParameter);
}

TEST_CASE("delay system reproduces the Approx4 PDE", "[dde]") {
    const auto p = params_for(1.2);
    const int n = 256;
    const auto g = uniform_grid(p, n);
    const ReducedSolver solver(Variant::Approx4, p, g);
    ReducedState st = solver.initial(1.0);
    const auto pde = solver.run(st, 60.0, g.dt);
    DelayOptions o;
    o.steps_per_delay = n;
    std::vector<double> a, w;
    for (int k = 0; k <= n; ++k) {
        a.push_back(pde[k].a_total);
        w.push_back(pde[k].omega_total);
    }
    const auto dde = integrate_dde(p, history_from_samples(p, o, pde[n].t_days, a, w), 60.0 - pde[n].t_days, o);
    double gap = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < dde.size() && n + k < pde.size(); ++k) {
        REQUIRE(std::abs(pde[n + k].t_days - dde[k].t) < 1e-9);
        gap = std::max(gap, std::abs(pde[n + k].omega_total - dde[k].omega_bar));
        scale = std::max(scale, pde[n + k].omega_total);
    }
    CHECK(gap / scale < 1e-3);
}
