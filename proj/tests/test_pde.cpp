#include "catch_amalgamated.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stemflow/grid.hpp"
#include "stemflow/pde_full.hpp"
#include "stemflow/pde_reduced.hpp"

using namespace stemflow;

namespace {

RescaledParameters params_for(double d = 1.05) {
    RawParameters raw;
    raw.d = d;
    return rescale(raw);
}

double bump(double x, double lo, double hi) {
    if (x <= lo || x >= hi) return 0.0;
    const double s = (x - lo) / (hi - lo);
    return std::pow(std::sin(M_PI * s), 2);
}

double l1_gap(const std::vector<double>& u, const GridSpec& g, double lo, double hi) {
    double e = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) e += std::abs(u[i] - bump(g.x_center(i), lo, hi)) * g.width(i);
    return e;
}

ReducedSwitches switches(bool alpha, bool omega, bool division = true) {
    ReducedSwitches sw;
    sw.alpha = alpha;
    sw.omega = omega;
    sw.division = division;
    return sw;
}

}  // namespace

TEST_CASE("totals of simple states", "[pde]") {
    const auto p = params_for();
    const auto g = default_cycle_grid(p);
    const FullSolver solver(p, g);
    FullState s = solver.initial(0.0);
    CHECK(totals(s, g).a_bar == 0.0);
    CHECK(totals(s, g).omega_bar == 0.0);
    s.a_star = 1.0;
    CHECK(totals(s, g).a_bar == 1.0);
    s.a_star = 0.0;
    std::fill(s.omega_star.begin(), s.omega_star.end(), 1.0);
    CHECK(std::abs(totals(s, g).omega_bar - 1.0) < 1e-12);
}

TEST_CASE("grids violating the CFL bound are rejected", "[pde]") {
    const auto p = params_for();
    CHECK_THROWS_AS(uniform_grid(p, 256, 1.5), CflViolation);
    CHECK_THROWS_AS(cycle_aligned_grid(p, 0), CflViolation);
    GridSpec g = default_cycle_grid(p);
    g.dt *= 1.5;
    CHECK_THROWS_AS(FullSolver(p, g), CflViolation);
    GridSpec misaligned = uniform_grid(p, 200);
    CHECK_THROWS_AS(FullSolver(p, misaligned), CflViolation);
    GridSpec u = uniform_grid(p, 256);
    u.dt *= 2.0;
    CHECK_THROWS_AS(ReducedSolver(Variant::Approx4, p, u), CflViolation);
}

TEST_CASE("fields stay nonnegative on long runs", "[pde]") {
    for (double d : {1.02, 1.05, 1.2}) {
        const auto p = params_for(d);
        const FullSolver full(p, default_cycle_grid(p));
        FullState s = full.initial(1.0);
        REQUIRE_NOTHROW(full.run(s, 40.0, 1.0));
        for (double v : s.omega) CHECK(v >= -1e-12);
        for (double v : s.omega_star) CHECK(v >= -1e-12);
        for (double v : s.a) CHECK(v >= -1e-12);
        for (auto v : {Variant::Approx1, Variant::Approx2, Variant::Approx3, Variant::Approx4}) {
            const ReducedSolver r(v, p, default_reduced_grid(v, p));
            ReducedState rs = r.initial(1.0);
            REQUIRE_NOTHROW(r.run(rs, 100.0, 1.0));
            for (double x : rs.omega) CHECK(x >= -1e-12);
            CHECK(rs.a_star >= 0.0);
        }
    }
}

TEST_CASE("without transfers the Alpha mass is conserved as it drains into A*", "[pde]") {
    const auto p = params_for();
    const auto g = default_cycle_grid(p);
    const FullSolver solver(p, g, {.transfers = false, .division = false});
    FullState s = solver.initial(0.0);
    for (std::size_t i = 0; i < g.nx; ++i) s.a[i] = bump(g.x_center(i), 0.3, 0.6);
    double prev = totals(s, g).a_bar;
    for (int n = 0; n < 24 * 8 * g.hour_subdivisions; ++n) {
        solver.step(s);
        const double now = totals(s, g).a_bar;
        CHECK(std::abs(now - prev) < 1e-10);
        prev = now;
    }
    CHECK(s.a_star > 0.0);
}

TEST_CASE("pure transport converges at first order in dx", "[pde]") {
    const auto p = params_for();
    const double days = 1.0;
    std::vector<double> err_a, err_w;
    for (int sub : {1, 2, 4}) {
        const auto g = cycle_aligned_grid(p, sub, 0.5);
        const FullSolver solver(p, g, {.transfers = false, .division = false});
        FullState s = solver.initial(0.0);
        for (std::size_t i = 0; i < g.nx; ++i) {
            s.a[i] = bump(g.x_center(i), 0.45, 0.9);
            s.omega_star[i] = bump(g.x_center(i), 0.05, 0.4);
        }
        const long steps = std::lround(days / g.dt);
        for (long n = 0; n < steps; ++n) solver.step(s);
        err_a.push_back(l1_gap(s.a, g, 0.45 - p.rho_r * days, 0.9 - p.rho_r * days));
        err_w.push_back(l1_gap(s.omega_star, g, 0.05 + p.rho_d * days, 0.4 + p.rho_d * days));
    }
    for (std::size_t k = 1; k < err_a.size(); ++k) {
        const double ra = err_a[k - 1] / err_a[k];
        const double rw = err_w[k - 1] / err_w[k];
        CHECK(ra > 1.6);
        CHECK(ra < 2.6);
        CHECK(rw > 1.6);
        CHECK(rw < 2.6);
    }
    CHECK(err_w.back() < 0.02);
}

TEST_CASE("G1 indicator follows the cohort's cycle phase", "[pde]") {
    for (double d : {1.02, 1.05, 1.2}) {
        RawParameters raw;
        raw.d = d;
        const auto p = rescale(raw);
        const auto g = default_cycle_grid(p);
        const auto ind = g1_indicator(g, p);
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double hours = 24.0 * g.x_center(i) / p.rho_d;
            const double phase = hours - raw.c2_hours * std::floor(hours / raw.c2_hours);
            CHECK((ind[i] == 1) == (phase >= raw.c1_hours));
        }
    }
}

TEST_CASE("an Omega* cohort doubles when it crosses the division abscissa", "[pde]") {
    const auto p = params_for();
    const auto g = default_cycle_grid(p);
    const ReducedSolver solver(Variant::Approx2, p, g, switches(false, false));
    ReducedState s = solver.initial(0.0);
    const double face = p.rho_d * p.c1_days;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double x = g.x_center(i);
        s.omega[i] = x < face && x > face - 0.05 ? 1.0 : 0.0;
    }
    const double before = solver.totals(s).omega_bar;
    const long steps = std::lround(0.06 / p.rho_d / g.dt);
    for (long n = 0; n < steps; ++n) solver.step(s);
    CHECK(std::abs(solver.totals(s).omega_bar - 2.0 * before) < 1e-12);
}

TEST_CASE("Approx1 without transfers grows like exp(b t) before outflow", "[pde]") {
    const auto p = params_for();
    const auto g = default_uniform_grid(p);
    const ReducedSolver solver(Variant::Approx1, p, g, switches(false, false));
    ReducedState s = solver.initial(0.0);
    for (std::size_t i = 0; i < g.nx; ++i) s.omega[i] = bump(g.x_center(i), 0.05, 0.25);
    const double m0 = solver.totals(s).omega_bar;
    const auto trace = solver.run(s, 3.0, 0.5);
    for (const auto& r : trace) {
        const double exact = m0 * std::exp(p.b * r.t_days);
        CHECK(std::abs(r.omega_total - exact) / exact < 1e-3);
    }
}

TEST_CASE("Approx2 with no return flux drains A* monotonically", "[pde]") {
    const auto p = params_for();
    const ReducedSolver solver(Variant::Approx2, p, default_cycle_grid(p), switches(false, true));
    ReducedState s = solver.initial(1.0);
    const auto trace = solver.run(s, 20.0, 0.25);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].a_total < trace[i - 1].a_total);
}

TEST_CASE("Approx3 with b = 0 and no return flux drains A* monotonically", "[pde]") {
    auto p = params_for();
    p.b = 0.0;
    const ReducedSolver solver(Variant::Approx3, p, default_uniform_grid(p), switches(false, true));
    ReducedState s = solver.initial(1.0);
    const auto trace = solver.run(s, 20.0, 0.25);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].a_total < trace[i - 1].a_total);
}

TEST_CASE("Approx4 keeps zero data at zero", "[pde]") {
    const auto p = params_for();
    const ReducedSolver solver(Variant::Approx4, p, default_uniform_grid(p));
    ReducedState s = solver.initial(0.0);
    solver.run(s, 50.0, 1.0);
    CHECK(s.a_star == 0.0);
    for (double v : s.omega) CHECK(v == 0.0);
}

TEST_CASE("Approx2 without division equals Approx3 with kappa = 1 and b = 0", "[pde]") {
    auto p = params_for();
    p.kappa = 1.0;
    p.b = 0.0;
    const auto g = default_cycle_grid(p);
    const ReducedSolver two(Variant::Approx2, p, g, switches(true, true, false));
    const ReducedSolver three(Variant::Approx3, p, g);
    ReducedState s2 = two.initial(1.0);
    ReducedState s3 = three.initial(1.0);
    const long steps = std::lround(30.0 / g.dt);
    for (long n = 0; n < steps; ++n) {
        two.step(s2);
        three.step(s3);
    }
    CHECK(std::abs(s2.a_star - s3.a_star) < 1e-10);
    double gap = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) gap = std::max(gap, std::abs(s2.omega[i] - s3.omega[i]));
    CHECK(gap < 1e-10);
}

TEST_CASE("Approx4 budget identity holds to first order in dt", "[pde]") {
    const auto p = params_for();
    // Largest per-step defect of d/dt (A* + Omega_bar) = b Omega_bar - rho_d Omega*(1).
    const auto defect = [&](std::size_t nx) {
        const auto g = uniform_grid(p, nx);
        const ReducedSolver solver(Variant::Approx4, p, g);
        ReducedState s = solver.initial(1.0);
        double worst = 0.0;
        const long steps = std::lround(20.0 / g.dt);
        for (long n = 0; n < steps; ++n) {
            const Totals t0 = solver.totals(s);
            const double rhs = p.b * t0.omega_bar - p.rho_d * s.omega.back();
            solver.step(s);
            const Totals t1 = solver.totals(s);
            const double lhs = (t1.a_bar + t1.omega_bar - t0.a_bar - t0.omega_bar) / g.dt;
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        return worst;
    };
    const double coarse = defect(128);
    const double fine = defect(256);
    const double finer = defect(512);
    CHECK(coarse < 0.05);
    CHECK(coarse / fine > 1.6);
    CHECK(fine / finer > 1.6);
}

TEST_CASE("reduced and full runs are deterministic", "[pde]") {
    const auto p = params_for();
    const FullSolver full(p, default_cycle_grid(p));
    FullState a = full.initial(1.0);
    FullState b = full.initial(1.0);
    const auto ta = full.run(a, 10.0, 1.0);
    const auto tb = full.run(b, 10.0, 1.0);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i].omega_total == tb[i].omega_total);
    for (auto v : {Variant::Approx1, Variant::Approx2, Variant::Approx3, Variant::Approx4}) {
        const ReducedSolver r(v, p, default_reduced_grid(v, p));
        ReducedState x = r.initial(1.0);
        ReducedState y = r.initial(1.0);
        r.run(x, 20.0, 1.0);
        r.run(y, 20.0, 1.0);
        CHECK(x.omega == y.omega);
        CHECK(x.a_star == y.a_star);
    }
}
