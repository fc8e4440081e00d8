#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "stemflow/pde_reduced.hpp"
#include "stemflow/scan.hpp"
#include "stemflow/steady.hpp"

using namespace stemflow;

namespace {

TotalsTrace synthetic(double days, double (*f)(double)) {
    TotalsTrace tr;
    for (double t = 0.0; t <= days + 1e-9; t += 0.25) tr.push_back({t, 0.0, f(t)});
    return tr;
}

// Oracle for Approx4 existence: alpha(0) against b* found by plain bisection.
bool exists_oracle(const RescaledParameters& p) {
    const auto f = [&](double z) { return z * std::exp(-z / p.rho_d); };
    double lo = p.b > p.rho_d ? 0.0 : p.rho_d;
    double hi = p.rho_d;
    if (p.b < p.rho_d) {
        while (f(hi) > f(p.b)) hi *= 2.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((p.b > p.rho_d) == (f(mid) < f(p.b))) lo = mid; else hi = mid;
    }
    const double alpha0 = p.kappa * std::exp(-p.gamma * p.alpha_midpoint) * f_alpha(p, 0.0);
    return alpha0 > 0.5 * (lo + hi);
}

bool same_cells(const RegionMap& a, const RegionMap& b) {
    if (a.cells.size() != b.cells.size()) return false;
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        const auto& x = a.cells[k];
        const auto& y = b.cells[k];
        if (x.regime != y.regime || x.nonzero_exists != y.nonzero_exists) return false;
        if (!(x.rightmost_re == y.rightmost_re || (std::isnan(x.rightmost_re) && std::isnan(y.rightmost_re)))) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("synthetic traces fall into the expected regimes", "[scan]") {
    CHECK(classify_trace(synthetic(100, [](double t) { return 1.0 + 0.4 * std::sin(t); })) == TraceRegime::Periodic);
    CHECK(classify_trace(synthetic(100, [](double t) { return 2.0 + std::exp(-t); })) ==
          TraceRegime::NonzeroPlateau);
    CHECK(classify_trace(synthetic(100, [](double t) { return std::exp(-0.2 * t); })) == TraceRegime::Extinct);
    // Slow decline: above 1e-3 of the peak at the end but several e-folds over the tail.
    CHECK(classify_trace(synthetic(100, [](double t) { return std::exp(-0.04 * t); })) == TraceRegime::Extinct);
    CHECK(classify_trace(synthetic(100, [](double t) { return 1.0 + 0.02 * t; })) == TraceRegime::Indeterminate);
    // Small oscillation around a plateau is not periodic.
    CHECK(classify_trace(synthetic(100, [](double t) { return 1.0 + 0.01 * std::sin(t); })) ==
          TraceRegime::NonzeroPlateau);
    CHECK_THROWS_AS(classify_trace(synthetic(30, [](double) { return 1.0; })), InvalidParameter);
}

TEST_CASE("classify_point on the reference parameters", "[scan]") {
    const auto base = rescale(RawParameters{});
    const auto v = classify_point(base, 0.1884, 0.42);
    CHECK(v.regime == Regime::StableNonzero);
    CHECK(v.nonzero_exists);
    CHECK(v.rightmost_re < 0.0);
    CHECK(classify_point(base, 0.75, 0.42).regime == Regime::StableZero);
    CHECK(classify_point(base, 0.05, 0.42).regime == Regime::UnstablePeriodic);
    CHECK_THROWS_AS(classify_point(base, 0.0, 0.42), InvalidParameter);
}

TEST_CASE("existence flag agrees with an independent oracle", "[scan]") {
    auto p = rescale(RawParameters{});
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> ur(0.04, 0.75), ub(0.2, 1.5);
    for (int k = 0; k < 200; ++k) {
        p.rho_d = ur(rng);
        p.b = ub(rng);
        const auto v = classify_point(p, p.rho_d, p.b, RootSearchBox{-5, 5, 0, 40, 3, 3});
        CHECK(v.nonzero_exists == exists_oracle(p));
        CHECK((v.regime == Regime::StableZero) == !v.nonzero_exists);
    }
}

TEST_CASE("region map is independent of the worker count and has monotone columns", "[scan]") {
    const auto base = rescale(RawParameters{});
    const auto rho = linspace(0.04, 0.75, 8);
    const auto b = linspace(0.2, 1.5, 6);
    const auto one = region_map(base, rho, b, {}, 1);
    const auto three = region_map(base, rho, b, {}, 3);
    CHECK(same_cells(one, three));
    for (std::size_t ib = 0; ib < b.size(); ++ib) CHECK(column_is_monotone(one, ib));
    const auto t = region_table(one);
    CHECK(t.rows.size() == rho.size() * b.size());
}

TEST_CASE("root trajectories cross the imaginary axis once", "[scan]") {
    const auto base = rescale(RawParameters{});
    TrajectoryOptions opt;
    opt.crossing_tolerance = 1e-6;
    const auto by_rho = root_trajectory(base, SweepParameter::RhoD, linspace(0.0422, 0.3505, 12), 0.42, opt);
    CHECK(by_rho.error.empty());
    REQUIRE(by_rho.crossings.size() == 1);
    CHECK(by_rho.crossings[0].direction == -1);
    CHECK(std::abs(by_rho.crossings[0].root.imag()) > 0.1);
    CHECK(std::abs(by_rho.crossings[0].root.real()) < 1e-4);

    const auto by_b = root_trajectory(base, SweepParameter::B, linspace(0.2, 1.5, 12), 0.1884, opt);
    CHECK(by_b.error.empty());
    REQUIRE(by_b.crossings.size() == 1);
    CHECK(by_b.crossings[0].direction == +1);
    CHECK(std::abs(by_b.crossings[0].root.imag()) > 0.1);
}

TEST_CASE("point verdicts agree with simulated Approx4 regimes", "[scan]") {
    const auto base = rescale(RawParameters{});
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ur(0.04, 0.75), ub(0.2, 1.5);
    int checked = 0;
    for (int k = 0; k < 50; ++k) {
        const double rho = ur(rng);
        const double b = ub(rng);
        const auto v = classify_point(base, rho, b);
        REQUIRE(v.regime != Regime::Indeterminate);
        // Skip points within 5% of a regime boundary.
        bool interior = true;
        for (auto [dr, db] : {std::pair{0.95, 1.0}, {1.05, 1.0}, {1.0, 0.95}, {1.0, 1.05}}) {
            if (classify_point(base, rho * dr, b * db).regime != v.regime) interior = false;
        }
        if (!interior) continue;
        auto p = base;
        p.rho_d = rho;
        p.b = b;
        // Explicit transfers need dt * max rate <= 1, dt = 1 / (nx rho_d).
        const auto nx = std::max<std::size_t>(256, static_cast<std::size_t>(std::ceil(1.25 * max_transfer_rate(p) / rho)));
        const ReducedSolver solver(Variant::Approx4, p, uniform_grid(p, nx));
        ReducedState s = v.nonzero_exists ? steady_initial_state(solve_steady_approx4(p), solver) : solver.initial(1.0);
        s.a_star *= 1.05;
        const auto tr = solver.run(s, 300.0, 0.25);
        const auto regime = classify_trace(tr);
        const TraceRegime expected = v.regime == Regime::UnstablePeriodic ? TraceRegime::Periodic
                                     : v.regime == Regime::StableNonzero  ? TraceRegime::NonzeroPlateau
                                                                          : TraceRegime::Extinct;
        CHECK(regime == expected);
        ++checked;
    }
    CHECK(checked >= 25);
}
