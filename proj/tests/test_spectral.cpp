#include "catch_amalgamated.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "stemflow/spectral.hpp"

using namespace stemflow;

namespace {

RescaledParameters params_for(double d = 1.05) {
    RawParameters raw;
    raw.d = d;
    return rescale(raw);
}

// alpha(x) = c0 + c1 x + c2 x^2 with its exact primitive.
FrozenRates quadratic_rates(double c0, double c1, double c2, double omega, double b, double rho) {
    FrozenRates r;
    r.alpha = [=](double x) { return c0 + c1 * x + c2 * x * x; };
    r.alpha_integral = [=](double x) { return c0 * x + c1 * x * x / 2.0 + c2 * x * x * x / 3.0; };
    r.omega = omega;
    r.b = b;
    r.rho_d = rho;
    return r;
}

// Composite Simpson on n (even) panels.
template <class F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

// Five-point central difference.
template <class F>
double derivative(F&& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

}  // namespace

TEST_CASE("constant alpha at b* has a zero eigenvalue", "[spectral]") {
    for (double b : {0.1, 0.42, 0.9}) {
        const double rho = 0.1884;
        const double bs = b_star(b, rho);
        const auto eig = real_eigenvalue(FrozenRates::constant(bs, 0.7, b, rho));
        CHECK(std::abs(eig.lambda()) < 1e-8);
        CHECK(real_eigenvalue(FrozenRates::constant(bs * 1.05, 0.7, b, rho)).lambda() > 0.0);
        CHECK(real_eigenvalue(FrozenRates::constant(bs * 0.95, 0.7, b, rho)).lambda() < 0.0);
    }
}

TEST_CASE("sign of the eigenvalue follows the zero-state integral", "[spectral]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int positive = 0, negative = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const double rho = 0.05 + 0.8 * u(rng);
        const double b = 0.05 + 1.0 * u(rng);
        const double c0 = 0.01 + 1.5 * u(rng);
        const double c1 = 0.5 * u(rng);
        const double c2 = 0.5 * u(rng);
        const double omega = 0.05 + 2.0 * u(rng);
        const auto r = quadratic_rates(c0, c1, c2, omega, b, rho);
        const double oracle = simpson(
            [&](double x) { return r.alpha(x) * std::exp((b * x - r.alpha_integral(x)) / rho); }, 0.0, 1.0, 20000);
        if (std::abs(oracle - rho) < 1e-8 * rho) continue;
        const double lambda = real_eigenvalue(r).lambda();
        CHECK((lambda > 0.0) == (oracle > rho));
        (lambda > 0.0 ? positive : negative)++;
    }
    CHECK(positive > 20);
    CHECK(negative > 20);
}

TEST_CASE("eigenfunction normalisation and dispersion relation", "[spectral]") {
    const auto p = params_for();
    const auto eig = real_eigenvalue(zero_state_rates(p));
    CHECK(std::abs(eig.normalisation() - 1.0) < 1e-10);
    CHECK(std::abs(eig.dispersion_residual()) < 1e-8);
    CHECK(eig.a() > 0.0);
    CHECK(eig.omega_at(0.5) > 0.0);
    const auto& r = eig.rates();
    CHECK(std::abs(r.rho_d * eig.omega_at(0.0) - r.omega * eig.a()) < 1e-10);
}

TEST_CASE("adjoint eigenfunction solves its ODE and vanishes at x = 1", "[spectral]") {
    const auto p = params_for();
    std::vector<FrozenRates> cases{zero_state_rates(p, Variant::Approx3), zero_state_rates(p, Variant::Approx4),
                                   zero_state_rates(params_for(1.2)), quadratic_rates(0.3, 0.2, 0.1, 0.5, 0.42, 0.3)};
    for (const auto& r : cases) {
        const auto eig = real_eigenvalue(r);
        CHECK(eig.phi_at(1.0) == 0.0);
        CHECK(std::abs(eig.phi0() - eig.phi_at(0.0)) < 1e-12);
        const int n = 16;
        for (int k = 0; k < n; ++k) {
            const double x = 0.5 * (1.0 - std::cos(M_PI * (k + 0.5) / n));
            const double h = std::min(5e-4, (1.0 - x) / 2.5);
            const double dphi = derivative([&](double y) { return eig.phi_at(y); }, x, h);
            CHECK(std::abs(eig.adjoint_residual(x, dphi)) < 1e-8);
        }
    }
}

TEST_CASE("adjoint pairing intertwines the generator", "[spectral]") {
    const auto p = params_for();
    const auto eig = real_eigenvalue(zero_state_rates(p));
    const auto& r = eig.rates();
    // Smooth test state obeying the inflow condition rho_d Omega(0) = omega A.
    const auto om = [](double x) { return (1.0 + x * x) * std::exp(-x); };
    const auto dom = [](double x) { return (2.0 * x - 1.0 - x * x) * std::exp(-x); };
    const double a = r.rho_d * om(0.0) / r.omega;
    const int n = 2000;
    const double int_alpha_om = simpson([&](double x) { return r.alpha(x) * om(x); }, 0.0, 1.0, n);
    const auto lom = [&](double x) { return -r.rho_d * dom(x) + (r.b - r.alpha(x)) * om(x); };
    const double la = -r.omega * a + int_alpha_om;
    const double lhs = simpson([&](double x) { return eig.phi_at(x) * lom(x); }, 0.0, 1.0, n) + eig.psi() * la;
    const double rhs = eig.lambda() * (simpson([&](double x) { return eig.phi_at(x) * om(x); }, 0.0, 1.0, n) +
                                       eig.psi() * a);
    CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-6);
}

TEST_CASE("G - L increases across the bracket", "[spectral]") {
    const auto r = zero_state_rates(params_for());
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 200; ++k) {
        const double lam = -r.omega + 1e-6 + 5.0 * k / 200.0;
        const double v = r.rho_d * (lam / r.omega + 1.0) - dispersion_l(r, lam);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("zero-state verdicts", "[spectral]") {
    FrozenRates none = FrozenRates::constant(0.0, 1.0, 0.42, 0.1884);
    CHECK(zero_state_condition(none) == ZeroStability::Attractive);
    const double bs = b_star(0.42, 0.1884);
    CHECK(zero_state_condition(FrozenRates::constant(1.1 * bs, 1.0, 0.42, 0.1884)) == ZeroStability::Unstable);
    CHECK(zero_state_condition(params_for(1.2)) == ZeroStability::Attractive);
    CHECK(zero_state_condition(params_for(1.05)) == ZeroStability::Unstable);
}

TEST_CASE("zero-state instability matches existence of a nonzero steady state", "[spectral]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ud(1.01, 1.4), ub(0.1, 1.2);
    for (int trial = 0; trial < 200; ++trial) {
        RawParameters raw;
        raw.d = ud(rng);
        raw.b_per_day = ub(rng);
        const auto p = rescale(raw);
        const auto r = zero_state_rates(p);
        if (std::abs(zero_state_integral(r) - r.rho_d) < 1e-8) continue;
        CHECK((zero_state_condition(r) == ZeroStability::Unstable) == exists_nonzero_approx3(p));
        CHECK((real_eigenvalue(r).lambda() > 0.0) == exists_nonzero_approx3(p));
    }
}

TEST_CASE("characteristic function symmetries and decay", "[spectral]") {
    const auto eq = characteristic_equation(params_for());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ure(-3.0, 3.0), uim(-20.0, 20.0);
    for (int k = 0; k < 100; ++k) {
        const cplx z(ure(rng), uim(rng));
        const cplx a = eq.f(std::conj(z));
        const cplx b = std::conj(eq.f(z));
        CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
    }
    double prev = std::abs(eq.f(10.0));
    for (double lam : {100.0, 1e3, 1e4}) {
        const double v = std::abs(eq.f(lam));
        CHECK(v < prev);
        prev = v;
    }
    CHECK(prev < 1e-2);
    // The series branch near lambda = 0 agrees with the closed form evaluated directly.
    const auto p = params_for();
    const double bs = b_star(p.b, p.rho_d);
    for (double lam : {1e-4, -1e-4, 0.9e-3 * p.rho_d}) {
        const double closed = (p.b * (1.0 - std::exp(-lam / p.rho_d)) - lam) / (lam * (p.b - bs - lam));
        CHECK(std::abs(eq.q(cplx(lam)).real() - closed) < 1e-10 * std::abs(closed));
    }
}

TEST_CASE("rightmost roots in the stable and oscillatory regions", "[spectral]") {
    const auto stable = params_for(1.05);
    const auto rs = rightmost_roots(characteristic_equation(stable));
    REQUIRE_FALSE(rs.empty());
    CHECK(rs.front().lambda.real() < 0.0);

    const auto ru = rightmost_roots(characteristic_equation(params_for(1.02)));
    REQUIRE_FALSE(ru.empty());
    CHECK(ru.front().lambda.real() > 0.0);
    CHECK(std::abs(ru.front().lambda.imag()) > 1e-3);

    for (const auto* roots : {&rs, &ru}) {
        for (const auto& r : *roots) CHECK(r.residual < 1e-10);
        for (std::size_t i = 0; i < roots->size(); ++i) {
            for (std::size_t j = i + 1; j < roots->size(); ++j) {
                CHECK(std::abs((*roots)[i].lambda - (*roots)[j].lambda) >= 1e-6);
            }
        }
    }
}

TEST_CASE("frozen-rate Approx4 grows at the real eigenvalue", "[spectral]") {
    const auto p = params_for();
    for (double a : {0.15, 0.3}) {
        const double w = 0.8;
        const double lambda = real_eigenvalue(FrozenRates::constant(a, w, p.b, p.rho_d)).lambda();
        ReducedSwitches sw;
        sw.frozen_alpha = a;
        sw.frozen_omega = w;
        const ReducedSolver solver(Variant::Approx4, p, default_uniform_grid(p), sw);
        ReducedState s = solver.initial(1.0);
        const auto trace = solver.run(s, 80.0, 1.0);
        const auto mass = [&](std::size_t i) { return trace[i].a_total + trace[i].omega_total; };
        const std::size_t i0 = 50, i1 = 80;
        const double rate = std::log(mass(i1) / mass(i0)) / (trace[i1].t_days - trace[i0].t_days);
        CHECK(std::abs(rate - lambda) <= 0.01 * std::abs(lambda));
    }
}

TEST_CASE("Lyapunov functional along Approx3 runs", "[spectral]") {
    const auto stable = params_for(1.2);
    const ReducedSolver solver(Variant::Approx3, stable, default_uniform_grid(stable));
    const LyapunovFunctional fn(real_eigenvalue(zero_state_rates(stable)), solver.grid());
    REQUIRE(fn.lambda() < 0.0);
    CHECK(lyapunov_trace(solver, solver.initial(0.0), fn, 10.0).max_increment == 0.0);
    const auto series = lyapunov_trace(solver, solver.initial(1.0), fn, 50.0);
    CHECK(series.max_increment < 1e-6);
    CHECK(series.v.back() < series.v.front());

    const auto growing = params_for(1.05);
    const ReducedSolver gsolver(Variant::Approx3, growing, default_uniform_grid(growing));
    const LyapunovFunctional gfn(real_eigenvalue(zero_state_rates(growing)), gsolver.grid());
    REQUIRE(gfn.lambda() > 0.0);
    const auto up = lyapunov_trace(gsolver, gsolver.initial(1e-6), gfn, 10.0);
    CHECK(up.v.back() > up.v.front());
}
