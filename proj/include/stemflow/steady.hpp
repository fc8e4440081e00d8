#pragma once

// Steady states of the reduced systems with one scalar reservoir (the
// Approximation 3 and 4 systems).
//
// With F(z) = z exp(-z / rho_d), b* is the other solution of F(b*) = F(b)
// (b* = b at b = rho_d). Approx4 has a nonzero steady state iff
// alpha(0) > b*; Approx3 iff H(0) > rho_d / b with
//   H(A) = int_0^1 exp( int_x^1 (alpha(y, A) - b) / rho_d dy ) dx.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "stemflow/error.hpp"
#include "stemflow/grid.hpp"
#include "stemflow/numerics.hpp"
#include "stemflow/params.hpp"
#include "stemflow/pde_reduced.hpp"

namespace stemflow {

inline double b_star(double b, double rho_d) {
    if (!(b > 0.0) || !(rho_d > 0.0)) throw InvalidParameter("b_star needs b > 0 and rho_d > 0");
    // In u = z / rho_d: ln u - u = ln v - v, with u on the other side of 1.
    const double v = b / rho_d;
    if (v == 1.0) return b;
    const double target = std::log(v) - v;
    const auto h = [&](double u) { return std::log(u) - u - target; };
    double u = 0.0;
    if (v > 1.0) {
        const double tiny = std::numeric_limits<double>::min();
        // For huge v the companion root underflows: u ~ e^{target}.
        if (h(tiny) >= 0.0) return rho_d * std::exp(target);
        u = bisect(h, tiny, 1.0);
    } else {
        double hi = 2.0;
        while (h(hi) > 0.0) hi *= 2.0;
        u = bisect(h, 1.0, hi);
    }
    return rho_d * u;
}

// Approx4 transfer rate at zero population.
inline double alpha4_at_zero(const RescaledParameters& p) { return alpha_approx4(p, 0.0); }

inline bool exists_nonzero_approx4(const RescaledParameters& p) {
    return alpha4_at_zero(p) > b_star(p.b, p.rho_d);
}

namespace detail {

// int_x^1 kappa alpha(y, A) dy for the Approx3 profile s e^{-gamma y}.
inline double alpha3_tail_integral(const RescaledParameters& p, double scale, double x) {
    return scale * std::exp(-p.gamma * x) * -std::expm1(-p.gamma * (1.0 - x)) / p.gamma;
}

}  // namespace detail

inline double approx3_h(const RescaledParameters& p, double a_star) {
    const double scale = p.kappa * f_alpha(p, a_star);
    return integrate(
        [&](double x) {
            return std::exp((detail::alpha3_tail_integral(p, scale, x) - p.b * (1.0 - x)) / p.rho_d);
        },
        0.0, 1.0);
}

inline bool exists_nonzero_approx3(const RescaledParameters& p) { return approx3_h(p, 0.0) > p.rho_d / p.b; }

struct SteadyState {
    Variant variant = Variant::Approx4;
    bool exists = false;
    double a_tilde = 0.0;
    double omega_bar = 0.0;
    double omega0 = 0.0;  // profile value at x = 0
    double b_star = 0.0;  // Approx4 only
    double rho_d = 0.0;
    double b = 0.0;
    // Approx4: alpha(A~) (x-independent). Approx3: kappa f_alpha(A~), the
    // profile being alpha_scale e^{-gamma x}.
    double alpha_scale = 0.0;
    double gamma = 0.0;

    // int_0^x (b - alpha(y, A~)) / rho_d dy
    [[nodiscard]] double exponent(double x) const {
        if (variant == Variant::Approx4) return (b - alpha_scale) * x / rho_d;
        return (b * x - alpha_scale * (-std::expm1(-gamma * x)) / gamma) / rho_d;
    }
    [[nodiscard]] double profile(double x) const { return omega0 * std::exp(exponent(x)); }

    // Cell averages of the profile on a maturity grid.
    [[nodiscard]] std::vector<double> cell_averages(const GridSpec& g) const {
        std::vector<double> out(g.nx);
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double lo = g.x_left(i);
            const double w = g.width(i);
            out[i] = integrate([&](double x) { return profile(x); }, lo, lo + w) / w;
        }
        return out;
    }
};

namespace detail {

// Grows hi geometrically from 1 until pred(hi) holds; capped at 1e12.
template <class Pred>
double grow_bracket(Pred&& pred, const char* what) {
    double hi = 1.0;
    while (!pred(hi)) {
        hi *= 2.0;
        if (hi > 1e12) throw NoNonzeroSteadyState(std::string("no bracket for ") + what + " below 1e12");
    }
    return hi;
}

// Omega_bar solving Omega_bar = gain * omega(Omega_bar) (omega decreasing).
inline double solve_omega_balance(const RescaledParameters& p, double gain) {
    const auto g = [&](double w) { return gain * omega_reduced(p, w) - w; };
    const double hi = grow_bracket([&](double w) { return g(w) < 0.0; }, "Omega_bar");
    return bisect(g, 0.0, hi);
}

}  // namespace detail

inline SteadyState solve_steady_approx4(const RescaledParameters& p) {
    SteadyState s;
    s.variant = Variant::Approx4;
    s.rho_d = p.rho_d;
    s.b = p.b;
    s.gamma = p.gamma;
    s.b_star = b_star(p.b, p.rho_d);
    if (!(alpha4_at_zero(p) > s.b_star)) {
        throw NoNonzeroSteadyState("no nonzero steady state: alpha(0) <= b*");
    }
    const auto ga = [&](double a) { return alpha_approx4(p, a) - s.b_star; };
    const double hi = detail::grow_bracket([&](double a) { return ga(a) < 0.0; }, "A~");
    s.a_tilde = bisect(ga, 0.0, hi);
    s.alpha_scale = alpha_approx4(p, s.a_tilde);
    // A~ omega(Omega_bar) = alpha(A~) Omega_bar with alpha(A~) = b*.
    s.omega_bar = detail::solve_omega_balance(p, s.a_tilde / s.b_star);
    // Omega0 = Omega_bar / int_0^1 e^{(b - b*) x / rho_d} dx
    s.omega0 = s.omega_bar / expm1_over((p.b - s.b_star) / p.rho_d);
    s.exists = true;
    return s;
}

inline SteadyState solve_steady_approx3(const RescaledParameters& p) {
    SteadyState s;
    s.variant = Variant::Approx3;
    s.rho_d = p.rho_d;
    s.b = p.b;
    s.gamma = p.gamma;
    s.b_star = b_star(p.b, p.rho_d);
    const double target = p.rho_d / p.b;
    const auto gh = [&](double a) { return approx3_h(p, a) - target; };
    if (!(gh(0.0) > 0.0)) throw NoNonzeroSteadyState("no nonzero steady state: H(0) <= rho_d / b");
    const double hi = detail::grow_bracket([&](double a) { return gh(a) < 0.0; }, "A~");
    s.a_tilde = bisect(gh, 0.0, hi);
    s.alpha_scale = p.kappa * f_alpha(p, s.a_tilde);
    const double j = integrate([&](double x) { return std::exp(s.exponent(x)); }, 0.0, 1.0);
    // rho_d Omega0 = omega A~ and Omega_bar = Omega0 J.
    s.omega_bar = detail::solve_omega_balance(p, j * s.a_tilde / p.rho_d);
    s.omega0 = s.omega_bar / j;
    s.exists = true;
    return s;
}

inline SteadyState solve_steady(const RescaledParameters& p, Variant v) {
    switch (v) {
        case Variant::Approx3: return solve_steady_approx3(p);
        case Variant::Approx4: return solve_steady_approx4(p);
        default: throw InvalidParameter("steady states are available for approx3 and approx4 only");
    }
}

// Largest relative residual of the steady-state relations:
//   A~ = alpha Omega_bar / omega(Omega_bar)   (reservoir balance)
//   rho_d = int alpha(x) e^{u(x)} dx          (renewal condition)
//   Omega_bar = Omega0 int e^{u(x)} dx        (mass)
//   rho_d Omega0 = omega(Omega_bar) A~        (inflow boundary)
inline double steady_residual(const SteadyState& s, const RescaledParameters& p) {
    const double w = omega_reduced(p, s.omega_bar);
    const auto alpha_x = [&](double x) {
        return s.variant == Variant::Approx4 ? s.alpha_scale : s.alpha_scale * std::exp(-p.gamma * x);
    };
    const double mass = integrate([&](double x) { return std::exp(s.exponent(x)); }, 0.0, 1.0);
    const double renewal = integrate([&](double x) { return alpha_x(x) * std::exp(s.exponent(x)); }, 0.0, 1.0);
    const double outflow_to_reservoir = s.omega0 * renewal;  // int alpha Omega dx
    double r = 0.0;
    r = std::max(r, std::abs(s.a_tilde * w - outflow_to_reservoir) / (s.a_tilde * w));
    r = std::max(r, std::abs(renewal - p.rho_d) / p.rho_d);
    r = std::max(r, std::abs(s.omega0 * mass - s.omega_bar) / s.omega_bar);
    r = std::max(r, std::abs(p.rho_d * s.omega0 - w * s.a_tilde) / (w * s.a_tilde));
    if (s.variant == Variant::Approx4) {
        r = std::max(r, std::abs(s.alpha_scale - s.b_star) / s.b_star);
    }
    return r;
}

// Fixed point of the discrete Approx3/4 step map near `guess` (Newton with a
// finite-difference Jacobian). The scheme's own steady state differs from the
// continuum one by the discretisation error; perturbation experiments that
// must stay linear start from this state.
inline ReducedState discrete_steady_state(const ReducedSolver& solver, ReducedState guess, int max_iter = 8) {
    if (solver.variant() != Variant::Approx3 && solver.variant() != Variant::Approx4) {
        throw InvalidParameter("discrete steady states are available for approx3 and approx4 only");
    }
    const std::size_t nx = guess.omega.size();
    const Eigen::Index n = static_cast<Eigen::Index>(nx + 1);
    const auto pack = [&](const ReducedState& s) {
        Eigen::VectorXd v(n);
        for (std::size_t i = 0; i < nx; ++i) v(static_cast<Eigen::Index>(i)) = s.omega[i];
        v(n - 1) = s.a_star;
        return v;
    };
    const auto unpack = [&](const Eigen::VectorXd& v, ReducedState& s) {
        for (std::size_t i = 0; i < nx; ++i) s.omega[i] = v(static_cast<Eigen::Index>(i));
        s.a_star = v(n - 1);
    };
    const auto residual = [&](const Eigen::VectorXd& v) {
        ReducedState s = guess;
        unpack(v, s);
        solver.step(s);
        return Eigen::VectorXd(pack(s) - v);
    };
    Eigen::VectorXd u = pack(guess);
    const double scale = u.cwiseAbs().maxCoeff();
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd r = residual(u);
        if (r.cwiseAbs().maxCoeff() <= 1e-15 * scale) break;
        Eigen::MatrixXd jac(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(std::abs(u(j)), 1e-3 * scale);
            Eigen::VectorXd up = u;
            Eigen::VectorXd um = u;
            up(j) += h;
            um(j) -= h;
            jac.col(j) = (residual(up) - residual(um)) / (2.0 * h);
        }
        u -= jac.partialPivLu().solve(r);
    }
    const Eigen::VectorXd r = residual(u);
    if (!(r.cwiseAbs().maxCoeff() <= 1e-12 * scale)) throw NumericalFailure("discrete steady state did not converge");
    unpack(u, guess);
    return guess;
}

// Initial state of a reduced solver placed at the steady state.
inline ReducedState steady_initial_state(const SteadyState& s, const ReducedSolver& solver) {
    ReducedState st = solver.initial(s.a_tilde);
    st.omega = s.cell_averages(solver.grid());
    return st;
}

}  // namespace stemflow
