#pragma once

// Spectral tools for the reduced systems.
//
// Frozen-coefficient eigenproblem (populations fixed):
//   rho_d Omega' = (b - lambda - alpha(x)) Omega,   rho_d Omega(0) = omega A,
//   (lambda + omega) A = int alpha Omega,           int Omega = 1,
// whose real eigenvalue solves G(lambda) = L(lambda) with
//   G(lambda) = rho_d (lambda / omega + 1),
//   L(lambda) = int_0^1 alpha(x) exp((b x - I(x) - lambda x) / rho_d) dx,  I' = alpha.
// The adjoint (phi, Psi) has phi(1) = 0, (lambda + omega) Psi = omega phi(0), and
// is normalised by phi(0) = 1.
//
// Linearisation of the Approx4 system at its nonzero steady state gives the
// characteristic equation f(lambda) = 1 (see CharacteristicEquation).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "stemflow/error.hpp"
#include "stemflow/numerics.hpp"
#include "stemflow/parallel.hpp"
#include "stemflow/params.hpp"
#include "stemflow/pde_reduced.hpp"
#include "stemflow/steady.hpp"

namespace stemflow {

using cplx = std::complex<double>;

struct FrozenRates {
    std::function<double(double)> alpha;           // per day, x in [0, 1]
    std::function<double(double)> alpha_integral;  // int_0^x alpha; empty -> quadrature
    double omega = 0.0;
    double b = 0.0;
    double rho_d = 0.0;

    [[nodiscard]] double cumulative_alpha(double x) const {
        if (alpha_integral) return alpha_integral(x);
        return integrate(alpha, 0.0, x);
    }

    static FrozenRates constant(double alpha_value, double omega, double b, double rho_d) {
        FrozenRates r;
        r.alpha = [alpha_value](double) { return alpha_value; };
        r.alpha_integral = [alpha_value](double x) { return alpha_value * x; };
        r.omega = omega;
        r.b = b;
        r.rho_d = rho_d;
        return r;
    }
};

// Rates of the Approx3 system with A* and Omega_bar frozen.
inline FrozenRates frozen_rates_approx3(const RescaledParameters& p, double a_star, double omega_bar) {
    const double scale = p.kappa * f_alpha(p, a_star);
    const double g = p.gamma;
    FrozenRates r;
    r.alpha = [scale, g](double x) { return scale * std::exp(-g * x); };
    r.alpha_integral = [scale, g](double x) { return scale * (-std::expm1(-g * x)) / g; };
    r.omega = omega_reduced(p, omega_bar);
    r.b = p.b;
    r.rho_d = p.rho_d;
    return r;
}

inline FrozenRates frozen_rates_approx4(const RescaledParameters& p, double a_star, double omega_bar) {
    return FrozenRates::constant(alpha_approx4(p, a_star), omega_reduced(p, omega_bar), p.b, p.rho_d);
}

// Rates linearised at the zero state.
inline FrozenRates zero_state_rates(const RescaledParameters& p, Variant v = Variant::Approx3) {
    if (v == Variant::Approx4) return frozen_rates_approx4(p, 0.0, 0.0);
    if (v == Variant::Approx3) return frozen_rates_approx3(p, 0.0, 0.0);
    throw InvalidParameter("zero-state rates are defined for approx3 and approx4");
}

class EigenSolution {
public:
    EigenSolution(FrozenRates rates, double lambda) : r_(std::move(rates)), lambda_(lambda) {
        k1_ = integrate([&](double x) { return r_.alpha(x) * std::exp(exponent(x)); }, 0.0, 1.0);
        mass_ = integrate([&](double x) { return std::exp(exponent(x)); }, 0.0, 1.0);
        omega0_ = 1.0 / mass_;
        a_ = r_.rho_d * omega0_ / r_.omega;
        psi_ = r_.omega / (lambda_ + r_.omega);
    }

    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] const FrozenRates& rates() const { return r_; }
    [[nodiscard]] double a() const { return a_; }
    [[nodiscard]] double psi() const { return psi_; }
    [[nodiscard]] double phi0() const { return 1.0; }

    // (b x - I(x) - lambda x) / rho_d
    [[nodiscard]] double exponent(double x) const {
        return ((r_.b - lambda_) * x - r_.cumulative_alpha(x)) / r_.rho_d;
    }
    [[nodiscard]] double omega_at(double x) const { return omega0_ * std::exp(exponent(x)); }

    // phi(x) = int_x^1 alpha(s) e^{E(s) - E(x)} ds / int_0^1 alpha e^{E}, so phi(1) = 0 exactly.
    [[nodiscard]] double phi_at(double x) const {
        if (x >= 1.0) return 0.0;
        const double ex = exponent(x);
        return integrate([&](double s) { return r_.alpha(s) * std::exp(exponent(s) - ex); }, x, 1.0) / k1_;
    }

    // Residual of the adjoint ODE  -rho_d phi' = (b - lambda - alpha) phi + alpha Psi
    // given an independently computed derivative.
    [[nodiscard]] double adjoint_residual(double x, double phi_prime) const {
        const double a = r_.alpha(x);
        return -r_.rho_d * phi_prime - ((r_.b - lambda_ - a) * phi_at(x) + a * psi_);
    }

    // G(lambda) - L(lambda) at the computed eigenvalue (zero up to quadrature error).
    [[nodiscard]] double dispersion_residual() const {
        return r_.rho_d * (lambda_ / r_.omega + 1.0) - k1_;
    }
    [[nodiscard]] double normalisation() const { return omega0_ * mass_; }

private:
    FrozenRates r_;
    double lambda_;
    double k1_ = 0.0;
    double mass_ = 0.0;
    double omega0_ = 0.0;
    double a_ = 0.0;
    double psi_ = 0.0;
};

// L(lambda) = int alpha e^{E_lambda}
inline double dispersion_l(const FrozenRates& r, double lambda) {
    return integrate(
        [&](double x) { return r.alpha(x) * std::exp(((r.b - lambda) * x - r.cumulative_alpha(x)) / r.rho_d); },
        0.0, 1.0);
}

inline EigenSolution real_eigenvalue(const FrozenRates& r) {
    if (!(r.omega > 0.0) || !(r.rho_d > 0.0)) throw InvalidParameter("frozen rates need omega > 0 and rho_d > 0");
    if (!(r.alpha(0.0) > 0.0) || !(r.alpha(1.0) > 0.0)) throw InvalidParameter("frozen alpha must be positive");
    const auto h = [&](double lam) { return r.rho_d * (lam / r.omega + 1.0) - dispersion_l(r, lam); };
    // G vanishes at -omega while L > 0, so the root lies above -omega.
    const double lo = std::max(-r.omega, -1e3);
    if (h(lo) > 0.0) throw NumericalFailure("no eigenvalue bracket within [-1e3, 1e3]");
    double hi = 1.0;
    while (h(hi) <= 0.0) {
        hi *= 2.0;
        if (hi > 1e3) throw NumericalFailure("no eigenvalue bracket within [-1e3, 1e3]");
    }
    return EigenSolution(r, bisect(h, lo, hi));
}

enum class ZeroStability { Attractive, Unstable, Marginal };

inline const char* zero_stability_name(ZeroStability z) {
    switch (z) {
        case ZeroStability::Attractive: return "attractive";
        case ZeroStability::Unstable: return "unstable";
        case ZeroStability::Marginal: return "marginal";
    }
    return "?";
}

// int_0^1 alpha(x) exp( int_0^x (b - alpha) / rho_d ) dx, compared with rho_d.
inline double zero_state_integral(const FrozenRates& r) { return dispersion_l(r, 0.0); }

inline ZeroStability zero_state_condition(const FrozenRates& r) {
    const double z = zero_state_integral(r);
    if (std::abs(z - r.rho_d) <= 1e-10) return ZeroStability::Marginal;
    return z < r.rho_d ? ZeroStability::Attractive : ZeroStability::Unstable;
}

inline ZeroStability zero_state_condition(const RescaledParameters& p, Variant v = Variant::Approx3) {
    return zero_state_condition(zero_state_rates(p, v));
}

// ---------------------------------------------------------------------------
// Characteristic equation of the Approx4 linearisation at (A~, Omega~):
//
//   f(lambda) = E(beta) ( w' A~ / rho_d + (Omega0 / A~) (b* - w' A~) / D(lambda) )
//             - (a' Omega0 rho_d / b*) Q(lambda) (b* - w' A~) / D(lambda)
//
// with beta = (b - b* - lambda) / rho_d, E(z) = (e^z - 1) / z,
// D(lambda) = lambda - a' Omega0 rho_d / b* + Omega0 rho_d / A~ and
// Q(lambda) = (b (1 - e^{-lambda / rho_d}) - lambda) / (lambda (b - b* - lambda)).
// Both removable singularities of Q (lambda = 0 and lambda = b - b*) are
// evaluated through equivalent forms or series.

class CharacteristicEquation {
public:
    CharacteristicEquation(const SteadyState& s, const RescaledParameters& p) {
        if (!s.exists || s.variant != Variant::Approx4) {
            throw InvalidParameter("characteristic equation needs an Approx4 nonzero steady state");
        }
        b_ = p.b;
        bs_ = s.b_star;
        rho_ = p.rho_d;
        at_ = s.a_tilde;
        o0_ = s.omega0;
        ap_ = alpha_approx4_derivative(p, s.a_tilde);
        wp_ = omega_reduced_derivative(p, s.omega_bar);
        beta0_ = (b_ - bs_) / rho_;
        for (int k = 1; k <= kMoments; ++k) {
            moments_[k - 1] = integrate([&](double x) { return std::pow(x, k) * std::exp(beta0_ * x); }, 0.0, 1.0);
        }
    }

    [[nodiscard]] double alpha_prime() const { return ap_; }
    [[nodiscard]] double rho_d() const { return rho_; }
    [[nodiscard]] double omega_prime() const { return wp_; }

    [[nodiscard]] cplx d(cplx lambda) const { return lambda - ap_ * o0_ * rho_ / bs_ + o0_ * rho_ / at_; }

    [[nodiscard]] cplx q(cplx lambda) const {
        const double scale = rho_;
        if (std::abs(lambda) < 1e-3 * scale) {
            // (b*/rho) sum_k (-1)^{k+1} lambda^{k-1} M_k / (rho^k k!),  M_k = int x^k e^{beta0 x}
            cplx sum = 0.0;
            cplx power = 1.0;
            double fact = 1.0;
            for (int k = 1; k <= kMoments; ++k) {
                fact *= k;
                const double sign = (k % 2 == 1) ? 1.0 : -1.0;
                sum += sign * power * moments_[k - 1] / (std::pow(rho_, k) * fact);
                power *= lambda;
            }
            return bs_ / rho_ * sum;
        }
        const cplx denom = b_ - bs_ - lambda;
        if (std::abs(denom) > 1e-3 * scale) {
            return (b_ * (1.0 - std::exp(-lambda / rho_)) - lambda) / (lambda * denom);
        }
        return (1.0 - bs_ / rho_ * expm1_over(cplx(beta0_) - lambda / rho_)) / lambda;
    }

    [[nodiscard]] cplx f(cplx lambda) const {
        const cplx dd = d(lambda);
        if (std::abs(dd) < 1e-14) throw PoleError("characteristic function evaluated at its pole");
        const cplx e = expm1_over(cplx(beta0_) - lambda / rho_);
        const double feedback = bs_ - wp_ * at_;
        return e * (wp_ * at_ / rho_ + (o0_ / at_) * feedback / dd) - (ap_ * o0_ * rho_ / bs_) * q(lambda) * feedback / dd;
    }

    // D(lambda) (f(lambda) - 1): entire, same zeros as f - 1 away from the pole.
    [[nodiscard]] cplx entire(cplx lambda) const {
        const cplx dd = d(lambda);
        const cplx e = expm1_over(cplx(beta0_) - lambda / rho_);
        const double feedback = bs_ - wp_ * at_;
        return e * (wp_ * at_ / rho_ * dd + (o0_ / at_) * feedback) - (ap_ * o0_ * rho_ / bs_) * q(lambda) * feedback - dd;
    }

private:
    static constexpr int kMoments = 8;
    double b_ = 0.0, bs_ = 0.0, rho_ = 0.0, at_ = 0.0, o0_ = 0.0, ap_ = 0.0, wp_ = 0.0, beta0_ = 0.0;
    std::array<double, kMoments> moments_{};
};

inline CharacteristicEquation characteristic_equation(const RescaledParameters& p) {
    return CharacteristicEquation(solve_steady_approx4(p), p);
}

struct CharacteristicRoot {
    cplx lambda;
    double residual = 0.0;  // |f(lambda) - 1|
    int multiplicity_hint = 1;
};

struct RootSearchBox {
    double re_min = -5.0;
    double re_max = 5.0;
    double im_min = 0.0;
    double im_max = 40.0;
    int n_re = 21;
    int n_im = 21;
};

// Damped Newton on D (f - 1) from one start; returns a verified root.
inline std::optional<CharacteristicRoot> newton_root(const CharacteristicEquation& eq, cplx start,
                                                     int max_iter = 80) {
    cplx z = start;
    const auto value = [&](cplx w) -> std::optional<cplx> {
        const cplx v = eq.entire(w);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return std::nullopt;
        return v;
    };
    auto fz = value(z);
    if (!fz) return std::nullopt;
    cplx deriv = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double h = 1e-6 * std::max(1.0, std::abs(z));
        const auto fp = value(z + h);
        const auto fm = value(z - h);
        if (!fp || !fm) return std::nullopt;
        deriv = (*fp - *fm) / (2.0 * h);
        if (std::abs(deriv) == 0.0) return std::nullopt;
        const cplx step = *fz / deriv;
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k, t *= 0.5) {
            const cplx trial = z - t * step;
            if (std::abs(trial) > 1e4) continue;
            const auto ft = value(trial);
            if (ft && std::abs(*ft) < std::abs(*fz)) {
                z = trial;
                fz = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted || std::abs(t * step) < 1e-14 * std::max(1.0, std::abs(z))) break;
    }
    try {
        const double res = std::abs(eq.f(z) - 1.0);
        if (!(res < 1e-10)) return std::nullopt;
        CharacteristicRoot root{z, res, 1};
        if (std::abs(deriv) < 1e-8 * std::max(1.0, std::abs(z))) root.multiplicity_hint = 2;
        return root;
    } catch (const PoleError&) {
        return std::nullopt;
    }
}

// Multi-start Newton over the box; roots in the upper half plane (conjugates
// implied), deduplicated within 1e-6 and sorted by descending real part.
// Roots repeat with imaginary spacing close to 2 pi rho_d, so the imaginary
// start spacing is refined to at most half of that.
inline std::vector<CharacteristicRoot> rightmost_roots(const CharacteristicEquation& eq,
                                                       const RootSearchBox& box = {}) {
    const int nre = std::max(1, box.n_re);
    const double im_span = box.im_max - box.im_min;
    const int dense = static_cast<int>(std::ceil(im_span / (std::numbers::pi * eq.rho_d()))) + 1;
    const int nim = std::max({1, box.n_im, im_span > 0.0 ? dense : 1});
    std::vector<std::optional<CharacteristicRoot>> found(static_cast<std::size_t>(nre * nim));
    parallel_for(found.size(), [&](std::size_t k) {
        const int i = static_cast<int>(k) / nim;
        const int j = static_cast<int>(k) % nim;
        const double re = nre == 1 ? box.re_min : box.re_min + (box.re_max - box.re_min) * i / (nre - 1);
        const double im = nim == 1 ? box.im_min : box.im_min + (box.im_max - box.im_min) * j / (nim - 1);
        found[k] = newton_root(eq, cplx(re, im));
    });
    std::vector<CharacteristicRoot> roots;
    for (auto& r : found) {
        if (!r) continue;
        if (r->lambda.imag() < 0.0) r->lambda = std::conj(r->lambda);
        if (std::abs(r->lambda.imag()) < 1e-12) r->lambda.imag(0.0);
        const bool dup = std::any_of(roots.begin(), roots.end(),
                                     [&](const CharacteristicRoot& q) { return std::abs(q.lambda - r->lambda) < 1e-6; });
        if (!dup) roots.push_back(*r);
    }
    std::sort(roots.begin(), roots.end(), [](const CharacteristicRoot& a, const CharacteristicRoot& b) {
        if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
    });
    return roots;
}

// ---------------------------------------------------------------------------
// Lyapunov-type functional v(t) = int phi Omega* dx + phi(0) A* built from the
// adjoint eigenvector of the zero-state rates.

class LyapunovFunctional {
public:
    LyapunovFunctional(const EigenSolution& eig, const GridSpec& g) : lambda_(eig.lambda()) {
        weights_.resize(g.nx);
        for (std::size_t i = 0; i < g.nx; ++i) weights_[i] = eig.phi_at(g.x_center(i)) * g.width(i);
        phi0_ = eig.phi0();
    }

    [[nodiscard]] double lambda() const { return lambda_; }

    [[nodiscard]] double operator()(const ReducedState& s) const {
        double v = phi0_ * s.a_star;
        for (std::size_t i = 0; i < weights_.size(); ++i) v += weights_[i] * s.omega[i];
        return v;
    }

private:
    double lambda_;
    double phi0_ = 1.0;
    std::vector<double> weights_;
};

struct LyapunovSeries {
    std::vector<double> t;
    std::vector<double> v;
    double max_increment = 0.0;  // largest v(t_{n+1}) - v(t_n)
};

inline LyapunovSeries lyapunov_trace(const std::vector<ReducedState>& states, const LyapunovFunctional& fn) {
    LyapunovSeries out;
    out.max_increment = -std::numeric_limits<double>::infinity();
    for (const auto& s : states) {
        out.t.push_back(s.t);
        out.v.push_back(fn(s));
        if (out.v.size() > 1) out.max_increment = std::max(out.max_increment, out.v.back() - out.v[out.v.size() - 2]);
    }
    if (out.v.size() < 2) out.max_increment = 0.0;
    return out;
}

// Runs the solver and evaluates v after every step.
inline LyapunovSeries lyapunov_trace(const ReducedSolver& solver, ReducedState state, const LyapunovFunctional& fn,
                                     double days) {
    LyapunovSeries out;
    out.t.push_back(state.t);
    out.v.push_back(fn(state));
    const long steps = std::lround(days / solver.grid().dt);
    for (long n = 0; n < steps; ++n) {
        solver.step(state);
        out.t.push_back(state.t);
        out.v.push_back(fn(state));
        out.max_increment =
            n == 0 ? out.v[1] - out.v[0] : std::max(out.max_increment, out.v.back() - out.v[out.v.size() - 2]);
    }
    return out;
}

}  // namespace stemflow
