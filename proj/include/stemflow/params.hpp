#pragma once

// Model parameters: raw agent-model values, the rescaled PDE parameters and
// the sigmoid transition characteristics f_alpha / f_omega.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stemflow/error.hpp"

namespace stemflow {

// Values of a transition characteristic at N = 0, N~/2, N~ and infinity.
// Raw per-hour rates, as tabulated for the agent model.
struct SigmoidKnots {
    double at_zero = 0.0;
    double at_half = 0.0;
    double at_scale = 0.0;
    double at_infinity = 0.0;

    [[nodiscard]] std::array<double, 4> as_array() const { return {at_zero, at_half, at_scale, at_infinity}; }
};

// f(N) = 1 / (nu1 + nu2 exp(nu3 N / N~)) + nu4, per hour.
struct SigmoidCoefficients {
    double nu1 = 0.0;
    double nu2 = 0.0;
    double nu3 = 0.0;
    double nu4 = 0.0;
    double n_tilde = 1.0;

    [[nodiscard]] double per_hour(double n) const {
        return 1.0 / (nu1 + nu2 * std::exp(nu3 * n / n_tilde)) + nu4;
    }
    [[nodiscard]] double per_day(double n) const { return 24.0 * per_hour(n); }

    // d/dN of per_day(N).
    [[nodiscard]] double per_day_derivative(double n) const {
        const double e = std::exp(nu3 * n / n_tilde);
        const double den = nu1 + nu2 * e;
        return -24.0 * nu2 * nu3 * e / (n_tilde * den * den);
    }
};

// Builds the sigmoid through three finite knots with the prescribed limit at
// infinity; four equal knots give a constant. Throws IllConditionedSigmoid
// when the knots cannot define a decreasing sigmoid (equal finite knots, or
// h1 + h3 - 2 h2 numerically zero).
inline SigmoidCoefficients sigmoid_coefficients(const SigmoidKnots& knots, double n_tilde) {
    if (!(n_tilde > 0.0)) throw InvalidParameter("sigmoid scale N~ must be positive");
    const double f_inf = knots.at_infinity;
    if (knots.at_zero == f_inf && knots.at_half == f_inf && knots.at_scale == f_inf) {
        // Constant characteristic: 1 / (inf + 0) + f_inf.
        SigmoidCoefficients c;
        c.nu1 = std::numeric_limits<double>::infinity();
        c.nu4 = f_inf;
        c.n_tilde = n_tilde;
        return c;
    }
    if (!(knots.at_zero > knots.at_half && knots.at_half > knots.at_scale && knots.at_scale > f_inf)) {
        throw IllConditionedSigmoid("sigmoid knots must be strictly decreasing: f(0) > f(N~/2) > f(N~) > f(inf)");
    }
    const double h1 = 1.0 / (knots.at_zero - f_inf);
    const double h2 = 1.0 / (knots.at_half - f_inf);
    const double h3 = 1.0 / (knots.at_scale - f_inf);
    const double den = h1 + h3 - 2.0 * h2;
    if (std::abs(den) < 1e-12 * std::abs(h1)) {
        throw IllConditionedSigmoid("ill-conditioned sigmoid: h1 + h3 - 2 h2 is zero");
    }
    if (den < 0.0) {
        // nu2 < 0 puts a pole on the positive axis.
        throw IllConditionedSigmoid("sigmoid knots are not representable: h1 + h3 - 2 h2 < 0");
    }
    SigmoidCoefficients c;
    c.nu1 = (h1 * h3 - h2 * h2) / den;
    c.nu2 = h1 - c.nu1;
    c.nu3 = std::log((h3 - c.nu1) / c.nu2);
    c.nu4 = f_inf;
    c.n_tilde = n_tilde;
    return c;
}

struct RawParameters {
    double a_min = 0.002;
    double a_max = 1.0;
    double d = 1.05;           // per-hour differentiation factor
    double r = 1.1;            // per-hour regeneration factor
    double c1_hours = 17.0;    // S/G2/M duration
    double c2_hours = 49.0;    // full cycle
    double lambda_p_days = 20.0;
    double lambda_m_days = 8.0;
    double tau_c_hours = 24.0;
    SigmoidKnots f_alpha{0.5, 0.45, 0.05, 0.0};
    SigmoidKnots f_omega{0.5, 0.3, 0.1, 0.0};
    double n_tilde_a = 1e5;
    double n_tilde_omega = 1e5;
    double r_inh = 0.0;  // per-hour probability (imatinib mode)
    double r_deg = 0.0;
    // Cycle-averaged growth rate and G1 fraction used by the reduced systems.
    double b_per_day = 0.42;
    double kappa = 0.54;

    // The agent model also runs with d = r = 1 (no affinity change); the
    // rescaled systems need d, r > 1.
    void validate(bool allow_unit_factors = false) const {
        if (!(a_min > 0.0)) throw InvalidParameter("a_min must be > 0");
        if (!(a_min < a_max)) throw InvalidParameter("a_min must be < a_max");
        const double floor = 1.0;
        if (!(allow_unit_factors ? d >= floor : d > floor)) throw InvalidParameter("d must be > 1");
        if (!(allow_unit_factors ? r >= floor : r > floor)) throw InvalidParameter("r must be > 1");
        if (!(c1_hours > 0.0 && c1_hours < c2_hours)) throw InvalidParameter("require 0 < c1 < c2");
        if (!(n_tilde_a > 0.0 && n_tilde_omega > 0.0)) throw InvalidParameter("N~ scales must be positive");
        if (!(r_inh >= 0.0 && r_inh <= 1.0 && r_deg >= 0.0 && r_deg <= 1.0)) {
            throw InvalidParameter("r_inh and r_deg are probabilities in [0, 1]");
        }
        if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidParameter("kappa must lie in (0, 1)");
        if (!(b_per_day > 0.0)) throw InvalidParameter("b must be > 0");
        for (const auto* k : {&f_alpha, &f_omega}) {
            const auto v = k->as_array();
            for (double x : v) {
                if (!(x >= 0.0)) throw InvalidParameter("sigmoid knots must be nonnegative");
            }
            if (!(v[0] >= v[1] && v[1] >= v[2] && v[2] >= v[3])) {
                throw InvalidParameter("sigmoid knots must be nonincreasing");
            }
        }
    }
};

struct RescaledParameters {
    double gamma = 0.0;
    double a_min = 0.0;
    double rho_r = 0.0;  // per day
    double rho_d = 0.0;  // per day
    double b = 0.0;      // per day
    double kappa = 0.0;
    SigmoidCoefficients sigmoid_alpha;
    SigmoidCoefficients sigmoid_omega;
    double c1_days = 0.0;
    double c2_days = 0.0;
    // Abscissa at which the x-independent (Approximation 4) alpha is frozen.
    double alpha_midpoint = 0.5;
};

inline RescaledParameters rescale(const RawParameters& raw) {
    if (!(raw.a_min > 0.0) || !(raw.a_min < 1.0)) throw InvalidParameter("a_min must lie in (0, 1)");
    if (!(raw.d > 1.0)) throw InvalidParameter("d must be > 1 (log d must be positive)");
    if (!(raw.r > 1.0)) throw InvalidParameter("r must be > 1 (log r must be positive)");
    raw.validate();
    RescaledParameters p;
    p.gamma = -std::log(raw.a_min);
    p.a_min = raw.a_min;
    p.rho_r = 24.0 * std::log(raw.r) / p.gamma;
    p.rho_d = 24.0 * std::log(raw.d) / p.gamma;
    p.b = raw.b_per_day;
    p.kappa = raw.kappa;
    // Populations are measured in units of N~, so the rescaled scale is 1.
    p.sigmoid_alpha = sigmoid_coefficients(raw.f_alpha, 1.0);
    p.sigmoid_omega = sigmoid_coefficients(raw.f_omega, 1.0);
    p.c1_days = raw.c1_hours / 24.0;
    p.c2_days = raw.c2_hours / 24.0;
    return p;
}

// Transition characteristics in per-day units; populations in units of N~.
inline double f_alpha(const RescaledParameters& p, double a_bar) {
    if (!(a_bar >= 0.0)) throw InvalidParameter("f_alpha: population must be >= 0");
    return p.sigmoid_alpha.per_day(a_bar);
}

inline double f_omega(const RescaledParameters& p, double omega_bar) {
    if (!(omega_bar >= 0.0)) throw InvalidParameter("f_omega: population must be >= 0");
    return p.sigmoid_omega.per_day(omega_bar);
}

namespace detail {
inline void check_maturity(double x) {
    constexpr double slack = 1e-12;
    if (!(x >= -slack && x <= 1.0 + slack)) throw InvalidParameter("maturity x must lie in [0, 1]");
}
}  // namespace detail

// alpha(x, A) = e^{-gamma x} f_alpha(A)
inline double alpha(const RescaledParameters& p, double x, double a_bar) {
    detail::check_maturity(x);
    return std::exp(-p.gamma * x) * f_alpha(p, a_bar);
}

// omega(x, Omega) = a_min e^{gamma x} f_omega(Omega)
inline double omega(const RescaledParameters& p, double x, double omega_bar) {
    detail::check_maturity(x);
    return p.a_min * std::exp(p.gamma * x) * f_omega(p, omega_bar);
}

// Effective transfer rates of the reduced systems (Approximations 3 and 4):
// kappa is kept explicit, omega is taken at x = 0.
inline double alpha_approx3(const RescaledParameters& p, double x, double a_star) {
    return p.kappa * alpha(p, x, a_star);
}
inline double alpha_approx4(const RescaledParameters& p, double a_star) {
    return p.kappa * alpha(p, p.alpha_midpoint, a_star);
}
inline double alpha_approx4_derivative(const RescaledParameters& p, double a_star) {
    return p.kappa * std::exp(-p.gamma * p.alpha_midpoint) * p.sigmoid_alpha.per_day_derivative(a_star);
}
inline double omega_reduced(const RescaledParameters& p, double omega_bar) { return omega(p, 0.0, omega_bar); }
inline double omega_reduced_derivative(const RescaledParameters& p, double omega_bar) {
    return p.a_min * p.sigmoid_omega.per_day_derivative(omega_bar);
}

// ---------------------------------------------------------------------------
// Presets

inline RawParameters preset_ph_minus() { return RawParameters{}; }

inline RawParameters preset_ph_plus() {
    RawParameters raw;
    raw.f_alpha = {1.0, 0.9, 0.058, 0.0};
    raw.f_omega = {1.0, 0.99, 0.98, 0.96};
    raw.r_inh = 0.050;
    raw.r_deg = 0.033;
    return raw;
}

inline RawParameters preset_imatinib_affected() {
    RawParameters raw = preset_ph_plus();
    raw.f_omega = {0.0500, 0.0499, 0.0498, 0.0496};
    return raw;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"ph-minus", "ph-plus", "imatinib-affected"};
    return names;
}

inline std::optional<RawParameters> preset(std::string_view name) {
    if (name == "ph-minus") return preset_ph_minus();
    if (name == "ph-plus") return preset_ph_plus();
    if (name == "imatinib-affected") return preset_imatinib_affected();
    return std::nullopt;
}

}  // namespace stemflow
