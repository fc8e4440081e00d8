#pragma once

// Delay form of the Approx4 system (tau = 1 / rho_d):
//
//   dOmega_bar/dt = w(t) A*(t) - w(t - tau) e^{b tau - C(t)} A*(t - tau) + (b - a(t)) Omega_bar(t)
//   dA*/dt        = -w(t) A*(t) + a(t) Omega_bar(t)
//   dC/dt         = a(t) - a(t - tau),      C(t) = int_{t - tau}^t a(u) du
//
// with a(t) = alpha(A*(t)) and w(t) = omega(Omega_bar(t)). The outflow at
// x = 1 carries the cells that entered at t - tau, so its omega is the one of
// that time.
//
// Classical RK4 with h = tau / N: the delayed argument of the full-step stages
// is a stored node, the half-step stages use cubic Lagrange interpolation.

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "stemflow/error.hpp"
#include "stemflow/numerics.hpp"
#include "stemflow/params.hpp"

namespace stemflow {

struct DelayOptions {
    int steps_per_delay = 256;           // N, even, >= 64
    std::optional<double> frozen_alpha;  // per day, ignores A*
    std::optional<double> frozen_omega;  // per day, ignores Omega_bar
    int record_every = 1;                // steps between recorded samples
};

// Uniform samples of A* and Omega_bar on [t0 - tau, t0] (N + 1 nodes) and the
// matching initial C.
struct DelayHistory {
    double t0 = 0.0;
    double tau = 0.0;
    std::vector<double> a_star;
    std::vector<double> omega_bar;
    double c0 = 0.0;

    [[nodiscard]] int steps() const { return static_cast<int>(a_star.size()) - 1; }
};

inline double delay_alpha(const RescaledParameters& p, const DelayOptions& o, double a_star) {
    return o.frozen_alpha ? *o.frozen_alpha : alpha_approx4(p, std::max(a_star, 0.0));
}

inline double delay_omega(const RescaledParameters& p, const DelayOptions& o, double omega_bar) {
    return o.frozen_omega ? *o.frozen_omega : omega_reduced(p, std::max(omega_bar, 0.0));
}

namespace detail {

inline void check_delay_steps(int n) {
    if (n < 64 || n % 2 != 0) {
        throw InvalidParameter("delay resolution needs an even number of steps per delay, at least 64");
    }
}

// Composite Simpson over uniform nodes (even count of intervals).
inline double simpson(const std::vector<double>& f, double h) {
    const std::size_t n = f.size() - 1;
    double s = f.front() + f.back();
    for (std::size_t k = 1; k < n; ++k) s += (k % 2 == 1 ? 4.0 : 2.0) * f[k];
    return s * h / 3.0;
}

}  // namespace detail

// History sampled from functions of time; C0 by adaptive quadrature.
inline DelayHistory history_from_functions(const RescaledParameters& p, const DelayOptions& o, double t0,
                                           const std::function<double(double)>& a_star,
                                           const std::function<double(double)>& omega_bar) {
    detail::check_delay_steps(o.steps_per_delay);
    DelayHistory h;
    h.t0 = t0;
    h.tau = 1.0 / p.rho_d;
    const int n = o.steps_per_delay;
    const double dt = h.tau / n;
    for (int k = 0; k <= n; ++k) {
        const double t = t0 - h.tau + k * dt;
        h.a_star.push_back(a_star(t));
        h.omega_bar.push_back(omega_bar(t));
    }
    h.c0 = integrate([&](double u) { return delay_alpha(p, o, a_star(u)); }, t0 - h.tau, t0, 1e-11);
    return h;
}

inline DelayHistory constant_history(const RescaledParameters& p, const DelayOptions& o, double a_star,
                                     double omega_bar, double t0 = 0.0) {
    return history_from_functions(p, o, t0, [a_star](double) { return a_star; },
                                  [omega_bar](double) { return omega_bar; });
}

// History from N + 1 uniform samples (for instance a PDE run with dt = tau / N);
// C0 by composite Simpson.
inline DelayHistory history_from_samples(const RescaledParameters& p, const DelayOptions& o, double t0,
                                         std::vector<double> a_star, std::vector<double> omega_bar) {
    detail::check_delay_steps(o.steps_per_delay);
    if (a_star.size() != static_cast<std::size_t>(o.steps_per_delay) + 1 || omega_bar.size() != a_star.size()) {
        throw InvalidParameter("history needs steps_per_delay + 1 samples of A* and Omega_bar");
    }
    DelayHistory h;
    h.t0 = t0;
    h.tau = 1.0 / p.rho_d;
    h.a_star = std::move(a_star);
    h.omega_bar = std::move(omega_bar);
    std::vector<double> al(h.a_star.size());
    for (std::size_t k = 0; k < al.size(); ++k) al[k] = delay_alpha(p, o, h.a_star[k]);
    h.c0 = detail::simpson(al, h.tau / o.steps_per_delay);
    return h;
}

struct DelaySample {
    double t = 0.0;
    double omega_bar = 0.0;
    double a_star = 0.0;
    double c = 0.0;
    double alpha = 0.0;      // alpha(A*(t))
    bool transient = false;  // within one delay of the start
};

using DelayTrace = std::vector<DelaySample>;

inline DelayTrace integrate_dde(const RescaledParameters& p, const DelayHistory& hist, double horizon_days,
                                const DelayOptions& o = {}) {
    const int n_delay = hist.steps();
    detail::check_delay_steps(n_delay);
    if (n_delay != o.steps_per_delay) throw InvalidParameter("history resolution differs from steps_per_delay");
    const double tau = 1.0 / p.rho_d;
    if (!(horizon_days > tau)) throw InvalidParameter("DDE horizon must exceed the delay 1 / rho_d");
    if (o.record_every < 1) throw InvalidParameter("record_every must be >= 1");
    const double h = tau / n_delay;
    const double b = p.b;

    // Node k sits at t0 - tau + k h; nodes 0..N are history. cum holds
    // int_{t0 - tau}^{t_k} alpha along the stored trajectory.
    std::vector<double> an = hist.a_star;
    std::vector<double> wn = hist.omega_bar;
    std::vector<double> cum(an.size(), 0.0);
    {
        std::vector<double> al(an.size());
        for (std::size_t k = 0; k < al.size(); ++k) al[k] = delay_alpha(p, o, an[k]);
        const std::size_t last = al.size() - 1;
        for (std::size_t k = 0; k < last; ++k) {
            double q = 0.0;  // cubic-interpolant integral over [k, k + 1]
            if (k == 0) {
                q = 9.0 * al[0] + 19.0 * al[1] - 5.0 * al[2] + al[3];
            } else if (k + 1 == last) {
                q = al[k - 2] - 5.0 * al[k - 1] + 19.0 * al[k] + 9.0 * al[k + 1];
            } else {
                q = -al[k - 1] + 13.0 * al[k] + 13.0 * al[k + 1] - al[k + 2];
            }
            cum[k + 1] = cum[k] + q * h / 24.0;
        }
    }
    const long steps = std::lround(horizon_days / h);
    an.reserve(an.size() + steps);
    wn.reserve(wn.size() + steps);
    cum.reserve(cum.size() + steps);

    // Omega_bar(t_n) = int_{t_n - tau}^{t_n} w(u) A*(u) e^{b (t_n - u) - int_u^{t_n} alpha} du
    // by composite Simpson over the stored nodes, with the endpoint omega taken
    // at `w_end`.
    const auto window = [&](long n, double w_end) {
        const long k0 = n - n_delay;
        const double anchor = b * (n * h) - cum[n];
        double s = 0.0;
        for (long j = k0; j <= n; ++j) {
            const double wj = j == n ? w_end : wn[j];
            const double g = delay_omega(p, o, wj) * an[j] * std::exp(anchor - (b * (j * h) - cum[j]));
            const double weight = (j == k0 || j == n) ? 1.0 : ((j - k0) % 2 == 1 ? 4.0 : 2.0);
            s += weight * g;
        }
        return s * h / 3.0;
    };
    // The endpoint enters with weight h / 3; a few fixed-point sweeps settle it.
    const auto project = [&](long n, double guess) {
        double w = guess;
        for (int it = 0; it < 4; ++it) w = window(n, w);
        return w;
    };

    const auto mid = [](const std::vector<double>& f, long k) {
        // value halfway between nodes k and k + 1
        if (k >= 1) return (-f[k - 1] + 9.0 * f[k] + 9.0 * f[k + 1] - f[k + 2]) / 16.0;
        return 0.3125 * f[0] + 0.9375 * f[1] - 0.3125 * f[2] + 0.0625 * f[3];
    };

    struct Y {
        double w, a, c, i;
    };
    const auto rhs = [&](const Y& y, double a_del, double w_del) {
        const double al = delay_alpha(p, o, y.a);
        const double om = delay_omega(p, o, y.w);
        const double al_del = delay_alpha(p, o, a_del);
        const double om_del = delay_omega(p, o, w_del);
        return Y{om * y.a - om_del * std::exp(b * tau - y.c) * a_del + (b - al) * y.w, -om * y.a + al * y.w,
                 al - al_del, al};
    };
    const auto axpy = [](const Y& y, double s, const Y& k) {
        return Y{y.w + s * k.w, y.a + s * k.a, y.c + s * k.c, y.i + s * k.i};
    };

    DelayTrace trace;
    wn.back() = project(n_delay, wn.back());
    Y y{wn.back(), an.back(), hist.c0, cum.back()};
    const auto record = [&](double t) {
        trace.push_back({t, y.w, y.a, y.c, delay_alpha(p, o, y.a), t < hist.t0 + tau - 0.5 * h});
    };
    record(hist.t0);
    for (long s = 0; s < steps; ++s) {
        const long n = static_cast<long>(an.size()) - 1;  // current node
        const long k = n - n_delay;                       // node of t - tau
        const double am = mid(an, k), wm = mid(wn, k);
        const Y k1 = rhs(y, an[k], wn[k]);
        const Y k2 = rhs(axpy(y, 0.5 * h, k1), am, wm);
        const Y k3 = rhs(axpy(y, 0.5 * h, k2), am, wm);
        const Y k4 = rhs(axpy(y, h, k3), an[k + 1], wn[k + 1]);
        y.w += h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
        y.a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
        y.c += h / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c);
        y.i += h / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i);
        an.push_back(y.a);
        cum.push_back(y.i);
        wn.push_back(y.w);
        // Differentiating the window integral adds a mode growing like
        // e^{int (b - alpha)}; resetting Omega_bar to the integral removes it.
        y.w = project(n + 1, y.w);
        wn.back() = y.w;
        if (!std::isfinite(y.w) || !std::isfinite(y.a) || !std::isfinite(y.c)) {
            throw NumericalFailure("DDE state became non-finite");
        }
        if ((s + 1) % o.record_every == 0 || s + 1 == steps) record(hist.t0 + (s + 1) * h);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Growth-rate and frequency fit of a (small) deviation signal.

struct GrowthFit {
    double rate = 0.0;       // per day
    double frequency = 0.0;  // angular, per day
    bool oscillatory = false;
    double offset = 0.0;     // fitted constant
    double rms = 0.0;        // residual root mean square
};

namespace detail {

// Least-squares residual of y - (c + e^{s u}(p cos(w u) + q sin(w u))), u = t - t_ref,
// with the linear coefficients projected out.
struct ProjectedFit {
    const std::vector<double>* t;
    const std::vector<double>* y;
    double t_ref;
    bool oscillatory;

    [[nodiscard]] Eigen::MatrixXd basis(double s, double w) const {
        const Eigen::Index n = static_cast<Eigen::Index>(t->size());
        Eigen::MatrixXd m(n, oscillatory ? 3 : 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = (*t)[i] - t_ref;
            const double e = std::exp(s * u);
            m(i, 0) = 1.0;
            if (oscillatory) {
                m(i, 1) = e * std::cos(w * u);
                m(i, 2) = e * std::sin(w * u);
            } else {
                m(i, 1) = e;
            }
        }
        return m;
    }

    [[nodiscard]] Eigen::VectorXd coefficients(double s, double w) const {
        const Eigen::Map<const Eigen::VectorXd> yv(y->data(), static_cast<Eigen::Index>(y->size()));
        return basis(s, w).colPivHouseholderQr().solve(yv);
    }

    [[nodiscard]] Eigen::VectorXd residual(double s, double w) const {
        const Eigen::Map<const Eigen::VectorXd> yv(y->data(), static_cast<Eigen::Index>(y->size()));
        const Eigen::MatrixXd m = basis(s, w);
        return yv - m * m.colPivHouseholderQr().solve(yv);
    }
};

struct ProjectedFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const ProjectedFit* fit;
    int n_values;

    [[nodiscard]] int inputs() const { return fit->oscillatory ? 2 : 1; }
    [[nodiscard]] int values() const { return n_values; }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
        fvec = fit->residual(x(0), fit->oscillatory ? x(1) : 0.0);
        return 0;
    }
};

// Least-squares line through (x, y); returns the slope.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Fits c + e^{rate t}(p cos(freq t) + q sin(freq t)) to samples in [t_begin, t_end].
// Starting values come from the spacing of local extrema (frequency) and the
// peak-to-trough envelope (rate); a signal with fewer than four extrema is
// fitted as c + p e^{rate t} and returned with frequency 0 and oscillatory = false.
inline GrowthFit linearized_growth_fit(const std::vector<double>& t_all, const std::vector<double>& y_all,
                                       double t_begin, double t_end) {
    if (t_all.size() != y_all.size()) throw InvalidParameter("time and value series differ in length");
    std::vector<double> t, y;
    for (std::size_t i = 0; i < t_all.size(); ++i) {
        if (t_all[i] >= t_begin && t_all[i] <= t_end) {
            t.push_back(t_all[i]);
            y.push_back(y_all[i]);
        }
    }
    if (t.size() < 8) throw InvalidParameter("fit window holds fewer than 8 samples");

    // Local extrema with parabolic refinement.
    std::vector<double> te, ye;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        const bool peak = y[i] > y[i - 1] && y[i] >= y[i + 1];
        const bool trough = y[i] < y[i - 1] && y[i] <= y[i + 1];
        if (!peak && !trough) continue;
        const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
        const double shift = denom != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / denom : 0.0;
        const double dt = 0.5 * (t[i + 1] - t[i - 1]);
        te.push_back(t[i] + shift * dt);
        ye.push_back(y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift);
    }

    detail::ProjectedFit pf{&t, &y, t.front(), te.size() >= 4};
    Eigen::VectorXd x(pf.oscillatory ? 2 : 1);
    if (pf.oscillatory) {
        std::vector<double> idx(te.size());
        for (std::size_t k = 0; k < te.size(); ++k) idx[k] = static_cast<double>(k);
        const double half_period = detail::slope(idx, te);
        std::vector<double> tm, la;
        for (std::size_t k = 0; k + 1 < te.size(); ++k) {
            const double swing = std::abs(ye[k + 1] - ye[k]);
            if (swing > 0.0) {
                tm.push_back(0.5 * (te[k] + te[k + 1]));
                la.push_back(std::log(swing));
            }
        }
        x(0) = tm.size() >= 2 ? detail::slope(tm, la) : 0.0;
        x(1) = std::numbers::pi / half_period;
    } else {
        std::vector<double> tm, la;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            const double dy = (y[i + 1] - y[i]) / (t[i + 1] - t[i]);
            if (dy != 0.0) {
                tm.push_back(0.5 * (t[i] + t[i + 1]));
                la.push_back(std::log(std::abs(dy)));
            }
        }
        x(0) = tm.size() >= 2 ? detail::slope(tm, la) : 0.0;
    }

    detail::ProjectedFunctor functor{&pf, static_cast<int>(t.size())};
    Eigen::NumericalDiff<detail::ProjectedFunctor> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<detail::ProjectedFunctor>> lm(numdiff);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 2000;
    lm.minimize(x);

    GrowthFit out;
    out.oscillatory = pf.oscillatory;
    out.rate = x(0);
    out.frequency = pf.oscillatory ? std::abs(x(1)) : 0.0;
    const Eigen::VectorXd coef = pf.coefficients(x(0), pf.oscillatory ? x(1) : 0.0);
    out.offset = coef(0);
    out.rms = std::sqrt(pf.residual(x(0), pf.oscillatory ? x(1) : 0.0).squaredNorm() / static_cast<double>(t.size()));
    if (!std::isfinite(out.rate) || !std::isfinite(out.frequency)) throw NumericalFailure("growth fit diverged");
    return out;
}

}  // namespace stemflow
