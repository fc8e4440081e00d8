#pragma once

// Reduced transport systems (Approximations 1 to 4), discretised with the same
// upwind machinery as the full model.
//
//   Approx1: cycle-averaged Omega(x) with net rate b - kappa alpha(x, A_bar),
//            source omega(x) A, and the Alpha field A(x) kept.
//   Approx2: A and Omega dropped; Omega*(x) with the G1 sink and division
//            doubling at x = rho_d (k c2 + c1); alpha evaluated at A*.
//   Approx3: Approx1 + Approx2: Omega*(x) with net rate b - kappa alpha(x, A*).
//   Approx4: Approx3 with alpha frozen at the midpoint abscissa.
//
// Linear growth/decay along characteristics is integrated exactly over a step
// (exponential factor); exchange with A* is explicit Euler.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stemflow/grid.hpp"
#include "stemflow/numerics.hpp"
#include "stemflow/params.hpp"
#include "stemflow/pde_full.hpp"
#include "stemflow/trace.hpp"

namespace stemflow {

enum class Variant { Approx1 = 1, Approx2 = 2, Approx3 = 3, Approx4 = 4 };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Approx1: return "approx1";
        case Variant::Approx2: return "approx2";
        case Variant::Approx3: return "approx3";
        case Variant::Approx4: return "approx4";
    }
    return "?";
}

struct ReducedState {
    Variant variant = Variant::Approx4;
    std::vector<double> a;      // Approx1 only
    double a_star = 0.0;
    std::vector<double> omega;  // Omega (Approx1) or Omega* (Approx2-4)
    double t = 0.0;
};

// Overrides used by tests and by the linear-growth experiments.
struct ReducedSwitches {
    bool alpha = true;
    bool omega = true;
    bool division = true;                 // Approx2 only
    std::optional<double> frozen_alpha;   // x-independent alpha (per day), ignores populations
    std::optional<double> frozen_omega;   // omega(0) (per day), ignores populations
};

// The default grid of each variant: division-aligned for Approx2, uniform
// nx = 256 for the others.
inline GridSpec default_reduced_grid(Variant v, const RescaledParameters& p) {
    return v == Variant::Approx2 ? default_cycle_grid(p) : default_uniform_grid(p);
}

class ReducedSolver {
public:
    ReducedSolver(Variant variant, RescaledParameters params, GridSpec grid, ReducedSwitches sw = {})
        : v_(variant), p_(params), g_(grid), sw_(std::move(sw)) {
        const bool aligned = v_ == Variant::Approx2 && sw_.division;
        validate_grid(g_, p_, aligned);
        widths_ = g_.widths();
        shape_.resize(g_.nx);
        for (std::size_t i = 0; i < g_.nx; ++i) {
            const double x = v_ == Variant::Approx4 ? p_.alpha_midpoint : g_.x_center(i);
            shape_[i] = std::exp(-p_.gamma * x);
            if (v_ != Variant::Approx2) shape_[i] *= p_.kappa;
        }
        exp_pos_gx_.resize(g_.nx);
        for (std::size_t i = 0; i < g_.nx; ++i) exp_pos_gx_[i] = std::exp(p_.gamma * g_.x_center(i));
        if (v_ == Variant::Approx2) {
            g1_ = g1_indicator(g_, p_);
            faces_ = division_faces(g_, p_);
            if (!sw_.division) {
                std::fill(faces_.begin(), faces_.end(), 0);
                std::fill(g1_.begin(), g1_.end(), 1);
            }
        }
    }

    [[nodiscard]] Variant variant() const { return v_; }
    [[nodiscard]] const GridSpec& grid() const { return g_; }
    [[nodiscard]] const RescaledParameters& params() const { return p_; }
    [[nodiscard]] std::span<const double> widths() const { return widths_; }

    [[nodiscard]] ReducedState initial(double a_star) const {
        ReducedState s;
        s.variant = v_;
        if (v_ == Variant::Approx1) s.a.assign(g_.nx, 0.0);
        s.a_star = a_star;
        s.omega.assign(g_.nx, 0.0);
        return s;
    }

    // Totals: A_bar = int A + A* (Approx1) or A* (others); Omega_bar = int Omega.
    [[nodiscard]] Totals totals(const ReducedState& s) const {
        Totals t;
        t.a_bar = s.a_star + (s.a.empty() ? 0.0 : integrate_cells(s.a, widths_));
        t.omega_bar = integrate_cells(s.omega, widths_);
        return t;
    }

    // Transfer rates for the current populations.
    [[nodiscard]] double alpha_factor(const Totals& t) const {
        if (sw_.frozen_alpha) return *sw_.frozen_alpha;
        if (!sw_.alpha) return 0.0;
        return f_alpha(p_, t.a_bar);
    }
    [[nodiscard]] double omega0(const Totals& t) const {
        if (sw_.frozen_omega) return *sw_.frozen_omega;
        if (!sw_.omega) return 0.0;
        return omega_reduced(p_, t.omega_bar);
    }
    // alpha at cell i given alpha_factor (the frozen value is x-independent).
    [[nodiscard]] double alpha_at(std::size_t i, double factor) const {
        return sw_.frozen_alpha ? factor : shape_[i] * factor;
    }

    // Boundary value fed into the first cell. Cells entering during one step
    // have grown for a uniformly distributed fraction of it, so the entering
    // density carries the mean growth factor; with Courant number 1 this makes
    // the cell averages of a frozen-rate profile exact.
    [[nodiscard]] double inflow(double flux, double alpha0) const {
        return flux / p_.rho_d * expm1_over((p_.b - alpha0) * g_.dt);
    }

    void step(ReducedState& s) const {
        const double dt = g_.dt;
        const Totals tot = totals(s);
        const double fa = alpha_factor(tot);
        const double om0 = omega0(tot);
        const double a_star0 = s.a_star;
        const std::size_t nx = g_.nx;

        switch (v_) {
            case Variant::Approx1: {
                const double fw = sw_.omega && !sw_.frozen_omega ? f_omega(p_, tot.omega_bar) : 0.0;
                for (std::size_t i = 0; i < nx; ++i) {
                    const double al = alpha_at(i, fa);
                    const double om = sw_.frozen_omega ? 0.0 : p_.a_min * exp_pos_gx_[i] * fw;
                    const double a_to_omega = dt * om * s.a[i];
                    const double omega_to_a = dt * al * s.omega[i];
                    s.omega[i] = s.omega[i] * std::exp((p_.b - al) * dt) + a_to_omega;
                    s.a[i] += omega_to_a - a_to_omega;
                }
                s.a_star -= dt * om0 * a_star0;
                const double sub_dt = dt / g_.a_substeps;
                for (int k = 0; k < g_.a_substeps; ++k) {
                    s.a_star += advect_left(s.a, widths_, p_.rho_r * sub_dt, 0.0);
                }
                advect_right(s.omega, widths_, p_.rho_d * dt, inflow(om0 * a_star0, alpha_at(0, fa)));
                break;
            }
            case Variant::Approx2: {
                // Same update as Approx3/4 with b = 0 and the sink restricted to G1.
                double back = 0.0;
                for (std::size_t i = 0; i < nx; ++i) {
                    if (!g1_[i]) continue;
                    const double al = alpha_at(i, fa);
                    back += dt * al * s.omega[i] * widths_[i];
                    s.omega[i] *= std::exp(-al * dt);
                }
                s.a_star += back - dt * om0 * a_star0;
                const double sink0 = g1_[0] ? alpha_at(0, fa) : 0.0;
                advect_right(s.omega, widths_, p_.rho_d * dt,
                             om0 * a_star0 / p_.rho_d * expm1_over(-sink0 * dt), faces_);
                break;
            }
            case Variant::Approx3:
            case Variant::Approx4: {
                double back = 0.0;
                for (std::size_t i = 0; i < nx; ++i) {
                    const double al = alpha_at(i, fa);
                    back += dt * al * s.omega[i] * widths_[i];
                    s.omega[i] *= std::exp((p_.b - al) * dt);
                }
                s.a_star += back - dt * om0 * a_star0;
                advect_right(s.omega, widths_, p_.rho_d * dt, inflow(om0 * a_star0, alpha_at(0, fa)));
                break;
            }
        }
        s.t += dt;
        check_nonnegative(s.omega, "Omega");
        if (!s.a.empty()) check_nonnegative(s.a, "A");
        if (s.a_star < -1e-12) throw NumericalFailure("negative A*");
    }

    TotalsTrace run(ReducedState& s, double days, double record_every_days) const {
        TotalsTrace trace;
        const auto record = [&] {
            const Totals t = totals(s);
            trace.push_back({s.t, t.a_bar, t.omega_bar});
        };
        record();
        const long steps = std::lround(days / g_.dt);
        const long every = std::max(1L, std::lround(record_every_days / g_.dt));
        for (long n = 1; n <= steps; ++n) {
            step(s);
            if (n % every == 0) record();
        }
        if (steps % every != 0) record();
        return trace;
    }

private:
    Variant v_;
    RescaledParameters p_;
    GridSpec g_;
    ReducedSwitches sw_;
    std::vector<double> widths_;
    std::vector<double> shape_;  // alpha(x, A) / f_alpha(A) per cell (kappa included where used)
    std::vector<double> exp_pos_gx_;
    std::vector<std::uint8_t> g1_;
    std::vector<std::uint8_t> faces_;
};

}  // namespace stemflow
