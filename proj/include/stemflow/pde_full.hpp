#pragma once

// Approximation 0: the full structured system with the cell-cycle coordinate.
//
//   A_t  - rho_r A_x = -omega(x) A + alpha(x) (int_{c1}^{c2} Omega dc + 1_G1(x) Omega*)
//   A*'             = rho_r A(0) - omega(0) A*
//   Omega_t + rho_d Omega_x + Omega_c = -alpha(x) 1_[c1,c2)(c) Omega
//   Omega*_t + rho_d Omega*_x         = -alpha(x) 1_G1(x) Omega*
//
// with A(1) = 0, Omega(x,0) = Omega(x,c2) + omega(x) A(x), rho_d Omega*(0) =
// omega(0) A*, and doubling across c = c1 and x = rho_d (k c2 + c1).
// Discretised by first-order upwind transport (dimensional splitting for the
// (x, c) field) and explicit Euler exchange terms, with the totals frozen at
// the start of every step.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "stemflow/grid.hpp"
#include "stemflow/params.hpp"
#include "stemflow/trace.hpp"

namespace stemflow {

struct FullState {
    std::vector<double> a;           // nx, cells per unit x
    double a_star = 0.0;
    std::vector<double> omega;       // nx * nc, row-major in x (index i * nc + j)
    std::vector<double> omega_star;  // nx
    double t = 0.0;                  // days

    static FullState zeros(const GridSpec& g) {
        FullState s;
        s.a.assign(g.nx, 0.0);
        s.omega.assign(g.nx * g.nc, 0.0);
        s.omega_star.assign(g.nx, 0.0);
        return s;
    }
};

struct Totals {
    double a_bar = 0.0;
    double omega_bar = 0.0;
};

inline Totals totals(const FullState& s, const GridSpec& g) {
    Totals out;
    out.a_bar = s.a_star;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double w = g.width(i);
        out.a_bar += s.a[i] * w;
        double col = 0.0;
        for (std::size_t j = 0; j < g.nc; ++j) col += s.omega[i * g.nc + j];
        out.omega_bar += (col * g.dc + s.omega_star[i]) * w;
    }
    return out;
}

// Switches for tests that isolate transport from the exchange terms.
struct FullModelSwitches {
    bool transfers = true;
    bool division = true;
};

class FullSolver {
public:
    FullSolver(RescaledParameters params, GridSpec grid, FullModelSwitches sw = {})
        : p_(params), g_(grid), sw_(sw) {
        validate_grid(g_, p_, true);
        widths_ = g_.widths();
        x_faces_ = division_faces(g_, p_);
        if (!sw_.division) std::fill(x_faces_.begin(), x_faces_.end(), 0);
        g1_ = g1_indicator(g_, p_);
        c1_index_ = static_cast<std::size_t>(std::llround(p_.c1_days / g_.dc));
        c_faces_.assign(g_.nc, 0);
        if (sw_.division) c_faces_[c1_index_] = 1;
        exp_neg_gx_.resize(g_.nx);
        exp_pos_gx_.resize(g_.nx);
        for (std::size_t i = 0; i < g_.nx; ++i) {
            exp_neg_gx_[i] = std::exp(-p_.gamma * g_.x_center(i));
            exp_pos_gx_[i] = std::exp(p_.gamma * g_.x_center(i));
        }
        c_widths_.assign(g_.nc, g_.dc);
    }

    [[nodiscard]] const GridSpec& grid() const { return g_; }
    [[nodiscard]] const RescaledParameters& params() const { return p_; }
    [[nodiscard]] std::span<const std::uint8_t> g1() const { return g1_; }

    // Initial condition A*(0) = a_star, all other fields zero.
    [[nodiscard]] FullState initial(double a_star) const {
        FullState s = FullState::zeros(g_);
        s.a_star = a_star;
        return s;
    }

    void step(FullState& s) const {
        const std::size_t nx = g_.nx;
        const std::size_t nc = g_.nc;
        const double dt = g_.dt;
        const Totals tot = totals(s, g_);
        const double fa = sw_.transfers ? f_alpha(p_, tot.a_bar) : 0.0;
        const double fw = sw_.transfers ? f_omega(p_, tot.omega_bar) : 0.0;
        const double omega0 = p_.a_min * fw;

        // Exchange terms, evaluated from the step-start fields.
        const double a_star0 = s.a_star;
        const double a_star_out = dt * omega0 * a_star0;
        std::vector<double> a_to_omega(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            const double al = exp_neg_gx_[i] * fa;
            const double om = p_.a_min * exp_pos_gx_[i] * fw;
            a_to_omega[i] = om * s.a[i];  // rate per unit x, enters at c = 0
            double back = 0.0;
            double* row = &s.omega[i * nc];
            for (std::size_t j = c1_index_; j < nc; ++j) {
                const double moved = dt * al * row[j];
                row[j] -= moved;
                back += moved;
            }
            back *= g_.dc;
            if (g1_[i]) {
                const double moved = dt * al * s.omega_star[i];
                s.omega_star[i] -= moved;
                back += moved;
            }
            s.a[i] += back - dt * a_to_omega[i];
        }
        s.a_star -= a_star_out;

        // Alpha transport toward x = 0, feeding A*.
        const double sub_dt = dt / g_.a_substeps;
        for (int k = 0; k < g_.a_substeps; ++k) {
            s.a_star += advect_left(s.a, widths_, p_.rho_r * sub_dt, 0.0);
        }

        // Omega: x sweep (no inflow at x = 0), then cycle sweep.
        const double cx = p_.rho_d * dt;
        for (std::size_t i = nx; i-- > 0;) {
            const double courant = cx / widths_[i];
            double* row = &s.omega[i * nc];
            const double* up = i > 0 ? &s.omega[(i - 1) * nc] : nullptr;
            for (std::size_t j = 0; j < nc; ++j) {
                const double upstream = up ? up[j] : 0.0;
                row[j] += courant * (upstream - row[j]);
            }
        }
        for (std::size_t i = 0; i < nx; ++i) {
            std::span<double> row(&s.omega[i * nc], nc);
            const double inflow = row[nc - 1] + a_to_omega[i];
            advect_right(row, c_widths_, dt, inflow, c_faces_);
        }

        // Omega*: x sweep with inflow omega(0) A* / rho_d and doubling faces.
        advect_right(s.omega_star, widths_, cx, omega0 * a_star0 / p_.rho_d, x_faces_);

        s.t += dt;
        check_nonnegative(s.a, "A");
        check_nonnegative(s.omega, "Omega");
        check_nonnegative(s.omega_star, "Omega*");
        if (s.a_star < -1e-12) throw NumericalFailure("negative A*");
    }

    // Advances to `days`, recording the totals every `record_every_days`.
    TotalsTrace run(FullState& s, double days, double record_every_days) const {
        TotalsTrace trace;
        const auto record = [&] {
            const Totals t = totals(s, g_);
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
    RescaledParameters p_;
    GridSpec g_;
    FullModelSwitches sw_;
    std::vector<double> widths_;
    std::vector<std::uint8_t> x_faces_;
    std::vector<std::uint8_t> c_faces_;
    std::vector<std::uint8_t> g1_;
    std::size_t c1_index_ = 0;
    std::vector<double> exp_neg_gx_;
    std::vector<double> exp_pos_gx_;
    std::vector<double> c_widths_;
};

}  // namespace stemflow
