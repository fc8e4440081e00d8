#pragma once

// Finite-volume grids for the transport systems and the first-order upwind
// transport kernel shared by every PDE variant.
//
// The maturity axis [0, 1] is split into nx cells of width dx, except the
// last cell which absorbs the remainder and has width in [dx, 2 dx). The
// cycle axis [0, c2] is split into nc cells of width dc.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stemflow/error.hpp"
#include "stemflow/params.hpp"

namespace stemflow {

struct GridSpec {
    std::size_t nx = 0;
    double dx = 0.0;
    double last_width = 0.0;
    std::size_t nc = 0;  // zero when the cycle axis is not resolved
    double dc = 0.0;
    double dt = 0.0;     // days
    int a_substeps = 1;  // Alpha transport runs at speed rho_r with dt / a_substeps
    double cfl_r = 0.0;  // rho_r (dt / a_substeps) / dx
    double cfl_d = 0.0;  // max(rho_d dt / dx, dt / dc)
    // Grid produced by cycle_aligned() with this many steps per hour, else 0.
    int hour_subdivisions = 0;

    [[nodiscard]] double width(std::size_t i) const { return i + 1 == nx ? last_width : dx; }
    [[nodiscard]] double x_left(std::size_t i) const { return static_cast<double>(i) * dx; }
    [[nodiscard]] double x_center(std::size_t i) const { return x_left(i) + 0.5 * width(i); }
    [[nodiscard]] double c_center(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dc; }

    [[nodiscard]] std::vector<double> widths() const {
        std::vector<double> w(nx, dx);
        if (nx > 0) w.back() = last_width;
        return w;
    }
};

namespace detail {

inline void finish_grid(GridSpec& g, const RescaledParameters& p) {
    if (g.nx < 2) throw CflViolation("grid needs at least two maturity cells");
    g.last_width = 1.0 - static_cast<double>(g.nx - 1) * g.dx;
    const double courant_r = p.rho_r * g.dt / g.dx;
    g.a_substeps = std::max(1, static_cast<int>(std::ceil(courant_r - 1e-12)));
    g.cfl_r = courant_r / g.a_substeps;
    g.cfl_d = p.rho_d * g.dt / g.dx;
    if (g.nc > 0) g.cfl_d = std::max(g.cfl_d, g.dt / g.dc);
}

}  // namespace detail

// Grid whose time step is a fraction of one hour and whose cells follow the
// characteristics: dc = 1 h / M and dx = rho_d * dc. Every division abscissa
// c = c1 and x = rho_d (k c2 + c1) then falls on a cell face.
inline GridSpec cycle_aligned_grid(const RescaledParameters& p, int hour_subdivisions, double courant = 1.0) {
    if (hour_subdivisions < 1) throw CflViolation("hour_subdivisions must be >= 1");
    if (!(courant > 0.0 && courant <= 1.0)) throw CflViolation("courant number must lie in (0, 1]");
    GridSpec g;
    g.hour_subdivisions = hour_subdivisions;
    const double step = 1.0 / (24.0 * hour_subdivisions);
    g.dc = step;
    g.dx = p.rho_d * step;
    g.dt = courant * step;
    g.nx = static_cast<std::size_t>(std::floor(1.0 / g.dx + 1e-9));
    g.nc = static_cast<std::size_t>(std::llround(p.c2_days / g.dc));
    detail::finish_grid(g, p);
    return g;
}

// Smallest number of steps per hour giving at least target_nx maturity cells.
inline int default_hour_subdivisions(const RescaledParameters& p, std::size_t target_nx = 256) {
    const double m = static_cast<double>(target_nx) * p.rho_d / 24.0;
    return std::max(1, static_cast<int>(std::ceil(m - 1e-12)));
}

inline GridSpec default_cycle_grid(const RescaledParameters& p) {
    return cycle_aligned_grid(p, default_hour_subdivisions(p));
}

// Uniform maturity grid dx = 1/nx with dt = courant * dx / rho_d. Used by the
// systems without explicit division events.
inline GridSpec uniform_grid(const RescaledParameters& p, std::size_t nx, double courant = 1.0) {
    if (!(courant > 0.0 && courant <= 1.0)) throw CflViolation("courant number must lie in (0, 1]");
    GridSpec g;
    g.nx = nx;
    g.dx = 1.0 / static_cast<double>(nx);
    g.dt = courant * g.dx / p.rho_d;
    detail::finish_grid(g, p);
    return g;
}

inline GridSpec default_uniform_grid(const RescaledParameters& p) { return uniform_grid(p, 256); }

// Largest per-day transfer rate the explicit reaction step can meet.
inline double max_transfer_rate(const RescaledParameters& p) {
    return std::max(f_alpha(p, 0.0), f_omega(p, 0.0));
}

// Checks the CFL conditions. With require_alignment, also checks that c1 is a
// face of the cycle grid and that rho_d (k c2 + c1) are faces of the x grid.
inline void validate_grid(const GridSpec& g, const RescaledParameters& p, bool require_alignment) {
    if (g.nx < 2 || !(g.dx > 0.0) || !(g.dt > 0.0)) throw CflViolation("degenerate grid");
    if (!(g.last_width >= g.dx * (1.0 - 1e-9) && g.last_width < 2.0 * g.dx * (1.0 + 1e-9))) {
        throw CflViolation("grid does not cover [0, 1] consistently");
    }
    constexpr double tol = 1e-9;
    if (g.cfl_r > 1.0 + tol) throw CflViolation("CFL violated for the Alpha transport (cfl_r > 1)");
    if (g.cfl_d > 1.0 + tol) throw CflViolation("CFL violated for the Omega transport (cfl_d > 1)");
    if (std::abs(p.rho_r * g.dt / g.a_substeps / g.dx - g.cfl_r) > tol ||
        std::abs(std::max(p.rho_d * g.dt / g.dx, g.nc > 0 ? g.dt / g.dc : 0.0) - g.cfl_d) > tol) {
        throw CflViolation("grid was built for different advection speeds");
    }
    if (g.dt * max_transfer_rate(p) > 1.0) {
        throw CflViolation("time step too large for the explicit transfer terms (dt * rate > 1)");
    }
    if (!require_alignment) return;
    if (g.nc == 0) throw CflViolation("cycle axis is required for this model");
    if (std::abs(static_cast<double>(g.nc) * g.dc - p.c2_days) > tol * p.c2_days) {
        throw CflViolation("cycle grid does not end at c2");
    }
    const auto on_face = [](double pos, double h) {
        const double k = pos / h;
        return std::abs(k - std::round(k)) < 1e-6;
    };
    if (!on_face(p.c1_days, g.dc)) throw CflViolation("c = c1 is not on a cycle-grid face");
    if (!on_face(p.rho_d * p.c1_days, g.dx) || !on_face(p.rho_d * p.c2_days, g.dx)) {
        throw CflViolation("division abscissae rho_d (k c2 + c1) are not on maturity-grid faces");
    }
}

// Indices of the faces x = rho_d (k c2 + c1) strictly inside the uniform part
// of the maturity grid (face j separates cells j-1 and j).
inline std::vector<std::uint8_t> division_faces(const GridSpec& g, const RescaledParameters& p) {
    std::vector<std::uint8_t> faces(g.nx, 0);
    for (int k = 0;; ++k) {
        const double pos = p.rho_d * (k * p.c2_days + p.c1_days);
        if (pos >= 1.0) break;
        const auto j = static_cast<std::size_t>(std::llround(pos / g.dx));
        if (j >= 1 && j < g.nx) faces[j] = 1;
    }
    return faces;
}

// True where the Omega* cohort at x is in G1: phase (x / rho_d mod c2) in [c1, c2).
inline bool in_g1(double x, const RescaledParameters& p) {
    const double phase = std::fmod(x / p.rho_d, p.c2_days);
    return phase >= p.c1_days - 1e-12 && phase < p.c2_days;
}

inline std::vector<std::uint8_t> g1_indicator(const GridSpec& g, const RescaledParameters& p) {
    std::vector<std::uint8_t> ind(g.nx);
    for (std::size_t i = 0; i < g.nx; ++i) ind[i] = in_g1(g.x_center(i), p) ? 1 : 0;
    return ind;
}

// One upwind step of du/dt + v du/dx = 0 for v > 0 on cells of the given
// widths. `inflow` is the boundary value at the left face (flux / v). Faces
// flagged in `doubling` carry twice the upwind flux into the downstream cell.
// Returns the mass that left through the right face.
inline double advect_right(std::span<double> u, std::span<const double> widths, double speed_dt, double inflow,
                           std::span<const std::uint8_t> doubling = {}) {
    double upstream = inflow;
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double old = u[j];
        const double gain = doubling.empty() || !doubling[j] ? upstream : 2.0 * upstream;
        u[j] = old + speed_dt / widths[j] * (gain - old);
        upstream = old;
    }
    return speed_dt * upstream;
}

// Same for v < 0 (transport toward x = 0) with inflow at the right face.
// Returns the mass that left through the left face.
inline double advect_left(std::span<double> u, std::span<const double> widths, double speed_dt, double inflow) {
    double upstream = inflow;
    for (std::size_t j = u.size(); j-- > 0;) {
        const double old = u[j];
        u[j] = old + speed_dt / widths[j] * (upstream - old);
        upstream = old;
    }
    return speed_dt * upstream;
}

inline void check_nonnegative(std::span<const double> u, const char* field) {
    for (double v : u) {
        if (v < -1e-12 || !std::isfinite(v)) {
            throw NumericalFailure(std::string("negative or non-finite value in field ") + field);
        }
    }
}

inline double integrate_cells(std::span<const double> u, std::span<const double> widths) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * widths[i];
    return s;
}

}  // namespace stemflow
