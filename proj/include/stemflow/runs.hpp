#pragma once

// Model selection and whole-run drivers shared by the command-line tool and
// the tests: one population trace from a run configuration.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "stemflow/abm.hpp"
#include "stemflow/config.hpp"
#include "stemflow/error.hpp"
#include "stemflow/grid.hpp"
#include "stemflow/pde_full.hpp"
#include "stemflow/pde_reduced.hpp"
#include "stemflow/trace.hpp"

namespace stemflow {

enum class Model { Abm, Approx0, Approx1, Approx2, Approx3, Approx4 };

inline const char* model_name(Model m) {
    switch (m) {
        case Model::Abm: return "abm";
        case Model::Approx0: return "approx0";
        case Model::Approx1: return "approx1";
        case Model::Approx2: return "approx2";
        case Model::Approx3: return "approx3";
        case Model::Approx4: return "approx4";
    }
    return "?";
}

// Accepts "abm", "approx0".."approx4" and the bare digits "0".."4".
inline Model parse_model(std::string_view s) {
    if (s == "abm") return Model::Abm;
    if (s.size() == 1 && s[0] >= '0' && s[0] <= '4') return static_cast<Model>(1 + (s[0] - '0'));
    if (s.size() == 7 && s.substr(0, 6) == "approx" && s[6] >= '0' && s[6] <= '4') {
        return static_cast<Model>(1 + (s[6] - '0'));
    }
    throw ConfigError("unknown model '" + std::string(s) + "' (abm, approx0 .. approx4)");
}

inline Variant reduced_variant(Model m) {
    switch (m) {
        case Model::Approx1: return Variant::Approx1;
        case Model::Approx2: return Variant::Approx2;
        case Model::Approx3: return Variant::Approx3;
        case Model::Approx4: return Variant::Approx4;
        default: throw InvalidParameter(std::string(model_name(m)) + " is not a reduced system");
    }
}

// The model's default grid unless the configuration sets nx (uniform grids) or
// hour_subdivisions (cycle-aligned grids).
inline GridSpec model_grid(Model m, const RescaledParameters& p, const RunConfig& c) {
    const bool aligned = m == Model::Approx0 || m == Model::Approx2;
    if (aligned) {
        const int sub = c.hour_subdivisions > 0
                            ? c.hour_subdivisions
                            : default_hour_subdivisions(p, c.nx > 0 ? c.nx : 256);
        return cycle_aligned_grid(p, sub, c.courant);
    }
    return uniform_grid(p, c.nx > 0 ? c.nx : 256, c.courant);
}

// Totals trace over c.horizon_days starting from A* = c.initial_a_star.
inline TotalsTrace simulate_totals(Model m, const RunConfig& c) {
    if (m == Model::Abm) return abm_totals(simulate_abm(c.abm()));
    const RescaledParameters p = c.rescaled();
    const GridSpec g = model_grid(m, p, c);
    if (m == Model::Approx0) {
        const FullSolver solver(p, g);
        FullState s = solver.initial(c.initial_a_star);
        return solver.run(s, c.horizon_days, c.record_every_days);
    }
    const ReducedSolver solver(reduced_variant(m), p, g);
    ReducedState s = solver.initial(c.initial_a_star);
    return solver.run(s, c.horizon_days, c.record_every_days);
}

// Linear interpolation of a trace's total population at time t.
inline double total_at(const TotalsTrace& trace, double t) {
    if (trace.empty()) throw InvalidParameter("empty trace");
    const auto it = std::lower_bound(trace.begin(), trace.end(), t,
                                     [](const TraceSample& s, double v) { return s.t_days < v; });
    if (it == trace.begin()) return it->a_total + it->omega_total;
    if (it == trace.end()) return trace.back().a_total + trace.back().omega_total;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t_days) / (hi.t_days - lo.t_days);
    return (1.0 - w) * (lo.a_total + lo.omega_total) + w * (hi.a_total + hi.omega_total);
}

// max |a - b| / max |b| of the total population over the samples of `a` with
// t >= t_from, `b` interpolated.
inline double relative_sup_gap(const TotalsTrace& a, const TotalsTrace& b, double t_from) {
    double gap = 0.0, scale = 0.0;
    for (const auto& s : a) {
        if (s.t_days < t_from) continue;
        const double ref = total_at(b, s.t_days);
        gap = std::max(gap, std::abs(s.a_total + s.omega_total - ref));
        scale = std::max(scale, std::abs(ref));
    }
    if (!(scale > 0.0)) throw InvalidParameter("reference trace vanishes on the comparison window");
    return gap / scale;
}

}  // namespace stemflow
