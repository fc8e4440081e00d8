#pragma once

// Stability regions of the Approx4 nonzero steady state over (rho_d, b),
// rightmost-root trajectories along one-parameter sweeps, and regime
// classification of simulated population traces.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stemflow/csv.hpp"
#include "stemflow/error.hpp"
#include "stemflow/parallel.hpp"
#include "stemflow/params.hpp"
#include "stemflow/spectral.hpp"
#include "stemflow/steady.hpp"
#include "stemflow/trace.hpp"

namespace stemflow {

enum class Regime { UnstablePeriodic, StableNonzero, StableZero, Indeterminate };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::UnstablePeriodic: return "unstable_periodic";
        case Regime::StableNonzero: return "stable_nonzero";
        case Regime::StableZero: return "stable_zero";
        case Regime::Indeterminate: return "indeterminate";
    }
    return "?";
}

struct StabilityVerdict {
    double rho_d = 0.0;
    double b = 0.0;
    Regime regime = Regime::Indeterminate;
    bool nonzero_exists = false;
    double rightmost_re = std::nan("");
    double rightmost_im = std::nan("");
    bool marginal = false;  // |Re| within the tolerance; reported as the stable neighbour
    std::string error;      // set when regime is Indeterminate
};

constexpr double kMarginalTolerance = 1e-6;  // per day

inline std::optional<CharacteristicRoot> rightmost_root(const CharacteristicEquation& eq, const RootSearchBox& box) {
    const auto roots = rightmost_roots(eq, box);
    if (roots.empty()) return std::nullopt;
    return roots.front();
}

inline StabilityVerdict classify_point(const RescaledParameters& base, double rho_d, double b,
                                       const RootSearchBox& box = {}) {
    StabilityVerdict v;
    v.rho_d = rho_d;
    v.b = b;
    if (!(rho_d > 0.0) || !(b > 0.0)) throw InvalidParameter("classify_point needs rho_d > 0 and b > 0");
    RescaledParameters p = base;
    p.rho_d = rho_d;
    p.b = b;
    try {
        v.nonzero_exists = exists_nonzero_approx4(p);
        if (!v.nonzero_exists) {
            v.regime = Regime::StableZero;
            return v;
        }
        const CharacteristicEquation eq(solve_steady_approx4(p), p);
        const auto root = rightmost_root(eq, box);
        if (!root) {
            v.error = "no characteristic root converged in the search box";
            return v;
        }
        v.rightmost_re = root->lambda.real();
        v.rightmost_im = root->lambda.imag();
        v.marginal = std::abs(v.rightmost_re) <= kMarginalTolerance;
        v.regime = v.rightmost_re > kMarginalTolerance ? Regime::UnstablePeriodic : Regime::StableNonzero;
    } catch (const DomainError& e) {
        v.regime = Regime::Indeterminate;
        v.error = e.what();
    }
    return v;
}

// ---------------------------------------------------------------------------
// Region map

struct RegionMap {
    std::vector<double> rho_d;  // increasing
    std::vector<double> b;      // increasing
    std::vector<StabilityVerdict> cells;  // index ib * rho_d.size() + ir

    [[nodiscard]] const StabilityVerdict& at(std::size_t ir, std::size_t ib) const {
        return cells[ib * rho_d.size() + ir];
    }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline RegionMap region_map(const RescaledParameters& base, std::vector<double> rho_d, std::vector<double> b,
                            const RootSearchBox& box = {}, unsigned workers = 0) {
    for (double r : rho_d) {
        if (!(r > 0.0)) throw InvalidParameter("region map needs positive rho_d values");
    }
    for (double x : b) {
        if (!(x > 0.0)) throw InvalidParameter("region map needs positive b values");
    }
    RegionMap m;
    m.rho_d = std::move(rho_d);
    m.b = std::move(b);
    m.cells.resize(m.rho_d.size() * m.b.size());
    // One root search per cell; keep the inner search sequential.
    RootSearchBox inner = box;
    parallel_for(
        m.cells.size(),
        [&](std::size_t k) {
            const std::size_t ir = k % m.rho_d.size();
            const std::size_t ib = k / m.rho_d.size();
            m.cells[k] = classify_point(base, m.rho_d[ir], m.b[ib], inner);
        },
        workers);
    return m;
}

// Regime order along increasing rho_d at fixed b: Unstable* Stable* Zero*.
inline bool column_is_monotone(const RegionMap& m, std::size_t ib) {
    int rank = 0;
    for (std::size_t ir = 0; ir < m.rho_d.size(); ++ir) {
        const Regime r = m.at(ir, ib).regime;
        if (r == Regime::Indeterminate) return false;
        const int k = r == Regime::UnstablePeriodic ? 0 : (r == Regime::StableNonzero ? 1 : 2);
        if (k < rank) return false;
        rank = k;
    }
    return true;
}

inline Table region_table(const RegionMap& m) {
    Table t;
    t.columns = {"rho_d", "b", "regime", "rightmost_re", "rightmost_im", "nonzero_exists"};
    for (std::size_t ib = 0; ib < m.b.size(); ++ib) {
        for (std::size_t ir = 0; ir < m.rho_d.size(); ++ir) {
            const auto& v = m.at(ir, ib);
            t.add_row({v.rho_d, v.b, std::string(regime_name(v.regime)), v.rightmost_re, v.rightmost_im,
                       static_cast<std::int64_t>(v.nonzero_exists ? 1 : 0)});
        }
    }
    return t;
}

// Heatmap with rho_d on the horizontal axis and b on the vertical axis.
inline void write_region_svg(std::ostream& os, const RegionMap& m) {
    const double cell = 12.0;
    const double left = 70.0, top = 20.0, bottom = 60.0, right = 170.0;
    const double w = cell * static_cast<double>(m.rho_d.size());
    const double h = cell * static_cast<double>(m.b.size());
    const auto color = [](Regime r) {
        switch (r) {
            case Regime::UnstablePeriodic: return "#d7301f";
            case Regime::StableNonzero: return "#4393c3";
            case Regime::StableZero: return "#bdbdbd";
            default: return "#000000";
        }
    };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + w + right << "\" height=\""
       << top + h + bottom << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (std::size_t ib = 0; ib < m.b.size(); ++ib) {
        for (std::size_t ir = 0; ir < m.rho_d.size(); ++ir) {
            const double x = left + cell * static_cast<double>(ir);
            const double y = top + h - cell * static_cast<double>(ib + 1);
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"" << color(m.at(ir, ib).regime) << "\"/>\n";
        }
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    const auto tick = [&](double v) { return format_double(std::round(v * 1e4) / 1e4); };
    if (!m.rho_d.empty() && !m.b.empty()) {
        os << "<text x=\"" << left << "\" y=\"" << top + h + 15 << "\">" << tick(m.rho_d.front()) << "</text>\n";
        os << "<text x=\"" << left + w << "\" y=\"" << top + h + 15 << "\" text-anchor=\"end\">"
           << tick(m.rho_d.back()) << "</text>\n";
        os << "<text x=\"" << left + 0.5 * w << "\" y=\"" << top + h + 40
           << "\" text-anchor=\"middle\">rho_d (1/day)</text>\n";
        os << "<text x=\"" << left - 5 << "\" y=\"" << top + h << "\" text-anchor=\"end\">" << tick(m.b.front())
           << "</text>\n";
        os << "<text x=\"" << left - 5 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << tick(m.b.back())
           << "</text>\n";
        os << "<text x=\"15\" y=\"" << top + 0.5 * h << "\" transform=\"rotate(-90 15 " << top + 0.5 * h
           << ")\" text-anchor=\"middle\">b (1/day)</text>\n";
    }
    const Regime legend[] = {Regime::UnstablePeriodic, Regime::StableNonzero, Regime::StableZero};
    for (int i = 0; i < 3; ++i) {
        const double y = top + 20.0 * i;
        os << "<rect x=\"" << left + w + 10 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\""
           << color(legend[i]) << "\"/>\n";
        os << "<text x=\"" << left + w + 28 << "\" y=\"" << y + 10 << "\">" << regime_name(legend[i]) << "</text>\n";
    }
    os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Rightmost-root trajectories

enum class SweepParameter { RhoD, B };

inline const char* sweep_parameter_name(SweepParameter s) { return s == SweepParameter::RhoD ? "rho_d" : "b"; }

struct RootCrossing {
    double value = 0.0;  // parameter value where Re of the rightmost root vanishes
    cplx root;           // rightmost root there
    int direction = 0;   // +1: stable -> unstable along the sweep, -1: unstable -> stable
};

struct RootTrajectory {
    SweepParameter parameter = SweepParameter::RhoD;
    double fixed_value = 0.0;  // the other parameter
    std::vector<double> values;
    std::vector<cplx> roots;             // rightmost root per value
    std::vector<bool> branch_switch;     // rightmost root not the continuation of the previous one
    std::vector<RootCrossing> crossings;
    std::string error;                   // set when the sweep stopped early
};

struct TrajectoryOptions {
    RootSearchBox box;
    double jump_threshold = 0.1;  // per day; larger steps of the continued root are flagged
    double crossing_tolerance = 1e-9;  // on the swept parameter
};

namespace detail {

inline RescaledParameters with_sweep(const RescaledParameters& base, SweepParameter s, double value, double fixed) {
    RescaledParameters p = base;
    if (s == SweepParameter::RhoD) {
        p.rho_d = value;
        p.b = fixed;
    } else {
        p.b = value;
        p.rho_d = fixed;
    }
    return p;
}

inline cplx rightmost_at(const RescaledParameters& p, const RootSearchBox& box) {
    const CharacteristicEquation eq(solve_steady_approx4(p), p);
    const auto r = rightmost_root(eq, box);
    if (!r) throw NumericalFailure("no characteristic root converged in the search box");
    return r->lambda;
}

}  // namespace detail

// Each sweep value gets a full multi-start search plus Newton continued from
// the previous rightmost root; the rightmost of all candidates is kept.
// Sign changes of its real part are refined by bisection on the parameter.
inline RootTrajectory root_trajectory(const RescaledParameters& base, SweepParameter parameter,
                                      std::vector<double> values, double fixed_value,
                                      const TrajectoryOptions& opt = {}) {
    RootTrajectory tr;
    tr.parameter = parameter;
    tr.fixed_value = fixed_value;
    std::optional<cplx> previous;
    for (double v : values) {
        const RescaledParameters p = detail::with_sweep(base, parameter, v, fixed_value);
        try {
            const CharacteristicEquation eq(solve_steady_approx4(p), p);
            auto roots = rightmost_roots(eq, opt.box);
            std::optional<cplx> continued;
            if (previous) {
                if (auto r = newton_root(eq, *previous)) continued = r->lambda;
            }
            if (roots.empty() && !continued) throw NumericalFailure("no characteristic root converged");
            cplx best = roots.empty() ? *continued : roots.front().lambda;
            if (continued && continued->real() > best.real() + 1e-9) best = std::conj(*continued);
            if (best.imag() < 0.0) best = std::conj(best);
            bool switched = false;
            if (previous) {
                const bool follows = continued && std::abs(std::abs(continued->imag()) - best.imag()) < 1e-6 &&
                                     std::abs(continued->real() - best.real()) < 1e-6;
                switched = !follows || std::abs(best - *previous) > opt.jump_threshold;
            }
            tr.values.push_back(v);
            tr.roots.push_back(best);
            tr.branch_switch.push_back(switched);
            previous = best;
        } catch (const DomainError& e) {
            tr.error = std::string("sweep stopped at ") + sweep_parameter_name(parameter) + " = " +
                       format_double(v) + ": " + e.what();
            break;
        }
    }
    for (std::size_t k = 1; k < tr.roots.size(); ++k) {
        const double r0 = tr.roots[k - 1].real();
        const double r1 = tr.roots[k].real();
        if ((r0 > 0.0) == (r1 > 0.0)) continue;
        const auto re_at = [&](double v) {
            return detail::rightmost_at(detail::with_sweep(base, parameter, v, fixed_value), opt.box).real();
        };
        double lo = tr.values[k - 1], hi = tr.values[k];
        const bool lo_positive = r0 > 0.0;
        while (std::abs(hi - lo) > opt.crossing_tolerance) {
            const double mid = 0.5 * (lo + hi);
            if ((re_at(mid) > 0.0) == lo_positive) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        RootCrossing c;
        c.value = 0.5 * (lo + hi);
        c.root = detail::rightmost_at(detail::with_sweep(base, parameter, c.value, fixed_value), opt.box);
        if (c.root.imag() < 0.0) c.root = std::conj(c.root);
        c.direction = lo_positive ? -1 : +1;
        tr.crossings.push_back(c);
    }
    return tr;
}

inline Table trajectory_table(const RootTrajectory& tr) {
    Table t;
    t.columns = {sweep_parameter_name(tr.parameter), "re", "im", "branch_switch"};
    for (std::size_t k = 0; k < tr.values.size(); ++k) {
        t.add_row({tr.values[k], tr.roots[k].real(), tr.roots[k].imag(),
                   static_cast<std::int64_t>(tr.branch_switch[k] ? 1 : 0)});
    }
    return t;
}

inline Table crossing_table(const RootTrajectory& tr) {
    Table t;
    t.columns = {sweep_parameter_name(tr.parameter), "re", "im", "direction"};
    for (const auto& c : tr.crossings) {
        t.add_row({c.value, c.root.real(), c.root.imag(), static_cast<std::int64_t>(c.direction)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Trace classification

enum class TraceRegime { Periodic, NonzeroPlateau, Extinct, Indeterminate };

inline const char* trace_regime_name(TraceRegime r) {
    switch (r) {
        case TraceRegime::Periodic: return "periodic";
        case TraceRegime::NonzeroPlateau: return "nonzero_plateau";
        case TraceRegime::Extinct: return "extinct";
        case TraceRegime::Indeterminate: return "indeterminate";
    }
    return "?";
}

struct TraceFeatures {
    double peak = 0.0;
    double final_value = 0.0;
    double final_window_max = 0.0;  // over the last 10% of the duration
    double tail_mean = 0.0;
    double tail_amplitude = 0.0;  // (max - min) / 2 over the tail
    double tail_cv = 0.0;         // standard deviation / mean over the tail
    int cycles = 0;               // low-to-high passages across the middle of the tail range
    double decay_rate = 0.0;      // log-linear slope over the tail (per day)
    double late_decay_rate = 0.0; // same over the last third of the tail
    double decay_fit_r2 = 0.0;
};

// Tail = the last 70% of the trace duration.
inline TraceFeatures trace_features(const TotalsTrace& trace) {
    if (trace.size() < 10) throw InvalidParameter("trace too short to classify");
    const double t0 = trace.front().t_days;
    const double t1 = trace.back().t_days;
    if (!(t1 - t0 >= 60.0 - 1e-9)) throw InvalidParameter("trace classification needs at least 60 days");
    std::vector<double> t, y;
    TraceFeatures f;
    for (const auto& s : trace) {
        const double v = s.a_total + s.omega_total;
        f.peak = std::max(f.peak, v);
        if (s.t_days >= t0 + 0.3 * (t1 - t0)) {
            t.push_back(s.t_days);
            y.push_back(v);
        }
    }
    f.final_value = y.back();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= t1 - 0.1 * (t1 - t0)) f.final_window_max = std::max(f.final_window_max, y[i]);
    }
    const double n = static_cast<double>(y.size());
    double sum = 0.0, sum2 = 0.0;
    double lo = y.front(), hi = y.front();
    for (double v : y) {
        sum += v;
        sum2 += v * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    f.tail_mean = sum / n;
    f.tail_amplitude = 0.5 * (hi - lo);
    f.tail_cv = f.tail_mean > 0.0 ? std::sqrt(std::max(0.0, sum2 / n - f.tail_mean * f.tail_mean)) / f.tail_mean : 0.0;

    // Passages from below 25% to above 75% of the tail range, after the first
    // 10% of the trace. Relaxation oscillations spanning decades are measured
    // on a log scale so that every burst counts.
    const bool logscale = lo > 0.0 && hi > 10.0 * lo;
    const auto level = [&](double v) { return logscale ? std::log(v) : v; };
    const double l_lo = level(lo), l_hi = level(hi);
    const double low_mark = l_lo + 0.25 * (l_hi - l_lo);
    const double high_mark = l_lo + 0.75 * (l_hi - l_lo);
    int side = 0, rises = 0;
    for (const auto& smp : trace) {
        if (smp.t_days < t0 + 0.1 * (t1 - t0)) continue;
        const double v = smp.a_total + smp.omega_total;
        if (logscale && !(v > 0.0)) continue;
        const double l = level(v);
        const int s = l > high_mark ? 1 : (l < low_mark ? -1 : 0);
        if (s == 0) continue;
        if (side == -1 && s == 1) ++rises;
        side = s;
    }
    f.cycles = rises;

    const auto loglinear = [&](std::size_t begin, double* r2) {
        std::vector<double> xs, ls;
        for (std::size_t i = begin; i < y.size(); ++i) {
            if (y[i] > 0.0) {
                xs.push_back(t[i]);
                ls.push_back(std::log(y[i]));
            }
        }
        if (xs.size() < 3) return 0.0;
        const double m = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ls[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ls[i];
            syy += ls[i] * ls[i];
        }
        const double cov = m * sxy - sx * sy;
        const double vx = m * sxx - sx * sx;
        const double vy = m * syy - sy * sy;
        if (r2) *r2 = vy > 0.0 ? cov * cov / (vx * vy) : 1.0;
        return cov / vx;
    };
    f.decay_rate = -loglinear(0, &f.decay_fit_r2);
    f.late_decay_rate = -loglinear(2 * y.size() / 3, nullptr);
    return f;
}

// Extinct: total below 1e-3 of the peak over the last 10% of the duration,
// or a sustained exponential decline over the tail (at least half an e-fold,
// log-linear fit r^2 >= 0.95, late rate at least half the tail rate). The
// second rule catches slow extinction that cannot reach the 1e-3 threshold
// within the horizon; the window keeps deep troughs of relaxation
// oscillations from counting as extinction.
inline TraceRegime classify_trace(const TotalsTrace& trace) {
    const TraceFeatures f = trace_features(trace);
    if (f.final_window_max < 1e-3 * f.peak) return TraceRegime::Extinct;
    const double tail_span = trace.back().t_days - (trace.front().t_days + 0.3 * (trace.back().t_days - trace.front().t_days));
    const bool sustained_decay = f.decay_rate * tail_span > 0.5 && f.decay_fit_r2 >= 0.95 &&
                                 f.late_decay_rate >= 0.5 * f.decay_rate;
    if (sustained_decay) return TraceRegime::Extinct;
    if (f.tail_mean > 0.0 && f.tail_amplitude > 0.1 * f.tail_mean && f.cycles >= 3) return TraceRegime::Periodic;
    if (f.tail_cv < 0.02) return TraceRegime::NonzeroPlateau;
    return TraceRegime::Indeterminate;
}

}  // namespace stemflow
