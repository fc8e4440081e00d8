#pragma once

// Agent-based stem-cell model with hourly updates.
//
// Stem cells live in the Alpha (quiescent, affinity regenerating by r) or
// Omega (cycling, affinity decaying by d) compartment. Differentiated cells
// are kept as an age histogram: they double at ages 24, 48, ..., 480 hours and
// die at 672 hours. Transition characteristics depend on the Ph status.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stemflow/csv.hpp"
#include "stemflow/error.hpp"
#include "stemflow/params.hpp"
#include "stemflow/trace.hpp"

namespace stemflow {

enum class PhStatus : std::uint8_t { PhMinus = 0, PhPlus = 1, PhPlusAffected = 2 };
inline constexpr std::size_t kStatusCount = 3;

inline const char* status_name(PhStatus s) {
    switch (s) {
        case PhStatus::PhMinus: return "ph_minus";
        case PhStatus::PhPlus: return "ph_plus";
        case PhStatus::PhPlusAffected: return "ph_plus_affected";
    }
    return "?";
}

struct AlphaAgent {
    double affinity = 1.0;
    PhStatus status = PhStatus::PhMinus;
};

struct OmegaAgent {
    double affinity = 1.0;
    std::uint8_t counter = 0;  // hours into the cycle
    PhStatus status = PhStatus::PhMinus;
};

// Where the 0..c2-1 counter places G1 and the synthesis/mitosis phase.
//   SynthesisFirst: a cell entering Omega starts synthesis at counter c2 - c1,
//     divides when the counter wraps (c1 hours later) and is in G1 for
//     counter in [0, c2 - c1). Same phase timing as the structured PDE, where
//     doubling happens at c = c1 and G1 is [c1, c2).
//   G1Last: entering cells start at counter 0, G1 is [c1, c2) and division
//     happens at the wrap, after G1.
enum class CycleLayout { SynthesisFirst, G1Last };

// Differentiated cells by age in hours, one histogram per status.
inline constexpr int kDifferentiatedLifespanHours = 672;
inline constexpr int kPrecursorAgeLimitHours = 480;
inline constexpr int kPrecursorDivisionHours = 24;

struct InitialPopulation {
    // Alpha cells start at affinity a_max; Omega cells at a_max at the entry counter.
    std::array<std::uint64_t, kStatusCount> alpha{100000, 0, 0};
    std::array<std::uint64_t, kStatusCount> omega{0, 0, 0};
};

struct AbmConfig {
    RawParameters raw;  // kinetics and the Ph- characteristics
    SigmoidKnots ph_plus_alpha = preset_ph_plus().f_alpha;
    SigmoidKnots ph_plus_omega = preset_ph_plus().f_omega;
    SigmoidKnots affected_alpha = preset_imatinib_affected().f_alpha;
    SigmoidKnots affected_omega = preset_imatinib_affected().f_omega;
    InitialPopulation initial;
    double horizon_days = 100.0;
    std::uint64_t seed = 1;
    bool imatinib = false;
    int cadence_hours = 24;
    std::uint64_t max_stem_cells = 50'000'000;
    CycleLayout layout = CycleLayout::SynthesisFirst;

    void validate() const {
        raw.validate(true);
        if (!(horizon_days > 0.0)) throw InvalidParameter("horizon_days must be > 0");
        if (cadence_hours < 1) throw InvalidParameter("cadence_hours must be >= 1");
        const double hours = horizon_days * 24.0;
        if (std::abs(hours - std::round(hours)) > 1e-9) throw InvalidParameter("horizon must be a whole number of hours");
        if (static_cast<long long>(std::llround(hours)) % cadence_hours != 0) {
            throw InvalidParameter("cadence_hours must divide the horizon");
        }
        if (raw.c2_hours > 255.0 || std::abs(raw.c1_hours - std::round(raw.c1_hours)) > 1e-12 ||
            std::abs(raw.c2_hours - std::round(raw.c2_hours)) > 1e-12) {
            throw InvalidParameter("agent model needs whole-hour c1, c2 with c2 <= 255");
        }
    }
};

// Population totals at one time; counts in units of N~ (cells / N~).
struct AbmSample {
    double t_days = 0.0;
    std::array<double, kStatusCount> alpha{};
    std::array<double, kStatusCount> omega{};
    std::array<double, kStatusCount> precursor{};
    std::array<double, kStatusCount> mature{};

    [[nodiscard]] static double sum(const std::array<double, kStatusCount>& v) { return v[0] + v[1] + v[2]; }
};

using PopulationTrace = std::vector<AbmSample>;

class AgentModel {
public:
    explicit AgentModel(AbmConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        const RawParameters& raw = cfg_.raw;
        alpha_sig_[0] = sigmoid_coefficients(raw.f_alpha, raw.n_tilde_a);
        omega_sig_[0] = sigmoid_coefficients(raw.f_omega, raw.n_tilde_omega);
        alpha_sig_[1] = sigmoid_coefficients(cfg_.ph_plus_alpha, raw.n_tilde_a);
        omega_sig_[1] = sigmoid_coefficients(cfg_.ph_plus_omega, raw.n_tilde_omega);
        alpha_sig_[2] = sigmoid_coefficients(cfg_.affected_alpha, raw.n_tilde_a);
        omega_sig_[2] = sigmoid_coefficients(cfg_.affected_omega, raw.n_tilde_omega);
        c1_ = static_cast<int>(std::lround(raw.c1_hours));
        c2_ = static_cast<int>(std::lround(raw.c2_hours));
        if (cfg_.layout == CycleLayout::SynthesisFirst) {
            entry_counter_ = static_cast<std::uint8_t>(c2_ - c1_);
            g1_begin_ = 0;
            g1_end_ = c2_ - c1_;
        } else {
            entry_counter_ = 0;
            g1_begin_ = c1_;
            g1_end_ = c2_;
        }
        for (std::size_t s = 0; s < kStatusCount; ++s) {
            const auto st = static_cast<PhStatus>(s);
            alpha_.insert(alpha_.end(), cfg_.initial.alpha[s], AlphaAgent{raw.a_max, st});
            omega_.insert(omega_.end(), cfg_.initial.omega[s], OmegaAgent{raw.a_max, entry_counter_, st});
            diff_[s].assign(kDifferentiatedLifespanHours, 0);
        }
        check_cap();
    }

    [[nodiscard]] const std::vector<AlphaAgent>& alpha_agents() const { return alpha_; }
    [[nodiscard]] const std::vector<OmegaAgent>& omega_agents() const { return omega_; }
    [[nodiscard]] const std::vector<std::uint64_t>& differentiated(PhStatus s) const {
        return diff_[static_cast<std::size_t>(s)];
    }
    [[nodiscard]] long hour() const { return hour_; }

    // Test hooks: replace the stem-cell population.
    void set_agents(std::vector<AlphaAgent> a, std::vector<OmegaAgent> o) {
        alpha_ = std::move(a);
        omega_ = std::move(o);
        check_cap();
    }
    void set_differentiated(PhStatus s, std::vector<std::uint64_t> by_age) {
        if (by_age.size() != kDifferentiatedLifespanHours) throw InvalidParameter("age histogram must have 672 bins");
        diff_[static_cast<std::size_t>(s)] = std::move(by_age);
    }

    // One hour.
    void step() {
        const RawParameters& raw = cfg_.raw;
        const double a_total = static_cast<double>(alpha_.size());
        const double omega_total = static_cast<double>(omega_.size());

        if (cfg_.imatinib) apply_imatinib();

        std::array<double, kStatusCount> to_omega_scale{};  // hourly prob = scale * a_min / a
        std::array<double, kStatusCount> to_alpha_scale{};  // hourly prob = scale * a
        for (std::size_t s = 0; s < kStatusCount; ++s) {
            to_omega_scale[s] = raw.a_min * omega_sig_[s].per_hour(omega_total);
            to_alpha_scale[s] = alpha_sig_[s].per_hour(a_total);
        }

        std::vector<OmegaAgent> entering_omega;
        std::size_t w = 0;
        for (std::size_t i = 0; i < alpha_.size(); ++i) {
            AlphaAgent ag = alpha_[i];
            const double p = std::min(1.0, to_omega_scale[static_cast<std::size_t>(ag.status)] / ag.affinity);
            if (uniform() < p) {
                entering_omega.push_back({ag.affinity, entry_counter_, ag.status});
                continue;
            }
            ag.affinity = std::min(ag.affinity * raw.r, raw.a_max);
            alpha_[w++] = ag;
        }
        alpha_.resize(w);

        std::vector<AlphaAgent> entering_alpha;
        std::vector<OmegaAgent> clones;
        std::array<std::uint64_t, kStatusCount> newly_differentiated{};
        w = 0;
        for (std::size_t i = 0; i < omega_.size(); ++i) {
            OmegaAgent ag = omega_[i];
            if (ag.counter >= g1_begin_ && ag.counter < g1_end_) {
                const double p = std::min(1.0, to_alpha_scale[static_cast<std::size_t>(ag.status)] * ag.affinity);
                if (uniform() < p) {
                    entering_alpha.push_back({ag.affinity, ag.status});
                    continue;
                }
            }
            if (ag.affinity <= raw.a_min) {
                ++newly_differentiated[static_cast<std::size_t>(ag.status)];
                continue;
            }
            ag.affinity = std::max(ag.affinity / raw.d, raw.a_min);
            ++ag.counter;
            if (ag.counter >= c2_) {
                ag.counter = 0;
                clones.push_back(ag);
            }
            omega_[w++] = ag;
        }
        omega_.resize(w);

        for (std::size_t s = 0; s < kStatusCount; ++s) age_differentiated(diff_[s]);
        for (std::size_t s = 0; s < kStatusCount; ++s) diff_[s][0] += newly_differentiated[s];

        alpha_.insert(alpha_.end(), entering_alpha.begin(), entering_alpha.end());
        omega_.insert(omega_.end(), entering_omega.begin(), entering_omega.end());
        omega_.insert(omega_.end(), clones.begin(), clones.end());
        ++hour_;
        check_cap();
    }

    [[nodiscard]] AbmSample sample() const {
        AbmSample out;
        out.t_days = static_cast<double>(hour_) / 24.0;
        const double na = cfg_.raw.n_tilde_a;
        const double no = cfg_.raw.n_tilde_omega;
        for (const auto& ag : alpha_) out.alpha[static_cast<std::size_t>(ag.status)] += 1.0;
        for (const auto& ag : omega_) out.omega[static_cast<std::size_t>(ag.status)] += 1.0;
        for (std::size_t s = 0; s < kStatusCount; ++s) {
            out.alpha[s] /= na;
            out.omega[s] /= no;
            double pre = 0.0;
            double mat = 0.0;
            for (int age = 0; age < kDifferentiatedLifespanHours; ++age) {
                (age < kPrecursorAgeLimitHours ? pre : mat) += static_cast<double>(diff_[s][age]);
            }
            out.precursor[s] = pre / na;
            out.mature[s] = mat / na;
        }
        return out;
    }

    PopulationTrace run() {
        PopulationTrace trace;
        trace.push_back(sample());
        const long hours = std::lround(cfg_.horizon_days * 24.0);
        for (long h = 1; h <= hours; ++h) {
            step();
            if (h % cfg_.cadence_hours == 0) trace.push_back(sample());
        }
        return trace;
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    void apply_imatinib() {
        const RawParameters& raw = cfg_.raw;
        std::size_t w = 0;
        for (std::size_t i = 0; i < omega_.size(); ++i) {
            OmegaAgent ag = omega_[i];
            if (ag.status == PhStatus::PhPlusAffected && uniform() < raw.r_deg) continue;
            omega_[w++] = ag;
        }
        omega_.resize(w);
        for (auto& ag : omega_) {
            if (ag.status == PhStatus::PhPlus && uniform() < raw.r_inh) ag.status = PhStatus::PhPlusAffected;
        }
    }

    static void age_differentiated(std::vector<std::uint64_t>& by_age) {
        // Ages advance by one hour; the last bin reaches 672 and dies.
        for (int age = kDifferentiatedLifespanHours - 1; age > 0; --age) by_age[age] = by_age[age - 1];
        by_age[0] = 0;
        for (int age = kPrecursorDivisionHours; age <= kPrecursorAgeLimitHours; age += kPrecursorDivisionHours) {
            by_age[age] *= 2;
        }
    }

    void check_cap() const {
        if (alpha_.size() + omega_.size() > cfg_.max_stem_cells) {
            throw ResourceError("stem-cell population exceeded the configured cap of " +
                                std::to_string(cfg_.max_stem_cells));
        }
    }

    AbmConfig cfg_;
    std::mt19937_64 rng_;
    std::array<SigmoidCoefficients, kStatusCount> alpha_sig_;
    std::array<SigmoidCoefficients, kStatusCount> omega_sig_;
    int c1_ = 17;
    int c2_ = 49;
    std::uint8_t entry_counter_ = 32;
    int g1_begin_ = 0;
    int g1_end_ = 32;
    std::vector<AlphaAgent> alpha_;
    std::vector<OmegaAgent> omega_;
    std::array<std::vector<std::uint64_t>, kStatusCount> diff_;
    long hour_ = 0;
};

inline PopulationTrace simulate_abm(const AbmConfig& cfg) {
    AgentModel model(cfg);
    return model.run();
}

// Stem-cell totals over all statuses, for comparison with the PDE traces.
inline TotalsTrace abm_totals(const PopulationTrace& trace) {
    TotalsTrace out;
    out.reserve(trace.size());
    for (const auto& s : trace) out.push_back({s.t_days, AbmSample::sum(s.alpha), AbmSample::sum(s.omega)});
    return out;
}

// Long format: one row per time and status, plus an "all" row.
inline Table population_table(const PopulationTrace& trace) {
    Table t;
    t.columns = {"t_days", "status", "A_total", "Omega_total", "precursor", "mature"};
    for (const auto& s : trace) {
        t.add_row({s.t_days, std::string("all"), AbmSample::sum(s.alpha), AbmSample::sum(s.omega),
                   AbmSample::sum(s.precursor), AbmSample::sum(s.mature)});
        for (std::size_t k = 0; k < kStatusCount; ++k) {
            t.add_row({s.t_days, std::string(status_name(static_cast<PhStatus>(k))), s.alpha[k], s.omega[k],
                       s.precursor[k], s.mature[k]});
        }
    }
    return t;
}

}  // namespace stemflow
