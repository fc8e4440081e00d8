#pragma once

// Flat key = value parameter files. One setting per line, '#' starts a
// comment. Unknown or repeated keys are errors so that a misspelling aborts
// before any computation. An optional `preset = <name>` line selects the base
// parameter set; every other key overrides it regardless of line order.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "stemflow/abm.hpp"
#include "stemflow/error.hpp"
#include "stemflow/params.hpp"

namespace stemflow {

struct RunConfig {
    std::string preset = "ph-minus";
    RawParameters raw = preset_ph_minus();
    double alpha_midpoint = 0.5;
    // Direct overrides of the rescaled rates (take precedence over d and b_per_day).
    std::optional<double> rho_d;
    std::optional<double> b;
    double initial_a_star = 1.0;

    // Agent model.
    std::uint64_t seed = 1;
    double horizon_days = 100.0;
    bool imatinib = false;
    int cadence_hours = 24;
    CycleLayout layout = CycleLayout::SynthesisFirst;
    std::uint64_t max_stem_cells = 50'000'000;

    // Grids. Zero selects the model's default.
    std::size_t nx = 0;
    int hour_subdivisions = 0;
    double courant = 1.0;
    double record_every_days = 0.25;
    int steps_per_delay = 256;

    // Complex root search box.
    double re_min = -5.0;
    double re_max = 5.0;
    double im_min = 0.0;
    double im_max = 40.0;
    int n_re = 21;
    int n_im = 21;

    [[nodiscard]] RescaledParameters rescaled() const {
        RescaledParameters p = rescale(raw);
        p.alpha_midpoint = alpha_midpoint;
        if (rho_d) p.rho_d = *rho_d;
        if (b) p.b = *b;
        if (!(p.rho_d > 0.0) || !(p.b > 0.0)) throw InvalidParameter("rho_d and b must be > 0");
        if (!(alpha_midpoint >= 0.0 && alpha_midpoint <= 1.0)) throw InvalidParameter("alpha_midpoint must lie in [0, 1]");
        return p;
    }

    [[nodiscard]] AbmConfig abm() const {
        AbmConfig c;
        c.raw = raw;
        c.horizon_days = horizon_days;
        c.seed = seed;
        c.imatinib = imatinib;
        c.cadence_hours = cadence_hours;
        c.layout = layout;
        c.max_stem_cells = max_stem_cells;
        c.initial.alpha[0] = static_cast<std::uint64_t>(std::llround(initial_a_star * raw.n_tilde_a));
        return c;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double config_double(std::string_view v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

template <class Int>
Int config_int(std::string_view v) {
    Int out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        throw ConfigError("expected an integer, got '" + std::string(v) + "'");
    }
    return out;
}

inline bool config_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("expected a boolean, got '" + std::string(v) + "'");
}

inline SigmoidKnots config_knots(std::string_view v) {
    std::array<double, 4> k{};
    std::size_t n = 0;
    while (true) {
        const auto comma = v.find(',');
        if (n == 4) throw ConfigError("knot lists take exactly 4 values");
        k[n++] = config_double(trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (n != 4) throw ConfigError("knot lists take exactly 4 values");
    return {k[0], k[1], k[2], k[3]};
}

// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string knots_text(const SigmoidKnots& k) {
    return shortest(k.at_zero) + ", " + shortest(k.at_half) + ", " + shortest(k.at_scale) + ", " +
           shortest(k.at_infinity);
}

struct ConfigKey {
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;  // empty for keys parameter_text never writes
};

template <class T>
ConfigKey double_key(T RunConfig::*field) {
    return {[field](RunConfig& c, std::string_view v) { c.*field = config_double(v); },
            [field](const RunConfig& c) { return shortest(c.*field); }};
}

template <class T>
ConfigKey raw_double_key(T RawParameters::*field) {
    return {[field](RunConfig& c, std::string_view v) { c.raw.*field = config_double(v); },
            [field](const RunConfig& c) { return shortest(c.raw.*field); }};
}

template <class Int>
ConfigKey int_key(Int RunConfig::*field) {
    return {[field](RunConfig& c, std::string_view v) { c.*field = config_int<Int>(v); },
            [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

inline ConfigKey knots_key(SigmoidKnots RawParameters::*field) {
    return {[field](RunConfig& c, std::string_view v) { c.raw.*field = config_knots(v); },
            [field](const RunConfig& c) { return knots_text(c.raw.*field); }};
}

inline ConfigKey optional_key(std::optional<double> RunConfig::*field) {
    return {[field](RunConfig& c, std::string_view v) { c.*field = config_double(v); }, {}};
}

inline const std::map<std::string, ConfigKey, std::less<>>& config_keys() {
    static const std::map<std::string, ConfigKey, std::less<>> keys = [] {
        std::map<std::string, ConfigKey, std::less<>> k;
        k["preset"] = {[](RunConfig&, std::string_view) {}, [](const RunConfig& c) { return c.preset; }};
        k["a_min"] = raw_double_key(&RawParameters::a_min);
        k["a_max"] = raw_double_key(&RawParameters::a_max);
        k["d"] = raw_double_key(&RawParameters::d);
        k["r"] = raw_double_key(&RawParameters::r);
        k["c1_hours"] = raw_double_key(&RawParameters::c1_hours);
        k["c2_hours"] = raw_double_key(&RawParameters::c2_hours);
        k["lambda_p_days"] = raw_double_key(&RawParameters::lambda_p_days);
        k["lambda_m_days"] = raw_double_key(&RawParameters::lambda_m_days);
        k["tau_c_hours"] = raw_double_key(&RawParameters::tau_c_hours);
        k["f_alpha_knots"] = knots_key(&RawParameters::f_alpha);
        k["f_omega_knots"] = knots_key(&RawParameters::f_omega);
        k["n_tilde_a"] = raw_double_key(&RawParameters::n_tilde_a);
        k["n_tilde_omega"] = raw_double_key(&RawParameters::n_tilde_omega);
        k["r_inh"] = raw_double_key(&RawParameters::r_inh);
        k["r_deg"] = raw_double_key(&RawParameters::r_deg);
        k["b_per_day"] = raw_double_key(&RawParameters::b_per_day);
        k["kappa"] = raw_double_key(&RawParameters::kappa);
        k["alpha_midpoint"] = double_key(&RunConfig::alpha_midpoint);
        k["rho_d"] = optional_key(&RunConfig::rho_d);
        k["b"] = optional_key(&RunConfig::b);
        k["initial_a_star"] = double_key(&RunConfig::initial_a_star);
        k["seed"] = int_key(&RunConfig::seed);
        k["horizon_days"] = double_key(&RunConfig::horizon_days);
        k["imatinib"] = {[](RunConfig& c, std::string_view v) { c.imatinib = config_bool(v); },
                         [](const RunConfig& c) { return std::string(c.imatinib ? "true" : "false"); }};
        k["cadence_hours"] = int_key(&RunConfig::cadence_hours);
        k["layout"] = {[](RunConfig& c, std::string_view v) {
                           if (v == "synthesis-first") {
                               c.layout = CycleLayout::SynthesisFirst;
                           } else if (v == "g1-last") {
                               c.layout = CycleLayout::G1Last;
                           } else {
                               throw ConfigError("layout must be synthesis-first or g1-last");
                           }
                       },
                       [](const RunConfig& c) {
                           return std::string(c.layout == CycleLayout::SynthesisFirst ? "synthesis-first"
                                                                                       : "g1-last");
                       }};
        k["max_stem_cells"] = int_key(&RunConfig::max_stem_cells);
        k["nx"] = int_key(&RunConfig::nx);
        k["hour_subdivisions"] = int_key(&RunConfig::hour_subdivisions);
        k["courant"] = double_key(&RunConfig::courant);
        k["record_every_days"] = double_key(&RunConfig::record_every_days);
        k["steps_per_delay"] = int_key(&RunConfig::steps_per_delay);
        k["re_min"] = double_key(&RunConfig::re_min);
        k["re_max"] = double_key(&RunConfig::re_max);
        k["im_min"] = double_key(&RunConfig::im_min);
        k["im_max"] = double_key(&RunConfig::im_max);
        k["n_re"] = int_key(&RunConfig::n_re);
        k["n_im"] = int_key(&RunConfig::n_im);
        return k;
    }();
    return keys;
}

// Splits "key = value"; returns nothing for blank or comment lines.
inline std::optional<std::pair<std::string_view, std::string_view>> split_setting(std::string_view line,
                                                                                  const std::string& where) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return std::nullopt;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + ": expected 'key = value'");
    return std::pair{key, value};
}

inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value, const std::string& where) {
    const auto& keys = config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    try {
        it->second.set(c, value);
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + std::string(key) + ": " + e.what());
    }
}

inline void select_preset(RunConfig& c, std::string_view name, const std::string& where) {
    const auto raw = preset(name);
    if (!raw) throw ConfigError(where + ": unknown preset '" + std::string(name) + "'");
    c.preset = std::string(name);
    c.raw = *raw;
}

}  // namespace detail

// Parses a parameter file's text on top of `base`.
inline RunConfig parse_config(std::string_view text, const std::string& source = "config",
                              RunConfig base = {}) {
    std::vector<std::tuple<std::string_view, std::string_view, std::string>> settings;
    std::vector<std::string_view> seen;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        const auto kv = detail::split_setting(line, where);
        if (!kv) continue;
        if (std::find(seen.begin(), seen.end(), kv->first) != seen.end()) {
            throw ConfigError(where + ": repeated key '" + std::string(kv->first) + "'");
        }
        seen.push_back(kv->first);
        settings.emplace_back(kv->first, kv->second, where);
    }
    for (const auto& [key, value, where] : settings) {
        if (key == "preset") detail::select_preset(base, value, where);
    }
    for (const auto& [key, value, where] : settings) {
        if (key != "preset") detail::apply_setting(base, key, value, where);
    }
    return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string() + " for reading");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path.string(), std::move(base));
}

// Applies one "key=value" override (after the file and preset).
inline void apply_override(RunConfig& c, std::string_view assignment) {
    const std::string where = "override '" + std::string(assignment) + "'";
    const auto kv = detail::split_setting(assignment, where);
    if (!kv) throw ConfigError(where + ": expected key=value");
    if (kv->first == "preset") {
        throw ConfigError(where + ": select presets with --preset");
    }
    detail::apply_setting(c, kv->first, kv->second, where);
}

// Resolves preset name or file path: names from the built-in list, anything
// else is read as a file.
inline RunConfig resolve_parameters(std::string_view preset_or_path) {
    RunConfig c;
    if (preset(preset_or_path)) {
        detail::select_preset(c, preset_or_path, "preset");
        return c;
    }
    return load_config(std::filesystem::path(std::string(preset_or_path)));
}

// Parameter-file text for the model parameters (not run settings).
inline std::string parameter_text(const RunConfig& c) {
    static const std::vector<std::string> order{
        "a_min",     "a_max",        "d",           "r",       "c1_hours", "c2_hours",  "lambda_p_days",
        "lambda_m_days", "tau_c_hours", "f_alpha_knots", "f_omega_knots", "n_tilde_a", "n_tilde_omega",
        "r_inh",     "r_deg",        "b_per_day",   "kappa"};
    std::string out;
    const auto& keys = detail::config_keys();
    for (const auto& k : order) out += k + " = " + keys.at(k).get(c) + "\n";
    return out;
}

}  // namespace stemflow
