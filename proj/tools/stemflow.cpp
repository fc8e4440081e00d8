// Command-line front end. Exit codes: 0 success, 1 model or numerical error,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stemflow/abm.hpp"
#include "stemflow/config.hpp"
#include "stemflow/csv.hpp"
#include "stemflow/dde.hpp"
#include "stemflow/error.hpp"
#include "stemflow/parallel.hpp"
#include "stemflow/runs.hpp"
#include "stemflow/scan.hpp"
#include "stemflow/spectral.hpp"
#include "stemflow/steady.hpp"

namespace fs = std::filesystem;
using namespace stemflow;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options shared by every subcommand that needs parameters.
struct ParameterOptions {
    std::string preset = "ph-minus";
    std::vector<std::string> overrides;
    std::optional<double> d;
    std::optional<double> rho_d;
    std::optional<double> b;

    void attach(CLI::App* app) {
        app->add_option("--preset", preset, "Preset name (ph-minus, ph-plus, imatinib-affected) or parameter file");
        app->add_option("--set", overrides, "Override one setting, key=value (repeatable)");
        app->add_option("--d", d, "Differentiation factor per hour");
        app->add_option("--rho-d", rho_d, "Rescaled differentiation speed per day (overrides --d)");
        app->add_option("--b", b, "Omega growth rate per day");
    }

    [[nodiscard]] RunConfig resolve() const {
        RunConfig c = resolve_parameters(preset);
        for (const auto& o : overrides) apply_override(c, o);
        if (d) c.raw.d = *d;
        if (rho_d) c.rho_d = *rho_d;
        if (b) c.b = *b;
        return c;
    }
};

// "-" or empty writes to stdout.
void write_table(const Table& t, const std::string& out) {
    if (out.empty() || out == "-") {
        write_csv(std::cout, t);
    } else {
        emit_csv(t, out);
    }
}

void write_text(const std::string& text, const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

Variant reduced_from_int(int v) {
    if (v == 3) return Variant::Approx3;
    if (v == 4) return Variant::Approx4;
    throw UsageError("--variant must be 3 or 4");
}

RootSearchBox search_box(const RunConfig& c) {
    RootSearchBox box;
    box.re_min = c.re_min;
    box.re_max = c.re_max;
    box.im_min = c.im_min;
    box.im_max = c.im_max;
    box.n_re = c.n_re;
    box.n_im = c.n_im;
    return box;
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------

int run_simulate(const ParameterOptions& po, const std::string& model_text, double days,
                 std::optional<std::uint64_t> seed, const std::string& out) {
    RunConfig c = po.resolve();
    c.horizon_days = days;
    if (seed) c.seed = *seed;
    const Model m = parse_model(model_text);
    TotalsTrace totals;
    if (m == Model::Abm) {
        const PopulationTrace trace = simulate_abm(c.abm());
        write_table(population_table(trace), out);
        totals = abm_totals(trace);
    } else {
        totals = simulate_totals(m, c);
        write_table(totals_table(totals), out);
    }
    if (days >= 60.0) std::cerr << "regime: " << trace_regime_name(classify_trace(totals)) << "\n";
    return 0;
}

int run_steady(const ParameterOptions& po, int variant, const std::string& format) {
    const RunConfig c = po.resolve();
    const RescaledParameters p = c.rescaled();
    const Variant v = reduced_from_int(variant);
    const bool exists = v == Variant::Approx4 ? exists_nonzero_approx4(p) : exists_nonzero_approx3(p);
    Table t;
    t.columns = {"variant", "exists", "A_tilde", "Omega_bar", "Omega0", "b_star", "residual"};
    const double bs = b_star(p.b, p.rho_d);
    if (exists) {
        const SteadyState s = solve_steady(p, v);
        t.add_row({std::string(variant_name(v)), std::int64_t{1}, s.a_tilde, s.omega_bar, s.omega0, bs,
                   steady_residual(s, p)});
    } else {
        const double nan = std::nan("");
        t.add_row({std::string(variant_name(v)), std::int64_t{0}, nan, nan, nan, bs, nan});
    }
    if (format == "csv") {
        write_csv(std::cout, t);
        return 0;
    }
    std::cout << "system      " << variant_name(v) << "\n"
              << "rho_d       " << fmt(p.rho_d) << " per day\n"
              << "b           " << fmt(p.b) << " per day\n"
              << "b*          " << fmt(bs) << " per day\n"
              << "exists      " << (exists ? "yes" : "no") << "\n";
    if (exists) {
        const auto& row = t.rows.front();
        std::cout << "A~          " << fmt(std::get<double>(row[2])) << "\n"
                  << "Omega_bar   " << fmt(std::get<double>(row[3])) << "\n"
                  << "Omega~(0)   " << fmt(std::get<double>(row[4])) << "\n"
                  << "residual    " << fmt(std::get<double>(row[6])) << "\n";
    }
    return 0;
}

int run_eigen(const ParameterOptions& po, int variant, const std::string& state, const std::string& profile) {
    const RunConfig c = po.resolve();
    const RescaledParameters p = c.rescaled();
    const Variant v = reduced_from_int(variant);
    FrozenRates rates;
    if (state == "zero") {
        rates = zero_state_rates(p, v);
    } else if (state == "steady") {
        const SteadyState s = solve_steady(p, v);
        rates = v == Variant::Approx4 ? frozen_rates_approx4(p, s.a_tilde, s.omega_bar)
                                      : frozen_rates_approx3(p, s.a_tilde, s.omega_bar);
    } else {
        throw UsageError("--state must be zero or steady");
    }
    const EigenSolution e = real_eigenvalue(rates);
    std::cout << "lambda      " << fmt(e.lambda()) << " per day\n"
              << "A           " << fmt(e.a()) << "\n"
              << "Psi         " << fmt(e.psi()) << "\n"
              << "phi(0)      " << fmt(e.phi0()) << "\n"
              << "phi(1)      " << fmt(e.phi_at(1.0)) << "\n"
              << "int Omega   " << fmt(e.normalisation()) << "\n"
              << "G - L       " << fmt(e.dispersion_residual()) << "\n";
    if (!profile.empty()) {
        Table t;
        t.columns = {"x", "Omega", "phi"};
        for (double x : linspace(0.0, 1.0, 201)) t.add_row({x, e.omega_at(x), e.phi_at(x)});
        emit_csv(t, profile);
    }
    return 0;
}

int run_char_roots(const ParameterOptions& po, const std::string& out) {
    const RunConfig c = po.resolve();
    const RescaledParameters p = c.rescaled();
    const CharacteristicEquation eq(solve_steady_approx4(p), p);
    const auto roots = rightmost_roots(eq, search_box(c));
    if (roots.empty()) throw NumericalFailure("no characteristic root converged in the search box");
    Table t;
    t.columns = {"re", "im", "residual", "multiplicity_hint"};
    for (const auto& r : roots) {
        t.add_row({r.lambda.real(), r.lambda.imag(), r.residual, static_cast<std::int64_t>(r.multiplicity_hint)});
    }
    write_table(t, out);
    return 0;
}

int run_zero_stability(const ParameterOptions& po, int variant) {
    const RunConfig c = po.resolve();
    const RescaledParameters p = c.rescaled();
    const Variant v = reduced_from_int(variant);
    const FrozenRates r = zero_state_rates(p, v);
    std::cout << "verdict     " << zero_stability_name(zero_state_condition(p, v)) << "\n"
              << "integral    " << fmt(zero_state_integral(r)) << "\n"
              << "rho_d       " << fmt(p.rho_d) << "\n";
    return 0;
}

int run_dde(const ParameterOptions& po, double days, const std::string& history, const std::string& out) {
    const RunConfig c = po.resolve();
    const RescaledParameters p = c.rescaled();
    DelayOptions o;
    o.steps_per_delay = c.steps_per_delay;
    const double tau = 1.0 / p.rho_d;
    DelayHistory h;
    if (history == "constant") {
        h = constant_history(p, o, c.initial_a_star, 0.0, tau);
    } else if (history == "pde") {
        // First delay window of the Approx4 run from A* = initial_a_star, on the
        // grid whose time step is tau / N.
        const ReducedSolver solver(Variant::Approx4, p, uniform_grid(p, static_cast<std::size_t>(o.steps_per_delay)));
        ReducedState s = solver.initial(c.initial_a_star);
        std::vector<double> a{s.a_star}, w{solver.totals(s).omega_bar};
        for (int k = 0; k < o.steps_per_delay; ++k) {
            solver.step(s);
            a.push_back(s.a_star);
            w.push_back(solver.totals(s).omega_bar);
        }
        h = history_from_samples(p, o, tau, std::move(a), std::move(w));
    } else {
        throw UsageError("--history must be constant or pde");
    }
    if (!(days > tau)) throw UsageError("--days must exceed one delay (" + fmt(tau) + " days)");
    const DelayTrace trace = integrate_dde(p, h, days - tau, o);
    Table t;
    t.columns = {"t", "Omega_bar", "A_star", "C", "transient"};
    for (const auto& smp : trace) {
        t.add_row({smp.t, smp.omega_bar, smp.a_star, smp.c, static_cast<std::int64_t>(smp.transient ? 1 : 0)});
    }
    write_table(t, out);
    return 0;
}

struct MapWindow {
    double rho_min = 0.04, rho_max = 0.75, b_min = 0.2, b_max = 1.5;
    std::size_t n_rho = 40, n_b = 40;
};

RegionMap compute_map(const RunConfig& c, const MapWindow& w) {
    return region_map(c.rescaled(), linspace(w.rho_min, w.rho_max, w.n_rho), linspace(w.b_min, w.b_max, w.n_b),
                      search_box(c));
}

void write_map(const RegionMap& m, const std::string& csv, const std::string& svg) {
    write_table(region_table(m), csv);
    if (!svg.empty()) {
        std::ostringstream os;
        write_region_svg(os, m);
        write_text(os.str(), svg);
    }
}

int run_stability_map(const ParameterOptions& po, const MapWindow& w, const std::string& out,
                      const std::string& svg) {
    const RunConfig c = po.resolve();
    write_map(compute_map(c, w), out, svg);
    return 0;
}

SweepParameter parse_sweep(const std::string& s) {
    if (s == "rho_d" || s == "rho-d") return SweepParameter::RhoD;
    if (s == "b") return SweepParameter::B;
    throw UsageError("--parameter must be rho_d or b");
}

RootTrajectory compute_trajectory(const RunConfig& c, SweepParameter s, double from, double to, std::size_t points,
                                  double fixed) {
    TrajectoryOptions opt;
    opt.box = search_box(c);
    RootTrajectory tr = root_trajectory(c.rescaled(), s, linspace(from, to, points), fixed, opt);
    if (!tr.error.empty()) std::cerr << "warning: " << tr.error << "\n";
    return tr;
}

int run_root_trajectory(const ParameterOptions& po, const std::string& param, double from, double to,
                        std::size_t points, double fixed, const std::string& out, const std::string& crossings) {
    const RunConfig c = po.resolve();
    const RootTrajectory tr = compute_trajectory(c, parse_sweep(param), from, to, points, fixed);
    write_table(trajectory_table(tr), out);
    if (!crossings.empty()) emit_csv(crossing_table(tr), crossings);
    for (const auto& x : tr.crossings) {
        std::cerr << "crossing at " << sweep_parameter_name(tr.parameter) << " = " << fmt(x.value) << ", root "
                  << fmt(x.root.real()) << " + " << fmt(x.root.imag()) << "i, "
                  << (x.direction > 0 ? "stable -> unstable" : "unstable -> stable") << "\n";
    }
    return tr.error.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Figure reproduction

// Time courses for d in {1.02, 1.05, 1.2}: the agent model over `seeds` seeds
// plus the listed continuum models, one overlay file per d and a regime table.
void reproduce_time_courses(const RunConfig& base, const std::vector<Model>& models, int seeds, const fs::path& dir,
                            const std::string& stem) {
    const std::vector<double> ds{1.02, 1.05, 1.2};
    struct Job {
        double d;
        Model model;
        std::uint64_t seed;
        TotalsTrace trace;
    };
    std::vector<Job> jobs;
    for (double d : ds) {
        for (int s = 1; s <= seeds; ++s) jobs.push_back({d, Model::Abm, static_cast<std::uint64_t>(s), {}});
        for (Model m : models) jobs.push_back({d, m, 0, {}});
    }
    parallel_for(jobs.size(), [&](std::size_t k) {
        RunConfig c = base;
        c.raw.d = jobs[k].d;
        c.seed = jobs[k].seed;
        jobs[k].trace = simulate_totals(jobs[k].model, c);
    });
    Table regimes;
    regimes.columns = {"d", "model", "seed", "regime"};
    for (double d : ds) {
        std::vector<std::pair<std::string, TotalsTrace>> overlay;
        for (const auto& j : jobs) {
            if (j.d != d) continue;
            std::string name = model_name(j.model);
            if (j.model == Model::Abm) name += "_seed" + std::to_string(j.seed);
            overlay.emplace_back(name, j.trace);
            const std::string regime = trace_regime_name(classify_trace(j.trace));
            regimes.add_row({d, std::string(model_name(j.model)), static_cast<std::int64_t>(j.seed), regime});
            std::cout << stem << "  d = " << d << "  " << name << ": " << regime << "\n";
        }
        char tag[32];
        std::snprintf(tag, sizeof tag, "_d%.2f.csv", d);
        emit_csv(overlay_table(overlay), dir / (stem + tag));
    }
    emit_csv(regimes, dir / (stem + "_regimes.csv"));
}

int run_reproduce(const ParameterOptions& po, int figure, const std::string& out_dir, int seeds) {
    const RunConfig c = po.resolve();
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    if (seeds < 1) throw UsageError("--seeds must be >= 1");
    switch (figure) {
        case 2: reproduce_time_courses(c, {Model::Approx0}, seeds, dir, "fig2"); break;
        case 3: reproduce_time_courses(c, {Model::Approx1}, seeds, dir, "fig3"); break;
        case 4: reproduce_time_courses(c, {Model::Approx2}, seeds, dir, "fig4"); break;
        case 5: reproduce_time_courses(c, {Model::Approx3, Model::Approx4}, seeds, dir, "fig5"); break;
        case 6: {
            const RegionMap m = compute_map(c, MapWindow{});
            write_map(m, (dir / "fig6_regions.csv").string(), (dir / "fig6_regions.svg").string());
            std::cout << "wrote " << (dir / "fig6_regions.csv").string() << " and fig6_regions.svg\n";
            break;
        }
        case 7: {
            const RootTrajectory a = compute_trajectory(c, SweepParameter::RhoD, 0.0422, 0.3505, 80, 0.42);
            const RootTrajectory b = compute_trajectory(c, SweepParameter::B, 0.2, 1.5, 80, 0.1884);
            emit_csv(trajectory_table(a), dir / "fig7a_rho_d.csv");
            emit_csv(crossing_table(a), dir / "fig7a_crossings.csv");
            emit_csv(trajectory_table(b), dir / "fig7b_b.csv");
            emit_csv(crossing_table(b), dir / "fig7b_crossings.csv");
            for (const auto* tr : {&a, &b}) {
                for (const auto& x : tr->crossings) {
                    std::cout << "fig7  crossing at " << sweep_parameter_name(tr->parameter) << " = " << fmt(x.value)
                              << ", Im lambda = " << fmt(x.root.imag()) << "\n";
                }
            }
            if (!a.error.empty() || !b.error.empty()) return 1;
            break;
        }
        default: throw UsageError("--figure must be one of 2, 3, 4, 5, 6, 7");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stem-cell population models: agent simulation, PDE hierarchy, stability analysis", "stemflow"};
    app.require_subcommand(1);

    ParameterOptions po;
    std::string out = "-";
    std::function<int()> action;

    auto* sim = app.add_subcommand("simulate", "Run one model and write its population trace as CSV");
    std::string model = "approx0";
    double days = 100.0;
    std::optional<std::uint64_t> seed;
    po.attach(sim);
    sim->add_option("--model", model, "abm, approx0, approx1, approx2, approx3 or approx4")->capture_default_str();
    sim->add_option("--variant", model, "Same as --model with 0..4");
    sim->add_option("--days", days, "Horizon in days")->capture_default_str();
    sim->add_option("--seed", seed, "Agent-model seed");
    sim->add_option("--out", out, "Output CSV ('-' for stdout)");
    sim->callback([&] { action = [&] { return run_simulate(po, model, days, seed, out); }; });

    auto* st = app.add_subcommand("steady", "Nonzero steady state of the Approximation 3 or 4 system");
    int variant = 4;
    std::string format = "text";
    po.attach(st);
    st->add_option("--variant", variant, "3 or 4")->capture_default_str();
    st->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
    st->callback([&] { action = [&] { return run_steady(po, variant, format); }; });

    auto* eig = app.add_subcommand("eigen", "Real eigenvalue and adjoint of the frozen-rate problem");
    int eig_variant = 3;
    std::string state = "zero";
    std::string profile;
    po.attach(eig);
    eig->add_option("--variant", eig_variant, "3 or 4")->capture_default_str();
    eig->add_option("--state", state, "Freeze rates at the zero or the steady state")->capture_default_str();
    eig->add_option("--profile", profile, "Write x, Omega(x), phi(x) to this CSV");
    eig->callback([&] { action = [&] { return run_eigen(po, eig_variant, state, profile); }; });

    auto* cr = app.add_subcommand("char-roots", "Roots of the characteristic equation at the Approximation 4 steady state");
    po.attach(cr);
    cr->add_option("--out", out, "Output CSV ('-' for stdout)");
    cr->callback([&] { action = [&] { return run_char_roots(po, out); }; });

    auto* zs = app.add_subcommand("zero-stability", "Attractivity of the zero steady state");
    int zs_variant = 3;
    po.attach(zs);
    zs->add_option("--variant", zs_variant, "3 or 4")->capture_default_str();
    zs->callback([&] { action = [&] { return run_zero_stability(po, zs_variant); }; });

    auto* dde = app.add_subcommand("dde", "Integrate the delay form of the Approximation 4 system");
    double dde_days = 100.0;
    std::string history = "constant";
    po.attach(dde);
    dde->add_option("--days", dde_days, "End time in days (the history covers the first delay)")->capture_default_str();
    dde->add_option("--history", history, "constant or pde")->capture_default_str();
    dde->add_option("--out", out, "Output CSV ('-' for stdout)");
    dde->callback([&] { action = [&] { return run_dde(po, dde_days, history, out); }; });

    auto* sm = app.add_subcommand("stability-map", "Regime map over (rho_d, b)");
    MapWindow window;
    std::string svg;
    po.attach(sm);
    sm->add_option("--rho-min", window.rho_min)->capture_default_str();
    sm->add_option("--rho-max", window.rho_max)->capture_default_str();
    sm->add_option("--b-min", window.b_min)->capture_default_str();
    sm->add_option("--b-max", window.b_max)->capture_default_str();
    sm->add_option("--n-rho", window.n_rho)->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--n-b", window.n_b)->capture_default_str()->check(CLI::PositiveNumber);
    sm->add_option("--out", out, "Output CSV ('-' for stdout)");
    sm->add_option("--svg", svg, "Also write an SVG heat map to this path");
    sm->callback([&] { action = [&] { return run_stability_map(po, window, out, svg); }; });

    auto* rt = app.add_subcommand("root-trajectory", "Rightmost characteristic root along a parameter sweep");
    std::string param = "rho_d";
    double from = 0.0422, to = 0.3505, fixed = 0.42;
    std::size_t points = 80;
    std::string crossings;
    po.attach(rt);
    rt->add_option("--parameter", param, "rho_d or b")->capture_default_str();
    rt->add_option("--from", from)->capture_default_str();
    rt->add_option("--to", to)->capture_default_str();
    rt->add_option("--points", points)->capture_default_str()->check(CLI::Range(2, 100000));
    rt->add_option("--fixed", fixed, "Value of the other parameter")->capture_default_str();
    rt->add_option("--out", out, "Output CSV ('-' for stdout)");
    rt->add_option("--crossings", crossings, "Write imaginary-axis crossings to this CSV");
    rt->callback([&] {
        action = [&] { return run_root_trajectory(po, param, from, to, points, fixed, out, crossings); };
    });

    auto* rep = app.add_subcommand("reproduce", "Regenerate the data behind one figure");
    int figure = 0;
    std::string out_dir = ".";
    int seeds = 3;
    po.attach(rep);
    rep->add_option("--figure", figure, "2, 3, 4, 5, 6 or 7")->required();
    rep->add_option("--out-dir", out_dir)->capture_default_str();
    rep->add_option("--seeds", seeds, "Agent-model seeds for the time-course figures")->capture_default_str();
    rep->callback([&] { action = [&] { return run_reproduce(po, figure, out_dir, seeds); }; });

    if (argc < 2) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        return action();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
