#include "hydroneuro/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "hydroneuro/auxcouple.hpp"
#include "hydroneuro/config.hpp"
#include "hydroneuro/io.hpp"
#include "hydroneuro/limit.hpp"
#include "hydroneuro/metrics.hpp"
#include "hydroneuro/microsim.hpp"
#include "hydroneuro/parallel.hpp"
#include "hydroneuro/rng.hpp"

#ifndef HYDRONEURO_VERSION
#define HYDRONEURO_VERSION "0.0.0-unknown"
#endif

namespace hydroneuro {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string version_string() { return HYDRONEURO_VERSION; }

namespace {

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

struct PartitionFlags {
    std::optional<double> delta, ell, ebin, tau;
};

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    json outputs = json::array();
};

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json base_summary() { return json{{"schema_version", schema_version}}; }

std::vector<PartitionConfig> partition_cells(const Context& ctx, const PartitionFlags& f) {
    auto cells = ctx.cfg.cells();
    if (f.delta || f.ell || f.ebin || f.tau) {
        PartitionConfig c = cells.front();
        if (f.delta) c.delta = *f.delta;
        if (f.ell) c.ell = *f.ell;
        if (f.ebin) c.ebin = *f.ebin;
        if (f.tau) c.tau = *f.tau;
        cells = {c};
    }
    return cells;
}

fs::path cell_dir(const Context& ctx, std::size_t k, std::size_t count) {
    return count == 1 ? ctx.out : ctx.out / ("cell_" + std::to_string(k));
}

json cell_json(const PartitionConfig& c) {
    return json{{"delta", c.delta}, {"ell", c.ell}, {"ebin", c.ebin}, {"tau", c.tau}};
}

// ------------------------------------------------------------- simulate

void cmd_simulate(Context& ctx, std::optional<double> horizon, const std::string& snapshots) {
    const auto& cfg = ctx.cfg;
    const double T = horizon.value_or(cfg.run.horizon);
    std::vector<double> snaps = snapshots.empty() ? cfg.run.snapshot_times : parse_list(snapshots);
    const ModelSpec spec = build_model(cfg.model);
    const NetworkDynamics dyn(spec);
    NetworkState s0 = sample_initial_state(spec, derive_seed(ctx.seed, StreamTag::initial, 0));
    SimulationOptions so;
    so.substep = cfg.run.substep;
    so.observe_times = snaps;
    so.observer = [&](const NetworkState& s) {
        const std::string name = "snapshot_" + format_double(s.clock) + ".csv";
        CsvWriter w(ctx.out / name, {"site_x", "site_y", "potential"});
        for (std::size_t i = 0; i < s.potentials.size(); ++i)
            w.row({spec.mesh.site(i).x, spec.mesh.site(i).y, s.potentials[i]});
        w.commit();
        ctx.outputs.push_back(name);
    };
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = simulate(dyn, std::move(s0), T, derive_seed(ctx.seed, StreamTag::dynamics, 0), so);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    CsvWriter ev(ctx.out / "events.csv", {"time", "site", "pre_potential"});
    for (const auto& e : res.state.event_log) ev.row({e.time, static_cast<double>(e.site), e.pre_potential});
    ev.commit();
    ctx.outputs.push_back("events.csv");
    json s = base_summary();
    s["spike_count"] = res.state.event_log.size();
    s["max_potential"] = res.sup_potential;
    s["initial_max_potential"] = res.initial_sup;
    s["proposals"] = res.proposals;
    s["horizon"] = T;
    s["wall_seconds"] = wall;
    write_json(ctx.out / "summary.json", s);
    ctx.outputs.push_back("summary.json");
}

// ------------------------------------------------------------------ aux

void cmd_aux(Context& ctx, const PartitionFlags& flags, std::optional<double> horizon) {
    const auto& cfg = ctx.cfg;
    const double T = horizon.value_or(cfg.run.horizon);
    const ModelSpec spec = build_model(cfg.model);
    const auto cells = partition_cells(ctx, flags);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const fs::path dir = cell_dir(ctx, k, cells.size());
        const PartitionSpec part(cells[k], spec.psi0.support_bound(), spec.mesh);
        const SquareCoupling sc = square_coupling(spec, cells[k].ell);
        const NetworkState u0 = sample_initial_state(spec, derive_seed(ctx.seed, StreamTag::initial, 0));
        AuxState y = bin_initial(u0.potentials, part, sc);
        LevelLedger led = ledger_init(spec, part, sc);
        const auto steps = static_cast<std::size_t>(std::llround(T / cells[k].delta));
        CsvWriter w(dir / "aux.csv", {"n", "spikes", "level_gap", "mass_gap", "ledger_mass_drift"});
        double worst_level = 0.0, worst_mass = 0.0, drift = 0.0;
        std::vector<double> mass0;
        for (const auto& sq : led.squares) mass0.push_back(sq.total_mass());
        for (std::size_t n = 0; n <= steps; ++n) {
            std::size_t spikes = 0;
            if (n > 0) {
                spikes = aux_step(y, part, sc, spec, derive_seed(ctx.seed, StreamTag::auxiliary, n - 1)).spikes;
                led = ledger_step(led, spec, part, sc);
            }
            const auto cmp = ledger_vs_aux(led, y, part, spec.mesh.epsilon());
            double d = 0.0;
            for (std::size_t m = 0; m < led.squares.size(); ++m)
                d = std::max(d, std::abs(led.squares[m].total_mass() - mass0[m]));
            worst_level = std::max(worst_level, cmp.level_gap);
            worst_mass = std::max(worst_mass, cmp.mass_gap);
            drift = std::max(drift, d);
            w.row({static_cast<double>(n), static_cast<double>(spikes), cmp.level_gap, cmp.mass_gap, d});
        }
        w.commit();
        json s = base_summary();
        s["partition"] = cell_json(cells[k]);
        s["steps"] = steps;
        s["max_level_gap"] = worst_level;
        s["max_mass_gap"] = worst_mass;
        s["max_ledger_mass_drift"] = drift;
        write_json(dir / "aux_summary.json", s);
        ctx.outputs.push_back(fs::relative(dir / "aux.csv", ctx.out).string());
        ctx.outputs.push_back(fs::relative(dir / "aux_summary.json", ctx.out).string());
    }
}

// --------------------------------------------------------------- couple

void cmd_couple(Context& ctx, const PartitionFlags& flags, std::optional<double> horizon) {
    const auto& cfg = ctx.cfg;
    const double T = horizon.value_or(cfg.run.horizon);
    const ModelSpec spec = build_model(cfg.model);
    const NetworkDynamics dyn(spec);
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    const auto cells = partition_cells(ctx, flags);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const fs::path dir = cell_dir(ctx, k, cells.size());
        const PartitionSpec part(cells[k], spec.psi0.support_bound(), spec.mesh);
        const SquareCoupling sc = square_coupling(spec, cells[k].ell);
        const auto run = run_coupling(dyn, part, sc, T, ctx.seed, cfg.run.substep);
        CsvWriter w(dir / "coupling.csv", {"n", "theta_n", "bad_fraction"});
        for (std::size_t n = 0; n < run.ledger.theta_history.size(); ++n)
            w.row({static_cast<double>(n), run.ledger.theta_history[n],
                   eps2 * static_cast<double>(run.ledger.bad_history[n])});
        w.commit();
        json s = base_summary();
        s["partition"] = cell_json(cells[k]);
        s["theta_max"] = run.theta_max;
        s["bad_fraction_max"] = run.bad_fraction_max;
        s["guard_violations"] = run.guard_violations;
        s["final_good"] = run.ledger.good_history.back();
        write_json(dir / "coupling_summary.json", s);
        ctx.outputs.push_back(fs::relative(dir / "coupling.csv", ctx.out).string());
        ctx.outputs.push_back(fs::relative(dir / "coupling_summary.json", ctx.out).string());
    }
}

// ------------------------------------------------------------------ pde

std::vector<double> dyadic_times(double T, std::size_t q) {
    std::vector<double> t;
    const std::size_t n = std::size_t{1} << q;
    for (std::size_t k = 0; k <= n; ++k) t.push_back(T * static_cast<double>(k) / static_cast<double>(n));
    return t;
}

void cmd_pde(Context& ctx, std::optional<double> horizon, std::optional<std::size_t> levels,
             std::optional<std::size_t> ugrid) {
    auto& cfg = ctx.cfg;
    const double T = horizon.value_or(cfg.run.horizon);
    ModelConfig mc = cfg.model;
    mc.epsilon = cfg.pde.ell;
    const ModelSpec spec = build_model(mc);
    const SquareCoupling sc = square_coupling(spec, cfg.pde.ell);
    SchemeOptions opt;
    opt.ugrid = ugrid.value_or(cfg.pde.ugrid);
    opt.birth_nodes = cfg.pde.birth_nodes;
    std::vector<double> deltas;
    for (std::size_t k = 0; k < levels.value_or(cfg.pde.delta_levels); ++k)
        deltas.push_back(cfg.pde.delta / std::ldexp(1.0, static_cast<int>(k)));
    const auto times = dyadic_times(T, cfg.pde.dyadic_level);
    const auto sol = solve_pde(spec, sc, T, deltas, opt, times, true);
    const auto& fine = sol.levels.back();

    for (double t : times) {
        const std::string name = "rho_" + format_double(t) + ".csv";
        CsvWriter w(ctx.out / name, {"u", "r_x", "r_y", "rho"});
        const auto& f = fine.at(t);
        for (std::size_t m = 0; m < f.size(); ++m)
            for (std::size_t j = 0; j < f.profiles[m].u.size(); ++j)
                w.row({f.profiles[m].u[j], f.centers[m].x, f.centers[m].y, f.profiles[m].rho[j]});
        w.commit();
        ctx.outputs.push_back(name);
    }
    CsvWriter w(ctx.out / "scalars.csv", {"t", "r_x", "r_y", "ubar", "p", "q", "ustar"});
    for (std::size_t n = 0; n < fine.times.size(); ++n)
        for (std::size_t m = 0; m < sc.size(); ++m)
            w.row({fine.times[n], sc.centers[m].x, sc.centers[m].y, fine.ubar[n][m], fine.p[n][m], fine.q[n][m],
                   fine.ustar[n][m]});
    w.commit();
    ctx.outputs.push_back("scalars.csv");

    json s = base_summary();
    s["deltas"] = deltas;
    s["times"] = times;
    json mass = json::array(), boundary = json::array(), weak = json::array();
    const auto tests = weak_test_library();
    for (std::size_t j = 0; j < times.size(); ++j) {
        double md = 0.0, bd = 0.0;
        for (double x : fine.mass[fine.step_of(times[j])]) md = std::max(md, std::abs(x - 1.0));
        for (std::size_t m = 0; m < sc.size(); ++m) {
            const double law = sol.q[j][m] / (sc.lambda[m] * sol.ubar[j][m] + sol.p[j][m]);
            bd = std::max(bd, std::abs(sol.boundary[j][m] - law));
        }
        mass.push_back(md);
        boundary.push_back(bd);
        const std::size_t n = fine.step_of(times[j]);
        if (n == 0 || n + 1 >= fine.times.size()) continue;
        json row = json::array();
        for (const auto& test : tests) {
            double r = 0.0;
            for (std::size_t m = 0; m < sc.size(); ++m)
                r = std::max(r, std::abs(weak_residual(fine, n, test, spec, sc, m)));
            row.push_back(r);
        }
        weak.push_back(json{{"t", times[j]}, {"residuals", row}});
    }
    s["mass_defects"] = mass;
    s["boundary_defects"] = boundary;
    s["weak_residuals"] = weak;
    s["level_l1"] = sol.level_l1;
    s["convergent"] = sol.convergent;
    write_json(ctx.out / "pde_summary.json", s);
    ctx.outputs.push_back("pde_summary.json");
    if (!sol.convergent) std::cerr << "warning: delta sweep is not convergent (L1 gaps not decreasing)\n";
}

// ------------------------------------------------------------- converge

void cmd_converge(Context& ctx, const std::string& eps_flag, std::optional<std::size_t> replicas,
                  std::optional<double> horizon) {
    const auto& cfg = ctx.cfg;
    ConvergenceOptions opt;
    opt.epsilons = eps_flag.empty() ? cfg.run.epsilons : parse_list(eps_flag);
    if (opt.epsilons.empty()) opt.epsilons = {cfg.model.epsilon};
    opt.replicas = replicas.value_or(cfg.run.replicas);
    opt.horizon = horizon.value_or(cfg.run.horizon);
    opt.seed = ctx.seed;
    opt.dyadic_level = cfg.pde.dyadic_level;
    opt.ell = cfg.pde.ell;
    opt.deltas = {cfg.pde.delta / std::ldexp(1.0, static_cast<int>(cfg.pde.delta_levels) - 1)};
    opt.scheme.ugrid = cfg.pde.ugrid;
    opt.scheme.birth_nodes = cfg.pde.birth_nodes;
    opt.substep = cfg.run.substep;
    opt.threads = ctx.threads;
    const auto rep = convergence_study(cfg.model, opt);

    CsvWriter w(ctx.out / "convergence.csv", {"epsilon", "time", "replicas", "mean", "stderr", "skipped"});
    json cells = json::array();
    for (const auto& c : rep.cells) {
        w.row({c.epsilon, c.time, static_cast<double>(c.replicas), c.mean, c.stderr_, c.skipped ? 1.0 : 0.0});
        cells.push_back(json{{"epsilon", c.epsilon}, {"time", c.time}, {"replicas", c.replicas}, {"mean", c.mean},
                             {"stderr", c.stderr_}, {"skipped", c.skipped}, {"note", c.note}});
    }
    w.commit();
    json s = base_summary();
    s["seed"] = rep.seed;
    s["times"] = rep.times;
    s["cells"] = cells;
    json slopes = json::array();
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
        json e{{"time", rep.times[j]}};
        if (rep.slope[j]) e["slope"] = *rep.slope[j];
        slopes.push_back(e);
    }
    s["slopes"] = slopes;
    s["wall_seconds"] = rep.wall_seconds;
    write_json(ctx.out / "report.json", s);
    ctx.outputs.push_back("convergence.csv");
    ctx.outputs.push_back("report.json");
}

// ---------------------------------------------------------------- audit

int cmd_audit(Context& ctx, std::optional<std::size_t> replicas, std::optional<double> horizon) {
    const auto& cfg = ctx.cfg;
    const double T = horizon.value_or(cfg.run.horizon);
    const std::size_t R = replicas.value_or(cfg.run.replicas);
    const ModelSpec spec = build_model(cfg.model);
    const NetworkDynamics dyn(spec);
    const double window = cfg.partition.delta.front();
    auto run = [&](std::size_t k) {
        SimulationOptions so;
        so.substep = cfg.run.substep;
        so.window = window;
        auto res = simulate(dyn, sample_initial_state(spec, derive_seed(ctx.seed, StreamTag::initial, k)), T,
                            derive_seed(ctx.seed, StreamTag::dynamics, k), so);
        return res;
    };
    const auto runs = parallel_map(R, run, ctx.threads);
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    CsvWriter w(ctx.out / "audit.csv", {"replica", "spikes", "initial_sup", "sup_potential", "path_bound"});
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const auto N = static_cast<double>(runs[k].state.event_log.size());
        w.row({static_cast<double>(k), N, runs[k].initial_sup, runs[k].sup_potential,
               runs[k].initial_sup + spec.a_star() * eps2 * N});
    }
    w.commit();
    ctx.outputs.push_back("audit.csv");
    const auto rep = bound_audit(runs, spec, T, window);
    json s = base_summary();
    s["replicas"] = rep.replicas;
    s["path_bound_holds"] = rep.path_bound_holds;
    s["total_over_fraction"] = rep.total_over_fraction;
    s["window"] = window;
    s["window_over_fraction"] = rep.window_over_fraction;
    s["max_window_ratio"] = rep.max_window_ratio;
    write_json(ctx.out / "audit_summary.json", s);
    ctx.outputs.push_back("audit_summary.json");
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Spatial spiking-network simulator, auxiliary coupling and hydrodynamic-limit solver"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1, 1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "INI configuration file")->required();
    app.add_option("--out", g.out, "output directory (default: [output] directory)");
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "root RNG seed (default: [run] seed)");
    app.add_option("--threads", g.threads, "worker threads (default: HYDRONEURO_THREADS or hardware)");

    std::optional<double> horizon;
    auto add_horizon = [&](CLI::App* s) { s->add_option("--horizon", horizon, "time horizon T"); };

    auto* sim = app.add_subcommand("simulate", "event-driven microscopic simulation");
    std::string snapshot_times;
    add_horizon(sim);
    sim->add_option("--snapshot-times", snapshot_times, "comma-separated observation times");

    PartitionFlags pf;
    auto add_partition = [&](CLI::App* s) {
        s->add_option("--delta", pf.delta, "macro time step");
        s->add_option("--ell", pf.ell, "square side");
        s->add_option("--ebin", pf.ebin, "potential bin width");
        s->add_option("--tau", pf.tau, "micro time bin");
        add_horizon(s);
    };
    auto* aux = app.add_subcommand("aux", "auxiliary process against the deterministic level ledger");
    add_partition(aux);
    auto* cpl = app.add_subcommand("couple", "coupled true/auxiliary run with good and bad labels");
    add_partition(cpl);

    auto* pde = app.add_subcommand("pde", "delta-scheme and characteristic solution of the limit equation");
    std::optional<std::size_t> levels, ugrid;
    add_horizon(pde);
    pde->add_option("--delta-levels", levels, "number of dyadic refinements");
    pde->add_option("--ugrid", ugrid, "u-grid nodes for the initial density");

    auto* conv = app.add_subcommand("converge", "empirical measure against the limit field over an epsilon sweep");
    std::string eps_list;
    std::optional<std::size_t> replicas;
    conv->add_option("--epsilons", eps_list, "comma-separated mesh spacings");
    conv->add_option("--replicas", replicas, "replicas per epsilon");
    add_horizon(conv);

    auto* aud = app.add_subcommand("audit", "path and spike-count bounds over replicas");
    aud->add_option("--replicas", replicas, "number of replicas");
    add_horizon(aud);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }
    if (*seed_opt) g.seed = seed;

    const auto start = std::chrono::steady_clock::now();
    Context ctx;
    try {
        ctx.cfg = parse_config(g.config);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    ctx.out = g.out.empty() ? fs::path(ctx.cfg.output.directory) : fs::path(g.out);
    ctx.seed = g.seed.value_or(ctx.cfg.run.seed);
    ctx.threads = g.threads > 0 ? g.threads : default_threads();
    fs::create_directories(ctx.out);

    const std::string sub = app.get_subcommands().front()->get_name();
    int status = 0;
    try {
        if (sub == "simulate") cmd_simulate(ctx, horizon, snapshot_times);
        else if (sub == "aux") cmd_aux(ctx, pf, horizon);
        else if (sub == "couple") cmd_couple(ctx, pf, horizon);
        else if (sub == "pde") cmd_pde(ctx, horizon, levels, ugrid);
        else if (sub == "converge") cmd_converge(ctx, eps_list, replicas, horizon);
        else if (sub == "audit") status = cmd_audit(ctx, replicas, horizon);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        status = 1;
    }

    write_text(ctx.out / "config.resolved.ini", echo_config(ctx.cfg));
    json manifest = base_summary();
    manifest["version"] = version_string();
    manifest["subcommand"] = sub;
    manifest["seed"] = ctx.seed;
    manifest["threads"] = ctx.threads;
    std::vector<std::string> args(argv, argv + argc);
    manifest["arguments"] = args;
    manifest["config"] = echo_config(ctx.cfg);
    manifest["outputs"] = ctx.outputs;
    manifest["status"] = status;
    manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(ctx.out / "run_manifest.json", manifest);
    return status;
}

}  // namespace hydroneuro
