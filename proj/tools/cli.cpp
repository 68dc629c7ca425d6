#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cdyn/analysis.hpp"
#include "cdyn/errors.hpp"
#include "cdyn/integrator.hpp"
#include "cdyn/io.hpp"
#include "cdyn/scenario.hpp"

namespace cdyn::cli {

namespace fs = std::filesystem;

namespace {

struct Source {
    std::string scenario;
    std::string config;
    std::vector<std::string> overrides;
};

void add_source(CLI::App& cmd, Source& src) {
    cmd.add_option("--scenario", src.scenario, "Builtin scenario name or scenario file");
    cmd.add_option("--config", src.config, "Scenario file");
    cmd.add_option("--set", src.overrides, "Override, e.g. u.d=0 (repeatable)");
}

scenario::Scenario resolve(const Source& src) {
    if (src.scenario.empty() == src.config.empty()) throw ConfigError("give exactly one of --scenario or --config");
    auto sc = src.config.empty() ? scenario::resolve(src.scenario) : scenario::load(src.config);
    for (const auto& o : src.overrides) scenario::apply_override(sc, o);
    return sc;
}

fs::path output_root() {
    if (const char* env = std::getenv("CDYN_OUT"); env != nullptr && *env != '\0') return env;
    return "runs";
}

fs::path prepare_dir(const std::string& requested, const std::string& fallback) {
    const fs::path dir = requested.empty() ? output_root() / fallback : fs::path(requested);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + path.string());
}

template <class F>
void write_with(const fs::path& path, F&& body) {
    std::ostringstream os;
    body(os);
    write_file(path, os.str());
}

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
    std::ostringstream os;
    os << stem << '_' << std::setw(4) << std::setfill('0') << i << ext;
    return os.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void describe_metrics(std::ostream& os, const analysis::MetricSeries& m) {
    const auto engage = analysis::first_engagement(m);
    const auto contact = analysis::first_contact(m);
    auto when = [&](const std::optional<std::size_t>& k) {
        std::ostringstream t;
        if (k) t << m.records[*k].t;
        else t << "never";
        return t.str();
    };
    os << "first engagement: " << when(engage) << "\n";
    os << "first centroid contact: " << when(contact) << "\n";
    const auto p = analysis::precession(m);
    os << "precession: " << analysis::to_string(p.direction) << " (rotation " << p.rotation << " rad)\n";
    os << "forces pass: " << (analysis::forces_pass(m) ? "yes" : "no") << "\n";
}

// ---- run-pde -------------------------------------------------------------------------

struct PdeOptions {
    Source src;
    std::string out;
    std::vector<double> snapshots;
};

int run_pde(const PdeOptions& opt, std::ostream& out) {
    auto sc = resolve(opt.src);
    if (!sc.pde) throw ConfigError("scenario '" + sc.name + "' has no pde setup");
    if (!opt.snapshots.empty()) sc.pde->integrator.snapshot_times = opt.snapshots;
    sc.validate();
    const auto dir = prepare_dir(opt.out, sc.name);
    fs::remove(dir / "error.txt");
    write_file(dir / "config.scn", scenario::serialize(sc));

    const auto& p = *sc.pde;
    const auto traj = integrator::run(pde::initial_state(p.grid, p.u, p.v), p.u, p.v, p.integrator);

    write_with(dir / "losses.csv", [&](std::ostream& os) {
        os << std::setprecision(17) << "t,amount_red,amount_blue,lost_red,lost_blue\n";
        const auto& first = traj.series.front();
        for (const auto& r : traj.series) {
            os << r.t << ',' << r.mass_u << ',' << r.mass_v << ',' << first.mass_u - r.mass_u << ','
               << first.mass_v - r.mass_v << '\n';
        }
    });
    const auto metrics = analysis::metrics_from_pde(sc, traj);
    write_with(dir / "metrics.csv", [&](std::ostream& os) { analysis::write_metrics_csv(os, metrics); });

    const auto snaps = dir / "snapshots";
    fs::remove_all(snaps);
    fs::create_directories(snaps);
    write_with(snaps / "index.csv", [&](std::ostream& os) {
        os << std::setprecision(17) << "index,t,red,blue\n";
        for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
            const auto& s = traj.snapshots[i];
            const auto u = indexed("u", i, ".csv"), v = indexed("v", i, ".csv");
            write_with(snaps / u, [&](std::ostream& f) { io::write_field_csv(f, s.u); });
            write_with(snaps / v, [&](std::ostream& f) { io::write_field_csv(f, s.v); });
            os << i << ',' << s.t << ',' << u << ',' << v << '\n';
        }
    });

    const auto& first = traj.series.front();
    const auto& last = traj.series.back();
    write_with(dir / "summary.txt", [&](std::ostream& os) {
        os << std::setprecision(10);
        os << "scenario: " << sc.name << "\nengine: pde\n";
        os << "status: " << (traj.ok() ? "ok" : "failed") << "\n";
        os << "final time: " << last.t << " of " << p.integrator.t_end << "\n";
        os << "accepted steps: " << traj.series.size() - 1 << "\nrejected steps: " << traj.rejected << "\n";
        os << "minimum pre-clamp density: " << traj.min_preclamp << "\n";
        os << "mass red: " << first.mass_u << " -> " << last.mass_u << "\n";
        os << "mass blue: " << first.mass_v << " -> " << last.mass_v << "\n";
        os << "snapshots: " << traj.snapshots.size() << "\n";
        describe_metrics(os, metrics);
    });

    if (!traj.ok()) {
        write_file(dir / "error.txt", *traj.error + "\n");
        out << "integration failed: " << *traj.error << " (partial bundle in " << dir.string() << ")\n";
        return kExitRuntime;
    }
    out << dir.string() << "\n";
    return kExitOk;
}

// ---- run-ca --------------------------------------------------------------------------

struct CaOptions {
    Source src;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
};

int run_ca(const CaOptions& opt, std::ostream& out) {
    auto sc = resolve(opt.src);
    if (!sc.ca) throw ConfigError("scenario '" + sc.name + "' has no automaton setup");
    if (opt.seed) sc.ca->seed = *opt.seed;
    if (opt.steps) sc.ca->steps = *opt.steps;
    sc.validate();
    auto& c = *sc.ca;
    if (c.steps < 0) throw ConfigError("steps must be >= 0");
    const auto dir = prepare_dir(opt.out, sc.name + "-seed" + std::to_string(c.seed));
    fs::remove(dir / "error.txt");
    write_file(dir / "config.scn", scenario::serialize(sc));

    ca::CaTrajectory traj;
    try {
        traj = ca::ca_run(c.config, c.seed, c.steps, {}, c.snapshot_every > 0 ? c.snapshot_every : std::max(1L, c.steps));
    } catch (const std::exception& e) {
        write_file(dir / "error.txt", std::string(e.what()) + "\n");
        throw;
    }

    write_with(dir / "losses.csv", [&](std::ostream& os) {
        os << "step,alive_red,injured_red,alive_blue,injured_blue\n";
        for (const auto& r : traj.counts) {
            os << r.step << ',' << r.alive[0] << ',' << r.injured[0] << ',' << r.alive[1] << ',' << r.injured[1]
               << '\n';
        }
    });
    const auto metrics = analysis::metrics_from_ca(sc, traj);
    write_with(dir / "metrics.csv", [&](std::ostream& os) { analysis::write_metrics_csv(os, metrics); });

    const auto snaps = dir / "snapshots";
    fs::remove_all(snaps);
    fs::create_directories(snaps);
    write_with(snaps / "index.csv", [&](std::ostream& os) {
        os << "index,step,agents\n";
        for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
            const auto name = indexed("agents", i, ".csv");
            write_with(snaps / name, [&](std::ostream& f) { io::write_agents_csv(f, traj.snapshots[i].agents); });
            os << i << ',' << traj.snapshots[i].step << ',' << name << '\n';
        }
    });

    const auto summary = analysis::summarise_run(metrics, traj, c.seed);
    write_with(dir / "summary.txt", [&](std::ostream& os) {
        os << std::setprecision(10);
        os << "scenario: " << sc.name << "\nengine: ca\nseed: " << c.seed << "\nsteps: " << c.steps << "\n";
        os << "status: ok\n";
        os << "living red: " << summary.initial_living[0] << " -> " << summary.final_living[0] << "\n";
        os << "living blue: " << summary.initial_living[1] << " -> " << summary.final_living[1] << "\n";
        os << "counts non-increasing: " << (summary.counts_monotone ? "yes" : "no") << "\n";
        os << "front-phase loss share: " << summary.front_phase_loss_share << "\n";
        os << "goal reached red: " << (summary.reached_goal[0] ? "yes" : "no") << "\n";
        os << "goal reached blue: " << (summary.reached_goal[1] ? "yes" : "no") << "\n";
        describe_metrics(os, metrics);
    });
    out << dir.string() << "\n";
    return kExitOk;
}

// ---- ensemble ------------------------------------------------------------------------

struct EnsembleOptions {
    Source src;
    std::string out;
    int runs = 100;
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::optional<long> every;
    int jobs = 0;
};

int run_ensemble(const EnsembleOptions& opt, std::ostream& out) {
    auto sc = resolve(opt.src);
    if (!sc.ca) throw ConfigError("ensembles need an automaton scenario");
    if (opt.runs < 1) throw ConfigError("--runs must be >= 1");
    if (opt.seed) sc.ca->seed = *opt.seed;
    if (opt.steps) sc.ca->steps = *opt.steps;
    if (opt.every) sc.ca->snapshot_every = *opt.every;
    sc.validate();
    const auto& c = *sc.ca;
    const long every = c.snapshot_every > 0 ? c.snapshot_every : std::max(1L, c.steps);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < opt.runs; ++i) seeds.push_back(c.seed + static_cast<std::uint64_t>(i));
    const int jobs = opt.jobs > 0 ? opt.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    const auto dir = prepare_dir(opt.out, sc.name + "-ensemble");
    write_file(dir / "config.scn", scenario::serialize(sc));
    const auto report = analysis::ensemble(sc, seeds, c.steps, jobs, every);

    write_with(dir / "ensemble.csv", [&](std::ostream& os) { analysis::write_ensemble_csv(os, report); });
    write_with(dir / "summary.txt", [&](std::ostream& os) { analysis::write_ensemble_summary(os, report); });
    write_with(dir / "metrics.csv", [&](std::ostream& os) { analysis::write_metrics_csv(os, report.mean_series); });
    write_with(dir / "runs.csv", [&](std::ostream& os) {
        os << std::setprecision(17);
        os << "seed,ok,precession,rotation,passed,goal_red,goal_blue,initial_red,initial_blue,final_red,final_blue,"
              "front_phase_loss_share\n";
        for (const auto& r : report.runs) {
            os << r.seed << ',' << r.ok << ',' << analysis::to_string(r.precession.direction) << ','
               << r.precession.rotation << ',' << r.passed << ',' << r.reached_goal[0] << ',' << r.reached_goal[1]
               << ',' << r.initial_living[0] << ',' << r.initial_living[1] << ',' << r.final_living[0] << ','
               << r.final_living[1] << ',' << r.front_phase_loss_share << '\n';
        }
    });
    std::ostringstream failures;
    for (const auto& r : report.runs) {
        if (!r.ok) failures << "seed " << r.seed << ": " << r.error << "\n";
    }
    if (report.failed() > 0) {
        write_file(dir / "error.txt", failures.str());
        out << report.failed() << " of " << report.n_runs() << " runs failed (see " << (dir / "error.txt").string()
            << ")\n";
        return kExitRuntime;
    }
    fs::remove(dir / "error.txt");
    out << dir.string() << "\n";
    return kExitOk;
}

// ---- compare -------------------------------------------------------------------------

struct CompareOptions {
    std::string pde, ca, out;
    std::size_t samples = 101;
};

analysis::MetricSeries load_metrics(const std::string& bundle) {
    const auto path = fs::path(bundle) / "metrics.csv";
    if (!fs::exists(path)) throw ConfigError("no metrics.csv in bundle '" + bundle + "'");
    std::istringstream in(read_file(path));
    return analysis::read_metrics_csv(in);
}

int run_compare(const CompareOptions& opt, std::ostream& out) {
    const auto pde = load_metrics(opt.pde);
    const auto ca = load_metrics(opt.ca);
    const auto report = analysis::compare(pde, ca, opt.samples);
    std::ostringstream os;
    analysis::write_comparison(os, report);
    out << os.str();
    if (!opt.out.empty()) {
        fs::create_directories(opt.out);
        write_file(fs::path(opt.out) / "comparison.txt", os.str());
    }
    return kExitOk;
}

// ---- render --------------------------------------------------------------------------

struct RenderOptions {
    std::string bundle;
    std::string format = "ascii";
    std::string out;
};

std::vector<std::vector<std::string>> read_index(const fs::path& path, std::string& header) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, header);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

int run_render(const RenderOptions& opt, std::ostream& out) {
    const fs::path bundle(opt.bundle);
    const auto index_path = bundle / "snapshots" / "index.csv";
    if (!fs::exists(index_path)) throw ConfigError("bundle '" + opt.bundle + "' has no snapshots");
    std::string header;
    const auto rows = read_index(index_path, header);
    if (rows.empty()) throw ConfigError("bundle '" + opt.bundle + "' has no snapshots");
    const auto sc = scenario::load((bundle / "config.scn").string());
    const bool pde_bundle = header == "index,t,red,blue";
    if (!pde_bundle && header != "index,step,agents") throw ConfigError("unrecognised snapshot index");
    if (pde_bundle && !sc.pde) throw ConfigError("bundle config has no pde setup");
    if (!pde_bundle && !sc.ca) throw ConfigError("bundle config has no automaton setup");

    auto load_pair = [&](const std::vector<std::string>& row) {
        const auto snaps = bundle / "snapshots";
        if (pde_bundle) {
            if (row.size() != 4) throw ConfigError("malformed snapshot index row");
            std::istringstream u(read_file(snaps / row[2])), v(read_file(snaps / row[3]));
            return std::pair{io::read_field_csv(u, sc.pde->grid), io::read_field_csv(v, sc.pde->grid)};
        }
        if (row.size() != 3) throw ConfigError("malformed snapshot index row");
        std::istringstream a(read_file(snaps / row[2]));
        const auto agents = io::read_agents_csv(a);
        const int n = sc.ca->config.lattice;
        return std::pair{io::occupancy_field(agents, ca::Side::red, n), io::occupancy_field(agents, ca::Side::blue, n)};
    };

    if (opt.format == "ascii") {
        for (const auto& row : rows) {
            const auto [red, blue] = load_pair(row);
            out << (pde_bundle ? "t = " : "step = ") << row[1] << "\n" << io::render_ascii(red, blue) << "\n";
        }
        return kExitOk;
    }
    if (opt.format != "pgm") throw ConfigError("unknown format '" + opt.format + "' (ascii or pgm)");
    const fs::path dir = opt.out.empty() ? bundle / "render" : fs::path(opt.out);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [red, blue] = load_pair(rows[i]);
        write_with(dir / indexed("red", i, ".pgm"), [&](std::ostream& os) { io::write_pgm(os, io::to_gray(red)); });
        write_with(dir / indexed("blue", i, ".pgm"), [&](std::ostream& os) { io::write_pgm(os, io::to_gray(blue)); });
    }
    out << 2 * rows.size() << " images in " << dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Combat dynamics: continuous and agent-based engagement models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cdyn 1.0");

    PdeOptions pde_opt;
    auto* pde_cmd = app.add_subcommand("run-pde", "Integrate a continuous scenario");
    add_source(*pde_cmd, pde_opt.src);
    pde_cmd->add_option("--out", pde_opt.out, "Bundle directory");
    pde_cmd->add_option("--snapshots", pde_opt.snapshots, "Snapshot times t1,t2,...")->delimiter(',');

    CaOptions ca_opt;
    auto* ca_cmd = app.add_subcommand("run-ca", "Run the cellular automaton");
    add_source(*ca_cmd, ca_opt.src);
    ca_cmd->add_option("--out", ca_opt.out, "Bundle directory");
    ca_cmd->add_option("--seed", ca_opt.seed, "Random seed");
    ca_cmd->add_option("--steps", ca_opt.steps, "Number of steps");

    EnsembleOptions ens_opt;
    auto* ens_cmd = app.add_subcommand("ensemble", "Run seeds S0..S0+N-1 and aggregate");
    add_source(*ens_cmd, ens_opt.src);
    ens_cmd->add_option("--out", ens_opt.out, "Output directory");
    ens_cmd->add_option("--runs", ens_opt.runs, "Number of runs")->capture_default_str();
    ens_cmd->add_option("--seed", ens_opt.seed, "First seed");
    ens_cmd->add_option("--steps", ens_opt.steps, "Steps per run");
    ens_cmd->add_option("--every", ens_opt.every, "Metric sampling stride in steps");
    ens_cmd->add_option("--jobs", ens_opt.jobs, "Concurrent runs (0 = all cores)")->capture_default_str();

    CompareOptions cmp_opt;
    auto* cmp_cmd = app.add_subcommand("compare", "Compare a pde bundle with a ca bundle");
    cmp_cmd->add_option("--pde", cmp_opt.pde, "Continuous bundle")->required();
    cmp_cmd->add_option("--ca", cmp_opt.ca, "Automaton bundle")->required();
    cmp_cmd->add_option("--out", cmp_opt.out, "Directory for comparison.txt");
    cmp_cmd->add_option("--samples", cmp_opt.samples, "Points on the normalised time grid")->capture_default_str();

    RenderOptions ren_opt;
    auto* ren_cmd = app.add_subcommand("render", "Render bundle snapshots");
    ren_cmd->add_option("--bundle", ren_opt.bundle, "Bundle directory")->required();
    ren_cmd->add_option("--format", ren_opt.format, "ascii or pgm")->capture_default_str();
    ren_cmd->add_option("--out", ren_opt.out, "Image directory for pgm (default <bundle>/render)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*pde_cmd) return run_pde(pde_opt, out);
        if (*ca_cmd) return run_ca(ca_opt, out);
        if (*ens_cmd) return run_ensemble(ens_opt, out);
        if (*cmp_cmd) return run_compare(cmp_opt, out);
        if (*ren_cmd) return run_render(ren_opt, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const LookupError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace cdyn::cli
