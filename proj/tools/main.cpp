// Command-line front end: ensemble simulation, the convergence sweep,
// discrepancy-set studies, series and solver evaluation, kernel checks.
// Outputs are CSV tables and JSON reports plus a run manifest; identical
// config and seed give byte-identical files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "slabgas/harness.hpp"
#include "slabgas/kernels.hpp"

namespace fs = std::filesystem;
using namespace slabgas;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read config file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
    bool verbose = false;
};

ExperimentConfig load_config(CommonOpts& opts) {
    ExperimentConfig cfg = parse_config(slurp(opts.config_path));
    if (opts.seed_set) cfg.seed = opts.seed;
    if (opts.threads >= 0) cfg.threads = opts.threads;
    fs::create_directories(opts.out_dir);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--threads", opts.threads, "worker threads (0 = hardware)");
    cmd->add_flag("--verbose", opts.verbose, "progress to stderr");
}

int cmd_simulate(CommonOpts& opts) {
    auto cfg = load_config(opts);
    double horizon = fit_horizon(cfg);
    auto f0 = cfg.initial_density();
    int n = cfg.n_list.front();
    auto ens = run_ensemble(f0, n, cfg.epsilon_for(n), cfg.replicas, cfg.times,
                            RngKey{cfg.seed, 0}.sub(0xe45, n), cfg.threads);
    std::vector<SweepRow> rows;
    for (std::size_t ti = 0; ti < cfg.times.size(); ++ti) {
        for (const auto& name : cfg.observables) {
            auto obs = make_observable(name);
            for (int b = 0; b < cfg.bins; ++b) {
                double lo = static_cast<double>(b) / cfg.bins;
                double hi = static_cast<double>(b + 1) / cfg.bins;
                auto est = empirical_observable(ens.by_time[ti], lo, hi, obs);
                rows.push_back({n, cfg.times[ti], name, lo, hi, est.mean, est.stderr_, 0.0, 0.0});
            }
        }
    }
    write_file(opts.out_dir + "/marginals.csv", marginals_csv(rows));
    write_file(opts.out_dir + "/manifest.json", manifest_json(cfg, horizon));
    if (opts.verbose)
        std::cerr << "simulate: N=" << n << " replicas=" << cfg.replicas
                  << " collisions=" << ens.collisions << " reflections=" << ens.reflections << "\n";
    return 0;
}

int cmd_sweep(CommonOpts& opts) {
    auto cfg = load_config(opts);
    auto report = convergence_sweep(cfg);
    write_file(opts.out_dir + "/sweep.json", sweep_json(report, cfg));
    for (int n : cfg.n_list) {
        std::vector<SweepRow> rows;
        for (const auto& r : report.marginal_rows)
            if (r.n == n) rows.push_back(r);
        write_file(opts.out_dir + "/marginals_N" + std::to_string(n) + ".csv", marginals_csv(rows));
    }
    write_file(opts.out_dir + "/manifest.json", manifest_json(cfg, report.fitted_horizon));
    if (opts.verbose) {
        for (const auto& v : report.verdicts)
            std::cerr << "sweep: t=" << v.t << " obs=" << v.observable
                      << " non_increasing=" << v.non_increasing
                      << " final_gap_small=" << v.final_gap_small << "\n";
    }
    return 0;
}

int cmd_badsets(CommonOpts& opts, long n_samples, double t) {
    auto cfg = load_config(opts);
    double horizon = fit_horizon(cfg);
    int r = std::min(cfg.max_creations, 2);
    CollisionTree skeleton{1, r, {}, std::vector<int>(r, 1)};
    for (int c = 0; c < r; ++c) skeleton.a.push_back(c);  // chain tree
    std::vector<double> eps_list;
    for (int n : cfg.n_list) eps_list.push_back(cfg.epsilon_for(n));
    auto rows = bad_set_decay_study(1, r, t, skeleton, eps_list, n_samples, cfg.energy_cutoff,
                                    RngKey{cfg.seed, 0}.sub(0xbad), cfg.threads);
    write_file(opts.out_dir + "/badsets.csv", badsets_csv(rows));
    write_file(opts.out_dir + "/manifest.json", manifest_json(cfg, horizon));
    return 0;
}

int cmd_series(CommonOpts& opts, long n_samples) {
    auto cfg = load_config(opts);
    double horizon = fit_horizon(cfg);
    double t = cfg.times.back();
    if (t > horizon) throw ConfigError("series time beyond the fitted horizon T");
    auto f0 = cfg.initial_density();
    auto family = [&](int s, const std::vector<Particle>& z) {
        double p = 1.0;
        for (int i = 0; i < s; ++i) p *= f0.f(z[i].x, z[i].v);
        return p;
    };
    double norm = xnorm(family, cfg.beta, cfg.mu, 3, 30000, RngKey{cfg.seed, 0}.sub(0x40),
                        6.0 / std::sqrt(cfg.beta));
    std::vector<Particle> z{{Position(cfg.series_x1, 0.5, 0.5), cfg.series_v}};
    SeriesTruncation trunc{cfg.max_creations, cfg.energy_cutoff, horizon};
    auto series = sum_series(PseudoMode::Zero, 1, t, z, f0.f, trunc, n_samples,
                             RngKey{cfg.seed, 0}.sub(0x5e4), {cfg.beta, cfg.mu}, norm);
    write_file(opts.out_dir + "/series.json", series_json(series, cfg));
    write_file(opts.out_dir + "/manifest.json", manifest_json(cfg, horizon));
    return 0;
}

int cmd_solver(CommonOpts& opts) {
    auto cfg = load_config(opts);
    double horizon = fit_horizon(cfg);
    auto f0 = cfg.initial_density();
    auto solved = picard_solve(f0.f, cfg.times.back(), 1e-8, cfg.solver, cfg.times);
    for (std::size_t i = 0; i < solved.times.size(); ++i) {
        std::ostringstream os;
        write_grid_csv(os, solved.times[i], solved.snapshots[i]);
        std::ostringstream name;
        name << opts.out_dir << "/solver_t" << solved.times[i] << ".csv";
        write_file(name.str(), os.str());
    }
    write_file(opts.out_dir + "/manifest.json", manifest_json(cfg, horizon));
    if (opts.verbose)
        std::cerr << "solver: iterations=" << solved.iterations << " gap=" << solved.final_gap
                  << "\n";
    return 0;
}

int cmd_verify_kernels(CommonOpts& opts) {
    auto cfg = load_config(opts);
    RngKey key{cfg.seed, 0};
    nlohmann::ordered_json j;

    const Vec3 v{0.3, 0.2, 0.1};
    const double energy = 9.0;
    auto rep = carleman_pushforward_check(v, energy, 400000, key.sub(0xca));
    j["pushforward"] = {{"max_abs_z", rep.max_abs_z},
                        {"mass_quadrature", rep.mass_quadrature},
                        {"mass_route_a", rep.moments[0].route_a.mean},
                        {"mass_route_a_stderr", rep.moments[0].route_a.stderr_}};
    bool pass = rep.max_abs_z < 3.0;

    auto s1 = strip_integral(v, 0.2, 0.4, energy, StripTarget::VStar, 400000, key.sub(0x51));
    auto s2 = strip_integral(v, 0.2, 0.3, energy, StripTarget::VStar, 400000, key.sub(0x52));
    double ratio = s1.mean / s2.mean;
    j["strip_ratio"] = {{"value", ratio}, {"expected", 2.0}};
    pass = pass && std::abs(ratio - 2.0) < 0.2;

    nlohmann::ordered_json sing = nlohmann::ordered_json::array();
    double c_ref = 0.0;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        auto est = singular_integral(v, eps, energy, 1, StripTarget::VStar, 400000, key.sub(0x53));
        double c = est.mean / (energy * energy * eps * std::abs(std::log(eps)));
        if (c_ref == 0.0) c_ref = c;
        sing.push_back({{"eps", eps}, {"ratio", c}});
        pass = pass && c > 0.5 * c_ref && c < 1.5 * c_ref;
    }
    j["singular_power1"] = sing;
    j["pass"] = pass;
    write_file(opts.out_dir + "/kernels.json", j.dump(2));
    return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hard-sphere slab gas: simulation, series and kinetic-solver toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    long badset_samples = 20000;
    double badset_t = 1.0;
    long series_samples = 20000;

    auto* simulate = app.add_subcommand("simulate", "replica ensemble, empirical marginals");
    add_common(simulate, opts);
    auto* sweep = app.add_subcommand("sweep", "convergence sweep across N with solver reference");
    add_common(sweep, opts);
    auto* badsets = app.add_subcommand("badsets", "discrepancy-class frequencies per epsilon");
    add_common(badsets, opts);
    badsets->add_option("--samples", badset_samples, "samples per epsilon");
    badsets->add_option("--time", badset_t, "backward horizon");
    auto* series = app.add_subcommand("series", "collision-tree series at the config point");
    add_common(series, opts);
    series->add_option("--samples", series_samples, "samples per signed tree");
    auto* solver = app.add_subcommand("solver", "kinetic integral-equation solver snapshots");
    add_common(solver, opts);
    auto* verify = app.add_subcommand("verify-kernels", "scattering-kernel verification battery");
    add_common(verify, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
        if (badsets->parsed()) return cmd_badsets(opts, badset_samples, badset_t);
        if (series->parsed()) return cmd_series(opts, series_samples);
        if (solver->parsed()) return cmd_solver(opts);
        if (verify->parsed()) return cmd_verify_kernels(opts);
    } catch (const ConfigError& e) {
        nlohmann::ordered_json err{{"error", {{"type", "config"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::ordered_json err{{"error", {{"type", "runtime"}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
