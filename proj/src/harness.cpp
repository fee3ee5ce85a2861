#include "slabgas/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "slabgas/parallel.hpp"

namespace slabgas {

using nlohmann::ordered_json;

ObservableSpec make_observable(const std::string& name) {
    if (name == "one")
        return {name, [](const Vec3&) { return 1.0; }, [](double, double) { return 1.0; }, 0};
    if (name == "v1")
        return {name, [](const Vec3& v) { return v.x; },
                [](double s, double c) { return s * c; }, 1};
    if (name == "speed_sq")
        return {name, [](const Vec3& v) { return v.norm2(); },
                [](double s, double) { return s * s; }, 2};
    throw ConfigError("unknown observable: " + name);
}

// ---------------------------------------------------------------------------
// configuration

namespace {

void check_known_keys(const ordered_json& j, const std::set<std::string>& known,
                      const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown field: " + (scope.empty() ? it.key() : scope + "." + it.key()));
}

template <typename T>
T require(const ordered_json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing field: " + key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for field: " + key);
    }
}

template <typename T>
T optional(const ordered_json& j, const std::string& key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for field: " + key);
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_known_keys(j, {"N", "times", "beta", "mu", "f0", "seed", "replicas", "bins", "eval_bin",
                         "offdiag_margin", "energy_cutoff", "max_creations", "threads",
                         "observables", "series_point", "solver"},
                     "");
    ExperimentConfig c;
    c.n_list = require<std::vector<int>>(j, "N");
    c.times = require<std::vector<double>>(j, "times");
    c.seed = require<std::uint64_t>(j, "seed");
    c.replicas = require<int>(j, "replicas");
    c.beta = optional(j, "beta", c.beta);
    c.mu = optional(j, "mu", c.mu);
    c.bins = optional(j, "bins", c.bins);
    c.eval_bin = optional(j, "eval_bin", c.eval_bin);
    c.offdiag_margin = optional(j, "offdiag_margin", c.offdiag_margin);
    c.energy_cutoff = optional(j, "energy_cutoff", c.energy_cutoff);
    c.max_creations = optional(j, "max_creations", c.max_creations);
    c.threads = optional(j, "threads", c.threads);
    c.observables = optional(j, "observables", c.observables);
    if (j.contains("f0")) {
        const auto& f = j.at("f0");
        check_known_keys(f, {"type", "amplitude"}, "f0");
        c.f0_type = require<std::string>(f, "type");
        c.f0_amplitude = optional(f, "amplitude", c.f0_amplitude);
    }
    if (j.contains("series_point")) {
        const auto& p = j.at("series_point");
        check_known_keys(p, {"x1", "v"}, "series_point");
        c.series_x1 = optional(p, "x1", c.series_x1);
        auto v = optional<std::vector<double>>(p, "v", {c.series_v.x, c.series_v.y, c.series_v.z});
        if (v.size() != 3) throw ConfigError("bad value for field: series_point.v");
        c.series_v = {v[0], v[1], v[2]};
    }
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        check_known_keys(s, {"nx", "ns", "nc", "v_max", "dt", "collision_nodes", "quad_seed",
                             "max_iterations"},
                         "solver");
        c.solver.nx = optional(s, "nx", c.solver.nx);
        c.solver.ns = optional(s, "ns", c.solver.ns);
        c.solver.nc = optional(s, "nc", c.solver.nc);
        c.solver.v_max = optional(s, "v_max", c.solver.v_max);
        c.solver.dt = optional(s, "dt", c.solver.dt);
        c.solver.collision_nodes = optional(s, "collision_nodes", c.solver.collision_nodes);
        c.solver.quad_seed = optional(s, "quad_seed", c.solver.quad_seed);
        c.solver.max_iterations = optional(s, "max_iterations", c.solver.max_iterations);
    }

    if (c.n_list.empty()) throw ConfigError("bad value for field: N (empty)");
    for (int n : c.n_list)
        if (n < 5) throw ConfigError("bad value for field: N (needs N >= 5 so that eps < 1/2)");
    double prev = 0.0;
    for (double t : c.times) {
        if (t <= prev) throw ConfigError("bad value for field: times (ascending, positive)");
        prev = t;
    }
    if (c.replicas < 1) throw ConfigError("bad value for field: replicas");
    if (c.beta <= 0.0) throw ConfigError("bad value for field: beta");
    if (c.bins < 1) throw ConfigError("bad value for field: bins");
    if (c.eval_bin < 0 || c.eval_bin >= c.bins) throw ConfigError("bad value for field: eval_bin");
    if (c.f0_amplitude < 0.0 || c.f0_amplitude >= 1.0)
        throw ConfigError("bad value for field: f0.amplitude");
    for (const auto& o : c.observables) make_observable(o);
    return c;
}

std::string config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["N"] = c.n_list;
    j["times"] = c.times;
    j["beta"] = c.beta;
    j["mu"] = c.mu;
    j["f0"] = {{"type", c.f0_type}, {"amplitude", c.f0_amplitude}};
    j["seed"] = c.seed;
    j["replicas"] = c.replicas;
    j["bins"] = c.bins;
    j["eval_bin"] = c.eval_bin;
    j["offdiag_margin"] = c.offdiag_margin;
    j["energy_cutoff"] = c.energy_cutoff;
    j["max_creations"] = c.max_creations;
    j["threads"] = c.threads;
    j["observables"] = c.observables;
    j["series_point"] = {{"x1", c.series_x1},
                         {"v", std::vector<double>{c.series_v.x, c.series_v.y, c.series_v.z}}};
    j["solver"] = {{"nx", c.solver.nx},
                   {"ns", c.solver.ns},
                   {"nc", c.solver.nc},
                   {"v_max", c.solver.v_max},
                   {"dt", c.solver.dt},
                   {"collision_nodes", c.solver.collision_nodes},
                   {"quad_seed", c.solver.quad_seed},
                   {"max_iterations", c.solver.max_iterations}};
    return j.dump(2);
}

std::string config_hash(const ExperimentConfig& c) {
    std::string s = config_to_json(c);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
    return buf;
}

// ---------------------------------------------------------------------------
// ensembles and empirical observables

EnsembleResult run_ensemble(const InitialDensity& f0, int n_particles, double epsilon,
                            int replicas, std::span<const double> times, RngKey key, int threads) {
    EnsembleResult out;
    out.by_time.resize(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        out.by_time[ti].t = times[ti];
        out.by_time[ti].replicas.resize(replicas);
    }
    std::vector<long> colls(replicas, 0), refls(replicas, 0);
    const double t_end = times.empty() ? 0.0 : times.back();

    parallel_for(replicas, threads, [&](long rep) {
        RngKey rk = key.sub(0x5ee, rep);
        Rng vel_rng(rk.sub(1));
        auto init = sample_initial_configuration(
            rk, n_particles, epsilon, [&](Rng& r) { return f0.sample_position(r); },
            [&](Rng& r) { return f0.sample_velocity(r); });
        (void)vel_rng;
        HardSphereSim sim(std::move(init.particles), std::move(init.records), epsilon, t_end);
        std::size_t ti = 0;
        sim.simulate(t_end, times,
                     [&](double, const std::vector<Particle>& ps) {
                         out.by_time[ti++].replicas[rep] = ps;
                     });
        colls[rep] = sim.diagnostics().collisions;
        refls[rep] = sim.diagnostics().reflections;
    });
    for (int r = 0; r < replicas; ++r) {
        out.collisions += colls[r];
        out.reflections += refls[r];
    }
    return out;
}

Estimate empirical_observable(const SnapshotEnsemble& ensemble, double x1_lo, double x1_hi,
                              const ObservableSpec& phi, bool* empty_bin) {
    if (!(x1_hi > x1_lo)) throw std::invalid_argument("empirical_observable: empty bin");
    Accumulator acc;
    long hits = 0;
    const double width = x1_hi - x1_lo;
    for (const auto& ps : ensemble.replicas) {
        double sum = 0.0;
        for (const auto& p : ps) {
            if (p.x.x1 >= x1_lo && p.x.x1 < x1_hi) {
                sum += phi.phi(p.v);
                ++hits;
            }
        }
        acc.add(sum / (static_cast<double>(ps.size()) * width));
    }
    if (empty_bin) *empty_bin = hits == 0;
    return acc.estimate();
}

// ---------------------------------------------------------------------------
// sweep

// The contraction constant is fitted on a fixed two-temperature probe, not
// on the experiment's f0: initial data at local velocity equilibrium make
// the first collision term vanish and the fit degenerate.
double fit_horizon(const ExperimentConfig& config) {
    auto probe = make_maxwell_bimodal(config.beta);
    auto rep = continuity_bound_check(1, 1, 0.1, {config.beta, config.mu}, probe.f,
                                      config.energy_cutoff, 8, 60000,
                                      RngKey{config.seed, 0}.sub(0xf17));
    return rep.horizon;
}

ConvergenceReport convergence_sweep(const ExperimentConfig& config) {
    ConvergenceReport report;
    auto f0 = config.initial_density();
    auto probe = make_maxwell_bimodal(config.beta);
    auto cont = continuity_bound_check(1, 1, 0.1, {config.beta, config.mu}, probe.f,
                                       config.energy_cutoff, 8, 60000,
                                       RngKey{config.seed, 0}.sub(0xf17));
    report.fitted_horizon = cont.horizon;
    report.fitted_rate = cont.fitted_rate;
    for (double t : config.times)
        if (t > cont.horizon)
            throw ConfigError("sweep time beyond the fitted horizon T");

    const double t_end = config.times.back();
    auto solved = picard_solve(f0.f, t_end, 1e-8, config.solver, config.times);

    std::vector<ObservableSpec> obs;
    for (const auto& name : config.observables) obs.push_back(make_observable(name));

    struct GapKey {
        std::size_t ti, oi;
    };
    std::vector<std::vector<double>> gaps(config.times.size() * obs.size());
    std::vector<std::vector<double>> sigmas(config.times.size() * obs.size());

    for (int n : config.n_list) {
        double eps = config.epsilon_for(n);
        auto ens = run_ensemble(f0, n, eps, config.replicas, config.times,
                                RngKey{config.seed, 0}.sub(0xe45, n), config.threads);
        for (std::size_t ti = 0; ti < config.times.size(); ++ti) {
            const auto& snap = solved.snapshots[ti];
            for (std::size_t oi = 0; oi < obs.size(); ++oi) {
                for (int b = 0; b < config.bins; ++b) {
                    double lo = static_cast<double>(b) / config.bins;
                    double hi = static_cast<double>(b + 1) / config.bins;
                    auto est = empirical_observable(ens.by_time[ti], lo, hi, obs[oi]);
                    double ref = snap.observable(obs[oi].phi_reduced, lo, hi);
                    SweepRow row{n,   config.times[ti], obs[oi].name, lo, hi,
                                 est.mean, est.stderr_,  ref,          std::abs(est.mean - ref)};
                    report.marginal_rows.push_back(row);
                    if (b == config.eval_bin) {
                        report.rows.push_back(row);
                        gaps[ti * obs.size() + oi].push_back(row.gap);
                        sigmas[ti * obs.size() + oi].push_back(est.stderr_);
                    }
                }
            }
        }
    }

    for (std::size_t ti = 0; ti < config.times.size(); ++ti) {
        for (std::size_t oi = 0; oi < obs.size(); ++oi) {
            const auto& g = gaps[ti * obs.size() + oi];
            const auto& s = sigmas[ti * obs.size() + oi];
            SweepVerdict v;
            v.t = config.times[ti];
            v.observable = obs[oi].name;
            v.non_increasing = true;
            for (std::size_t k = 0; k + 1 < g.size(); ++k) {
                double comb = std::sqrt(s[k] * s[k] + s[k + 1] * s[k + 1]);
                if (g[k + 1] > g[k] + 2.0 * comb) v.non_increasing = false;
            }
            v.final_gap = g.back();
            v.final_sigma = s.back();
            v.final_gap_small = g.back() < 2.0 * s.back();
            report.verdicts.push_back(v);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// discrepancy-set decay

std::vector<BadSetRow> bad_set_decay_study(int s, int r, double t, const CollisionTree& skeleton,
                                           std::span<const double> eps_list, long n_samples,
                                           double energy, RngKey key, int threads) {
    if (r > 2) throw std::invalid_argument("bad_set_decay_study: r > 2 out of scope");
    const double margin = 0.1;  // off-diagonal margin for s >= 2 roots
    const double radius = std::sqrt(energy);
    std::vector<BadSetRow> rows;

    for (double epsilon : eps_list) {
        std::vector<int> cls_of(n_samples, -1);
        parallel_for(n_samples, threads, [&](long n) {
            RngKey sk = key.sub(static_cast<std::uint64_t>(epsilon * 1e9), n);
            for (int attempt = 0; attempt < 1000; ++attempt) {
                Rng rng(sk.sub(0xa77, attempt));
                std::vector<Particle> roots(s);
                bool ok = true;
                double vsq = 0.0;
                for (int i = 0; i < s; ++i) {
                    for (int tries = 0; tries < 100; ++tries) {
                        roots[i].x = Position(rng.uniform(), rng.uniform(), rng.uniform());
                        bool clear = true;
                        for (int m = 0; m < i; ++m)
                            if (slab_torus_distance(roots[i].x, roots[m].x) <= margin) clear = false;
                        if (clear) break;
                    }
                    roots[i].v = rng.uniform_ball(radius);
                    vsq += roots[i].v.norm2();
                }
                CollisionTree tree = skeleton;
                tree.s = s;
                tree.r = r;
                CreationParams params;
                params.times.resize(r);
                params.nu.resize(r);
                params.vbar.resize(r);
                for (int c = 0; c < r; ++c) params.times[c] = rng.uniform(0.0, t);
                std::sort(params.times.begin(), params.times.end(), std::greater<>());
                double extra = 0.0;
                for (int c = 0; c < r; ++c) {
                    params.nu[c] = rng.unit_sphere();
                    params.vbar[c] = rng.uniform_ball(radius);
                    extra += params.vbar[c].norm2();
                    tree.sigma[c] = rng.uniform() < 0.5 ? 1 : -1;
                }
                if (vsq + extra > energy) continue;

                std::vector<ReflectionRecord> recs_zero, recs_eps;
                for (int i = 0; i < s + r; ++i) {
                    recs_zero.emplace_back(sk.sub(0x0dd ^ attempt, i), true);
                    recs_eps.emplace_back(sk.sub(0x0dd ^ attempt, i), true);
                }
                auto zero = build_backward(PseudoMode::Zero, t, roots, tree, params,
                                           std::move(recs_zero), epsilon);
                if (!zero.complete) continue;  // sigma rejected by the punctual flow
                auto eps_b = build_backward(PseudoMode::Epsilon, t, roots, tree, params,
                                            std::move(recs_eps), epsilon);
                cls_of[n] = static_cast<int>(classify_discrepancy(eps_b, zero, epsilon));
                ok = true;
                if (ok) break;
            }
        });

        std::map<int, long> counts;
        long valid = 0;
        for (long n = 0; n < n_samples; ++n) {
            if (cls_of[n] < 0) continue;
            ++valid;
            ++counts[cls_of[n]];
        }
        for (int c = 0; c <= static_cast<int>(DiscrepancyClass::Grazing); ++c) {
            double p = valid > 0 ? static_cast<double>(counts[c]) / valid : 0.0;
            BadSetRow row;
            row.epsilon = epsilon;
            row.cls = static_cast<DiscrepancyClass>(c);
            row.frequency = p;
            row.stderr_ = valid > 0 ? std::sqrt(p * (1.0 - p) / valid) : 0.0;
            row.count = counts[c];
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// file formats

namespace {
std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
}  // namespace

std::string marginals_csv(std::span<const SweepRow> rows) {
    std::string out = "t,x1_bin,observable,mean,stderr\n";
    for (const auto& r : rows) {
        out += fmt(r.t);
        out += ',';
        out += fmt(0.5 * (r.bin_lo + r.bin_hi));
        out += ',';
        out += r.observable;
        out += ',';
        out += fmt(r.empirical);
        out += ',';
        out += fmt(r.stderr_);
        out += '\n';
    }
    return out;
}

std::string badsets_csv(std::span<const BadSetRow> rows) {
    std::string out = "epsilon,class,frequency,stderr\n";
    for (const auto& r : rows) {
        out += fmt(r.epsilon);
        out += ',';
        out += to_string(r.cls);
        out += ',';
        out += fmt(r.frequency);
        out += ',';
        out += fmt(r.stderr_);
        out += '\n';
    }
    return out;
}

std::string sweep_json(const ConvergenceReport& report, const ExperimentConfig& config) {
    ordered_json j;
    j["config_hash"] = config_hash(config);
    j["fitted_T"] = report.fitted_horizon;
    j["fitted_rate"] = report.fitted_rate;
    j["rows"] = ordered_json::array();
    for (const auto& r : report.rows) {
        j["rows"].push_back({{"N", r.n},
                             {"t", r.t},
                             {"observable", r.observable},
                             {"bin", {r.bin_lo, r.bin_hi}},
                             {"empirical", r.empirical},
                             {"stderr", r.stderr_},
                             {"reference", r.reference},
                             {"gap", r.gap}});
    }
    j["verdicts"] = ordered_json::array();
    for (const auto& v : report.verdicts) {
        j["verdicts"].push_back({{"t", v.t},
                                 {"observable", v.observable},
                                 {"non_increasing", v.non_increasing},
                                 {"final_gap_small", v.final_gap_small},
                                 {"final_gap", v.final_gap},
                                 {"final_sigma", v.final_sigma}});
    }
    return j.dump(2);
}

std::string manifest_json(const ExperimentConfig& config, double fitted_horizon) {
    ordered_json j;
    j["seed"] = config.seed;
    j["config_hash"] = config_hash(config);
    j["fitted_T"] = fitted_horizon;
    j["version"] = "0.1.0";
    j["config"] = ordered_json::parse(config_to_json(config));
    return j.dump(2);
}

std::string series_json(const SeriesResult& series, const ExperimentConfig& config) {
    ordered_json j;
    j["config_hash"] = config_hash(config);
    j["total"] = {{"mean", series.total.mean}, {"stderr", series.total.stderr_}, {"n", series.total.n}};
    j["remainder_creations"] = series.remainder_creations;
    j["remainder_energy"] = series.remainder_energy;
    j["terms"] = ordered_json::array();
    for (std::size_t r = 0; r < series.terms.size(); ++r) {
        ordered_json trees = ordered_json::array();
        long tree_id = 0;
        for (const auto& ste : series.terms[r].per_tree) {
            trees.push_back({{"tree_id", tree_id++},
                             {"a", ste.tree.a},
                             {"sigma", ste.tree.sigma},
                             {"mean", ste.estimate.mean},
                             {"stderr", ste.estimate.stderr_},
                             {"n", ste.estimate.n}});
        }
        j["terms"].push_back({{"r", r},
                              {"prefactor", series.prefactors[r]},
                              {"total_mean", series.terms[r].total.mean},
                              {"total_stderr", series.terms[r].total.stderr_},
                              {"trees", std::move(trees)}});
    }
    return j.dump(2);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << content;
}

}  // namespace slabgas
