#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slabgas/boltzmann.hpp"
#include "slabgas/density.hpp"
#include "slabgas/duhamel.hpp"
#include "slabgas/hardsphere.hpp"
#include "slabgas/pseudotrajectory.hpp"

// Experiment orchestration: replica ensembles and empirical marginals, the
// N eps^2 = 1 convergence sweep against the kinetic solver, discrepancy-set
// decay studies, and the file formats behind the command-line tool.

namespace slabgas {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ObservableSpec {
    std::string name;
    std::function<double(const Vec3&)> phi;
    std::function<double(double, double)> phi_reduced;  // (speed, cosine)
    int growth_degree = 0;
};
ObservableSpec make_observable(const std::string& name);  // "one", "v1", "speed_sq"

struct ExperimentConfig {
    std::vector<int> n_list{64, 256, 1024};
    std::vector<double> times{0.05, 0.1, 0.2};
    double beta = 1.0;
    double mu = 2.4;
    std::string f0_type = "maxwell_cosine";
    double f0_amplitude = 0.3;
    std::uint64_t seed = 1;
    int replicas = 200;
    int bins = 16;
    int eval_bin = 4;  // headline gap is evaluated on this x1 bin
    double offdiag_margin = 0.05;
    double energy_cutoff = 16.0;
    int max_creations = 2;
    int threads = 0;
    std::vector<std::string> observables{"one", "v1", "speed_sq"};
    // series evaluation point
    double series_x1 = 0.25;
    Vec3 series_v{0.5, 0.2, 0.1};
    GridSpec solver;

    double epsilon_for(int n) const { return 1.0 / std::sqrt(static_cast<double>(n)); }
    InitialDensity initial_density() const {
        return make_initial_density(f0_type, beta, f0_amplitude);
    }
};

// Strict JSON parsing: unknown fields rejected, missing fields named.
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// All replicas of one system size observed at fixed times.
struct SnapshotEnsemble {
    double t = 0.0;
    std::vector<std::vector<Particle>> replicas;
};

struct EnsembleResult {
    std::vector<SnapshotEnsemble> by_time;
    long collisions = 0;
    long reflections = 0;
};

EnsembleResult run_ensemble(const InitialDensity& f0, int n_particles, double epsilon,
                            int replicas, std::span<const double> times, RngKey key, int threads);

// (1/|bin|) E[(1/N) sum_i phi(v_i) 1{x1_i in bin}] with the replica spread
// as the uncertainty. empty_bin reports a bin that no particle ever hit.
Estimate empirical_observable(const SnapshotEnsemble& ensemble, double x1_lo, double x1_hi,
                              const ObservableSpec& phi, bool* empty_bin = nullptr);

struct SweepRow {
    int n = 0;
    double t = 0.0;
    std::string observable;
    double bin_lo = 0.0, bin_hi = 0.0;
    double empirical = 0.0, stderr_ = 0.0;
    double reference = 0.0;
    double gap = 0.0;
};

struct SweepVerdict {
    double t = 0.0;
    std::string observable;
    bool non_increasing = false;
    bool final_gap_small = false;
    double final_gap = 0.0;
    double final_sigma = 0.0;
};

struct ConvergenceReport {
    double fitted_horizon = 0.0;
    double fitted_rate = 0.0;
    std::vector<SweepRow> rows;           // headline rows, eval bin only
    std::vector<SweepRow> marginal_rows;  // all bins, for the CSV tables
    std::vector<SweepVerdict> verdicts;
};

// Continuity fit on the configured f0 (pins the horizon T), solver
// reference, ensembles per N, gaps and trend verdicts.
ConvergenceReport convergence_sweep(const ExperimentConfig& config);

double fit_horizon(const ExperimentConfig& config);

struct BadSetRow {
    double epsilon = 0.0;
    DiscrepancyClass cls = DiscrepancyClass::Clean;
    double frequency = 0.0;
    double stderr_ = 0.0;
    long count = 0;
};

// Common-sample two-mode builds classified per epsilon. sigma is drawn at
// random and the sample retried until the punctual build accepts it.
std::vector<BadSetRow> bad_set_decay_study(int s, int r, double t, const CollisionTree& skeleton,
                                           std::span<const double> eps_list, long n_samples,
                                           double energy, RngKey key, int threads = 0);

// ---------------------------------------------------------------------------
// file formats (schemas documented in the repository README)

std::string marginals_csv(std::span<const SweepRow> rows);
std::string badsets_csv(std::span<const BadSetRow> rows);
std::string sweep_json(const ConvergenceReport& report, const ExperimentConfig& config);
std::string manifest_json(const ExperimentConfig& config, double fitted_horizon);
std::string series_json(const SeriesResult& series, const ExperimentConfig& config);

void write_file(const std::string& path, const std::string& content);

}  // namespace slabgas
