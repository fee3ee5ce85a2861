#pragma once

#include <span>
#include <vector>

#include "slabgas/density.hpp"
#include "slabgas/kernels.hpp"
#include "slabgas/pseudotrajectory.hpp"
#include "slabgas/stats.hpp"

// Monte Carlo evaluation of the collision-tree series terms for both the
// hard-sphere and punctual backward flows: tree enumeration, per-term
// estimates, truncated sums with remainder envelopes, and the short-time
// continuity fit that pins the validity horizon T.

namespace slabgas {

struct DegenerateSampleExcess : std::runtime_error {
    DegenerateSampleExcess() : std::runtime_error("more than half of the samples were inadmissible") {}
};

struct SeriesTruncation {
    int max_creations = 2;  // R
    double energy = 16.0;   // E, squared-speed cutoff
    double horizon = 0.5;   // T; estimates require t <= horizon
};

// All collision-tree skeletons for s roots and r creations (sigma unset):
// count = s (s+1) ... (s+r-1).
std::vector<CollisionTree> enumerate_trees(int s, int r);

struct SignedTreeEstimate {
    CollisionTree tree;
    Estimate estimate;
    long inadmissible = 0;
};

struct TermEstimate {
    std::vector<SignedTreeEstimate> per_tree;
    Estimate total;  // sigma-signed sum over trees
};

// One series term: for each signed tree, samples creation times on the
// ordered simplex, directions uniformly on the sphere, velocities uniformly
// on the energy ball and records from the product reflection law, builds the
// backward pseudotrajectory, weighs by the creation measure density and
// evaluates the tensorized f0 at time zero.
TermEstimate estimate_term(PseudoMode mode, int s, int r, double t,
                           std::span<const Particle> z_s, const DensityFunction& f0,
                           const SeriesTruncation& trunc, long n_samples, RngKey key,
                           double epsilon = 0.0);

struct SeriesResult {
    Estimate total;
    std::vector<TermEstimate> terms;  // indexed by r
    std::vector<double> prefactors;
    double remainder_creations = 0.0;  // envelope of the dropped r > R terms
    double remainder_energy = 0.0;     // envelope of the high-energy cut
};

// Sum over r <= R with the mode prefactor (alpha(N-s,r) eps^{2r} with
// N eps^2 = 1 in hard-sphere mode, 1 in the punctual limit). The remainder
// envelopes are evaluated at z_s with the supplied norm data.
SeriesResult sum_series(PseudoMode mode, int s, double t, std::span<const Particle> z_s,
                        const DensityFunction& f0, const SeriesTruncation& trunc,
                        long n_per_term, RngKey key, const NormParams& norm, double f0_norm,
                        double n_particles = 0.0);

// alpha(N-s, r) eps^{2r} with eps = N^{-1/2}.
double bbgky_prefactor(double n_particles, int s, int r);

struct ContinuityReport {
    std::vector<double> sup_per_r;    // weighted sup of the term over a z_s sample
    std::vector<double> rate_per_r;   // sup_r / (t sup_{r-1}), r >= 1
    double fitted_rate = 0.0;         // rate at r = 1
    double horizon = 0.0;             // T = 1 / (2 fitted_rate)
};

// Weighted-sup estimate of ||Q_{s,s+r}(t) f0|| in the (3 beta/4, mu - 1)
// norm over a sampled z_s grid, for r = 0..r_max, and the geometric-rate
// fit used to pin T.
ContinuityReport continuity_bound_check(int s, int r_max, double t, const NormParams& norm,
                                        const DensityFunction& f0, double energy,
                                        int grid_points, long n_samples, RngKey key);

}  // namespace slabgas
