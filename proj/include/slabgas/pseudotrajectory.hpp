#pragma once

#include <span>
#include <string>
#include <vector>

#include "slabgas/hardsphere.hpp"
#include "slabgas/random.hpp"

// Backward pseudotrajectories for the hard-sphere and punctual flows, driven
// by a collision tree, plus the classifier that names the first divergence
// between the two (shift / recollision / overlap / near-boundary / grazing).

namespace slabgas {

struct ParticleCountMismatch : std::invalid_argument {
    ParticleCountMismatch() : std::invalid_argument("configurations differ in particle count") {}
};

// Tree labels: created particle s+c (c = 0..r-1, 0-based) attaches to
// progenitor a[c] in {0, .., s+c-1}; sigma[c] = +1 scatters at creation.
struct CollisionTree {
    int s = 1;
    int r = 0;
    std::vector<int> a;
    std::vector<int> sigma;
};

// Creation times t > times[0] > ... > times[r-1] > 0, impact directions and
// incoming velocities per creation.
struct CreationParams {
    std::vector<double> times;
    std::vector<Vec3> nu;
    std::vector<Vec3> vbar;
};

enum class PseudoMode { Epsilon, Zero };

enum class DiscrepancyClass { Clean, Shift, Recollision, Overlap, NearBoundaryCreation, Grazing };

const char* to_string(DiscrepancyClass c);

struct PseudoEvent {
    enum class Type { Creation, Reflection, Recollision, Overlap, GrazeSkip };
    double tau;  // physical time; the build runs from tau = t down to 0
    Type type;
    int i = -1;
    int j = -1;  // progenitor for creations, partner for contacts

    // payloads for the classifier (only the relevant ones are set)
    double wall_dist = -1.0;      // creation: progenitor distance to the nearest wall
    double other_dist = -1.0;     // creation: progenitor min distance to other particles
    double dev_cos_min = -1.0;    // creation: min |v_j(tau^-).e| over deviated j
    double dev_rel_e_min = -1.0;  // creation: min |(v_j(tau^+)-v_k(tau^+)).e|, deviated j, k != j
    double refl_cos = -1.0;       // reflection: |v_i(tau^-).e|
    double min_rel_speed = -1.0;  // reflection: min_k |v_i(tau^-) - v_k(tau^-)|
};

struct BackwardResult {
    bool complete = false;     // false when a creation was inadmissible or had zero weight
    std::string stop_reason;
    double weight = 0.0;       // product of [sigma nu.(vbar - v_a(t^+))]_+
    std::vector<Particle> roots_at_t;
    std::vector<Particle> at_zero;  // all s+r particles at time 0 (forward velocities)
    std::vector<PseudoEvent> log;   // decreasing tau
    // record states per checkpoint: one entry per creation time (state at
    // t_k, before the creation), plus one at tau = 0; inner vector is per
    // particle in creation order
    std::vector<std::vector<ReflectionRecord::State>> record_states;
};

BackwardResult build_backward(PseudoMode mode, double t, std::span<const Particle> roots,
                              const CollisionTree& tree, const CreationParams& params,
                              std::vector<ReflectionRecord> records, double epsilon,
                              const SimPolicy& policy = {});

// Product of the creation measure densities given the progenitor velocities
// just above each creation time.
double creation_weight(const CollisionTree& tree, const CreationParams& params,
                       std::span<const Vec3> v_progenitor_above);

// Class of the first (largest-tau) divergence between the two builds; Clean
// when the logs agree and no threshold is crossed. Thresholds: 2 epsilon for
// near-boundary creations, eps^{1/4} velocity and eps^{1/3} distance cuts
// for grazing.
DiscrepancyClass classify_discrepancy(const BackwardResult& eps_result,
                                      const BackwardResult& zero_result, double epsilon);

// Max over homologous particles of the slab-torus distance.
double final_distance(std::span<const Particle> a, std::span<const Particle> b);

// One line per event: "tau kind i j". Documented in the repository README.
std::string log_to_text(const BackwardResult& result);

}  // namespace slabgas
