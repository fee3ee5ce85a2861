#pragma once

#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "slabgas/geometry.hpp"
#include "slabgas/random.hpp"
#include "slabgas/stats.hpp"

// Event-driven hard-sphere dynamics in the slab: free flight, elastic pair
// collisions, diffuse wall reflections. A priority queue with lazy
// invalidation via per-particle event stamps schedules events; predictions
// are refreshed only for particles involved in an event.

namespace slabgas {

struct StuckDetected : std::runtime_error {
    StuckDetected() : std::runtime_error("event cascade: too many events per unit time") {}
};

struct ReflectionBoundViolated : std::logic_error {
    ReflectionBoundViolated() : std::logic_error("reflection count exceeded t|v|+1 on a collision-free stretch") {}
};

struct SimPolicy {
    double graze_tol = 1e-10;       // shocks with smaller normal speed are skipped
    long stuck_events = 200000;     // this many events inside a unit-time window aborts
    bool check_reflection_bound = true;
};

enum class EventKind { PairCollision, WallReflection };

struct EventReport {
    double time;
    EventKind kind;
    int i;
    int j;  // partner index for collisions, -1 for reflections
    bool grazed = false;  // tangential contact, skipped by policy
};

// Elastic exchange of the normal velocity component. nu must be unit.
void apply_collision(Vec3& v_i, Vec3& v_j, const Vec3& nu);

// Earliest t in (0, horizon] at which |d + t w| = epsilon across torus
// images, d being the minimum-image displacement and w the relative
// velocity. Tangential contacts (normal speed below graze_tol) are skipped
// and counted. Returns the time and the contact displacement d + t w.
struct PairContact {
    double time;
    Vec3 contact;  // displacement from i to j at contact, |contact| = epsilon
};
std::optional<PairContact> predict_pair_collision(const Vec3& d, const Vec3& w, double epsilon,
                                                  double horizon, double graze_tol = 1e-10,
                                                  long* graze_count = nullptr);

class HardSphereSim {
  public:
    struct Diagnostics {
        long collisions = 0;
        long reflections = 0;
        long graze_pair_skips = 0;
        long graze_wall_skips = 0;
    };

    // backward_replay: run with reversed velocities, reflections consuming
    // the past side of the records (used by the backward pseudotrajectory
    // flow). epsilon must stay below 1/2 so contacts are nearest-image.
    HardSphereSim(std::vector<Particle> particles, std::vector<ReflectionRecord> records,
                  double epsilon, double t_end, SimPolicy policy = {},
                  bool backward_replay = false, double start_time = 0.0);

    const std::vector<Particle>& particles() const { return particles_; }
    std::vector<ReflectionRecord>& records() { return records_; }
    const std::vector<ReflectionRecord>& records() const { return records_; }
    double time() const { return time_; }
    double epsilon() const { return epsilon_; }
    const Diagnostics& diagnostics() const { return diag_; }

    void set_event_callback(std::function<void(const EventReport&)> cb) { on_event_ = std::move(cb); }

    // Advances to the earliest valid event at time <= t_limit and applies
    // it. Without such an event, advances free flight to t_limit and
    // returns nullopt. Throws StuckDetected on event cascades.
    std::optional<EventReport> step_to_next_event(double t_limit);

    // Runs to t_end, invoking observer(t, particles) at each sample time
    // (must be ascending) and once at t_end.
    void simulate(double t_end, std::span<const double> sample_times,
                  const std::function<void(double, const std::vector<Particle>&)>& observer);

    void run_to(double t_limit);  // simulate without observation

    // Inserts a particle mid-run (pseudotrajectory creations).
    void add_particle(const Particle& p, ReflectionRecord record);

    // Velocity change from outside the event loop (pseudotrajectory
    // scattering at creations); invalidates the particle's predictions.
    void set_velocity(int i, const Vec3& v);

    double kinetic_energy() const;
    double min_pair_distance() const;

  private:
    struct QEvent {
        double time;
        int kind;  // 0 pair, 1 wall
        int i, j;
        int gamma;  // wall side for reflections
        std::uint64_t stamp_i, stamp_j;
        bool operator>(const QEvent& o) const {
            if (time != o.time) return time > o.time;
            if (kind != o.kind) return kind > o.kind;
            if (i != o.i) return i > o.i;
            return j > o.j;
        }
    };

    void advance_all(double t);
    void predict_wall(int i);
    void predict_pair(int i, int j);
    void predict_all_for(int i);
    double wall_time_abs(int i) const;
    void note_event(double t);

    std::vector<Particle> particles_;
    std::vector<ReflectionRecord> records_;
    double epsilon_;
    double time_;
    double t_end_;
    SimPolicy policy_;
    bool backward_replay_;
    std::priority_queue<QEvent, std::vector<QEvent>, std::greater<>> queue_;
    std::vector<std::uint64_t> stamps_;
    std::function<void(const EventReport&)> on_event_;
    Diagnostics diag_;

    // collision-free stretch bookkeeping for the reflection-count bound
    struct Stretch {
        double start;
        double speed;
        long reflections;
    };
    std::vector<Stretch> stretch_;

    std::vector<double> recent_events_;  // ring buffer of event times
    std::size_t recent_pos_ = 0;
};

// Monte Carlo probability that at least two shocks (reflections or
// collisions) occur in [0, delta], from uniform positions with hard-core
// exclusion and Maxwellian velocities. Requires delta < epsilon / 2.
Estimate double_shock_fraction(int n_particles, double epsilon, double beta, double delta,
                               int replicas, RngKey key);

}  // namespace slabgas
