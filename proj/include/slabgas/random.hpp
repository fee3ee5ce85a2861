#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "slabgas/geometry.hpp"
#include "slabgas/vec3.hpp"

// Seeded random streams, the cosine-law reflection sampler, Maxwellian and
// initial-configuration sampling, and two-sided reflection records.
//
// Records realize an infinite two-sided sequence of unit directions with
// finite state: entry j is generated on demand from a counter-based key
// (seed, stream, j) and is then immutable for a fixed seed.

namespace slabgas {

struct ZeroSpeed : std::runtime_error {
    ZeroSpeed() : std::runtime_error("reflection of a zero-speed particle") {}
};

struct RejectionBudgetExceeded : std::runtime_error {
    explicit RejectionBudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

std::uint64_t mix64(std::uint64_t x);  // splitmix64 finalizer

struct RngKey {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    // Derived stream for a tagged sub-task; identical inputs give identical keys.
    RngKey sub(std::uint64_t tag, std::uint64_t index = 0) const {
        return {seed, mix64(stream ^ mix64(tag ^ mix64(index + 0x9e3779b97f4a7c15ULL)))};
    }
};

// xoshiro256++ seeded from an RngKey through splitmix64.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0);
    explicit Rng(RngKey k) : Rng(k.seed, k.stream) {}

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double gaussian();  // standard normal (polar method)
    Vec3 gaussian3(double sigma);
    Vec3 unit_sphere();
    Vec3 uniform_ball(double radius);

  private:
    std::uint64_t s_[4];
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Direction on S^2 with law c3 (omega.e * sign)_+ domega, i.e. the
// cosine-weighted hemisphere about sign*e: u = omega.e*sign has density 2u
// on [0,1] (draw u = sqrt(U)), azimuth uniform. c3 = 1/pi.
Vec3 sample_diffuse_direction(Rng& rng, int sign);

// Gaussian velocity, mean zero, variance 1/beta per component.
Vec3 sample_maxwellian(Rng& rng, double beta);

// Two-sided direction sequence driving and recording wall reflections.
// Future entries (j >= 1) satisfy omega.e > 0, past entries (j <= -1)
// satisfy omega.e < 0. Forward reflections consume the future and record
// onto the past; backward replay consumes the past and restores the future,
// so a forward pass followed by a backward pass reconstructs the incoming
// directions exactly.
class ReflectionRecord {
  public:
    // lazy_past = false: fresh record (empty past, as at the start of a
    // forward simulation). lazy_past = true: both sides drawn from the
    // product law on demand (as when sampling pseudotrajectory parameters).
    explicit ReflectionRecord(RngKey key, bool lazy_past = false)
        : key_(key), lazy_past_(lazy_past) {}

    // v_out = |v_in| * gamma * omega^1; records gamma*v_in/|v_in| as the new
    // omega^{-1}. Throws ZeroSpeed on |v_in| = 0.
    Vec3 reflect_forward(const Vec3& v_in, int gamma);

    // Inverse of reflect_forward: recovers v_in from v_out by consuming the
    // most recent past entry and pushing the implied future entry back.
    Vec3 reflect_backward(const Vec3& v_out, int gamma);

    // Entry j (j != 0) of the current sequence, without consuming it.
    Vec3 peek(std::int64_t j) const;

    bool past_empty() const { return past_overlay_.empty() && !lazy_past_; }

    struct State {
        std::int64_t future_taken, past_taken;
        std::size_t future_overlay, past_overlay;
        bool operator==(const State&) const = default;
    };
    State state() const {
        return {future_taken_, past_taken_, future_overlay_.size(), past_overlay_.size()};
    }

  private:
    Vec3 lazy_entry(std::int64_t index, int sign) const;
    Vec3 take_future();
    Vec3 take_past();

    RngKey key_;
    bool lazy_past_ = false;
    std::int64_t future_taken_ = 0;  // count of lazy future entries consumed
    std::int64_t past_taken_ = 0;    // count of lazy past entries consumed
    std::vector<Vec3> future_overlay_;  // entries restored in front of the lazy future
    std::vector<Vec3> past_overlay_;    // entries recorded in front of the lazy past
};

// Functional form of ReflectionRecord::reflect_forward.
inline std::pair<Vec3, ReflectionRecord> consume_reflection(ReflectionRecord record,
                                                            const Vec3& v_in, int gamma) {
    Vec3 v_out = record.reflect_forward(v_in, gamma);
    return {v_out, std::move(record)};
}

struct Particle {
    Position x;
    Vec3 v;
};

struct InitialConfiguration {
    std::vector<Particle> particles;
    std::vector<ReflectionRecord> records;
};

// Positions/velocities i.i.d. from the samplers, conditioned on pairwise
// slab-torus distance > epsilon by redrawing any particle that lands within
// epsilon of one already placed. Fresh record (empty past) per particle.
template <typename PosSampler, typename VelSampler>
InitialConfiguration sample_initial_configuration(RngKey key, int n, double epsilon,
                                                  PosSampler&& sample_pos,
                                                  VelSampler&& sample_vel,
                                                  long attempts_per_particle = 10000) {
    // Poisson estimate of the worst insertion acceptance: exp(-N vol(eps-ball));
    // the guard keeps it above roughly 1e-3.
    if (epsilon > 0.0 && n * (4.0 * M_PI / 3.0) * epsilon * epsilon * epsilon > 6.9)
        throw std::invalid_argument("sample_initial_configuration: exclusion too dense");
    InitialConfiguration out;
    Rng rng(key.sub(0x1c0f));
    out.particles.reserve(n);
    for (int i = 0; i < n; ++i) {
        long att = 0;
        for (;;) {
            if (++att > attempts_per_particle)
                throw RejectionBudgetExceeded("initial configuration: attempts exhausted");
            Position x = sample_pos(rng);
            bool clear = true;
            if (epsilon > 0.0) {
                for (const auto& p : out.particles) {
                    if (slab_torus_distance(p.x, x) <= epsilon) { clear = false; break; }
                }
            }
            if (clear) {
                out.particles.push_back({x, sample_vel(rng)});
                break;
            }
        }
        out.records.emplace_back(key.sub(0x7ec, i), false);
    }
    return out;
}

}  // namespace slabgas
