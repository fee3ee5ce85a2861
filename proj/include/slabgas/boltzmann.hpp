#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slabgas/density.hpp"
#include "slabgas/random.hpp"
#include "slabgas/stats.hpp"

// Single-particle kinetic solver in mild form with the diffuse-in-angle
// wall law: the stochastic transport semigroup (Monte Carlo and
// boundary-trace series evaluations), and a Picard fixed-point solver on a
// reduced (x1, speed, direction-cosine) grid.

namespace slabgas {

struct NoConvergence : std::runtime_error {
    NoConvergence() : std::runtime_error("picard iteration did not reach tolerance") {}
};

// (T(t) g)(x, v): expectation of g along the backward characteristic with
// cosine-law reflections. Monte Carlo over n_paths.
Estimate transport_apply_mc(const DensityFunction& g, double t, const Position& x, const Vec3& v,
                            Rng& rng, long n_paths);

// Deterministic evaluation of the same expectation by the boundary-trace
// expansion: nested cosine-weighted hemisphere quadrature, one level per
// reflection. The recursion terminates on its own: each full crossing of
// the slab consumes at least 1/|v| of time, so at most t|v|+1 levels.
double transport_apply_series(const DensityFunction& g, double t, const Position& x, const Vec3& v,
                              int n_cos = 24, int n_phi = 16);

// True iff tau >= t_anchor and x - (tau - t_anchor) v lies on the slab
// boundary (within kWallTol). Discontinuity-locus diagnostic.
bool future_set_membership(double t_anchor, double tau, const Position& x, const Vec3& v);

// sup over the wall test grid of |f0(x,v) - int f0(x, omega|v|) c3
// (Gamma(x) omega.e)_- domega| for inward v. Zero means the wall law
// propagates the continuity of f0.
double compatibility_residual(const DensityFunction& f0, int n_speed = 12, int n_dir = 8,
                              int n_cos = 32, int n_phi = 24);

struct GridSpec {
    int nx = 21;           // x1 nodes on [0,1]
    int ns = 40;           // speed nodes on [0, v_max]
    int nc = 25;           // direction-cosine nodes on [-1,1]
    double v_max = 6.5;    // Gaussian envelope tail below 1e-8 for beta = 1
    double dt = 0.0125;    // Duhamel integral step (midpoint rule)
    long collision_nodes = 1024;
    std::uint64_t quad_seed = 777;
    int max_iterations = 40;
};

// Tensor grid over (x1, |v|, v.e/|v|) exploiting slab symmetry; trilinear
// interpolation clamped nonnegative, zero beyond v_max.
class GridDensity {
  public:
    GridDensity(int nx, int ns, int nc, double v_max);

    double& at(int ix, int is, int ic) { return v_[idx(ix, is, ic)]; }
    double at(int ix, int is, int ic) const { return v_[idx(ix, is, ic)]; }
    double value(double x1, double speed, double cosine) const;
    double value(double x1, const Vec3& v) const;

    // densities clamp interpolation at zero; signed grids (collision
    // output) must not
    void set_signed(bool s) { signed_ = s; }
    bool is_signed() const { return signed_; }

    int nx() const { return nx_; }
    int ns() const { return ns_; }
    int nc() const { return nc_; }
    double v_max() const { return v_max_; }
    double x1_node(int i) const { return static_cast<double>(i) / (nx_ - 1); }
    double speed_node(int j) const { return v_max_ * j / (ns_ - 1); }
    double cos_node(int k) const { return -1.0 + 2.0 * k / (nc_ - 1); }

    double mass() const;
    double energy_moment() const;  // int f |v|^2 dv dx1

    // int f(x1, v) phi(|v|, cos) dv averaged over x1 in [lo, hi]
    double observable(const std::function<double(double, double)>& phi, double x1_lo,
                      double x1_hi) const;

  private:
    std::size_t idx(int ix, int is, int ic) const {
        return (static_cast<std::size_t>(ix) * ns_ + is) * nc_ + ic;
    }
    int nx_, ns_, nc_;
    double v_max_;
    bool signed_ = false;
    std::vector<double> v_;
};

GridDensity project_to_grid(const DensityFunction& f, const GridSpec& spec);

// Fixed collision-quadrature node set shared by every grid point: Maxwell
// importance draws for v*, uniform sphere for nu (low-discrepancy lattice).
struct CollisionQuad {
    std::vector<Vec3> v_star;
    std::vector<Vec3> nu;
    std::vector<double> weight;  // 4pi / M_beta(v*), zero outside |v*| <= v_max
    double beta = 1.0;
};
CollisionQuad make_collision_quad(long n, double beta, double v_max, std::uint64_t seed);

// C(f (x) f) on the grid: gain and loss share the node set through the
// scattering map, so the Maxwellian cancellation is pointwise. The output
// is projected, per x1 slice, onto the subspace with vanishing (1, v1,
// |v|^2) moments; interpolation of the two gain factors otherwise leaves a
// spurious moment drift.
GridDensity collision_apply(const GridDensity& f, const CollisionQuad& quad);

// One transport application of a reduced-coordinates terminal function.
double transport_reduced(const std::function<double(double, double, double)>& terminal, double x1,
                         double speed, double cosine, double dt, const Quadrature1D& cos_quad);

struct PicardResult {
    std::vector<double> times;
    std::vector<GridDensity> snapshots;
    int iterations = 0;
    double final_gap = 0.0;
    double dt = 0.0;
};

// Mild-form fixed point f = T(t) f0 + int_0^t T(t - tau) C(f(tau) (x) f(tau))
// dtau, composite midpoint in time, iterated until the weighted sup gap
// (weight exp(3 beta/8 |v|^2)) falls below tol.
PicardResult picard_solve(const DensityFunction& f0, double t_end, double tol,
                          const GridSpec& spec, std::span<const double> snapshot_times);

void write_grid_csv(std::ostream& os, double t, const GridDensity& g);

}  // namespace slabgas
