#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slabgas/density.hpp"
#include "slabgas/random.hpp"
#include "slabgas/stats.hpp"
#include "slabgas/vec3.hpp"

// Collision scattering, the Carleman parametrization of the gain term,
// the pointwise collision operator, weighted sup-norm evaluation and the
// singular scattering integrals.

namespace slabgas {

struct QuadratureBudgetExceeded : std::runtime_error {
    QuadratureBudgetExceeded() : std::runtime_error("quadrature budget exceeded") {}
};

struct NormParams {
    double beta;
    double mu;
};

// v' = v - [nu.(v - v*)] nu,  v*' = v* + [nu.(v - v*)] nu. Involution in
// (v, v*) for fixed nu; (v'-v).(v*'-v) = 0.
std::pair<Vec3, Vec3> scatter(const Vec3& v, const Vec3& v_star, const Vec3& nu);

// Two independent constructions of the measure |(v-v*).nu| dv* dnu pushed
// onto the Carleman manifold C = {(v',v*') : (v'-v).(v*'-v) = 0}. Route A
// samples (v*, nu) and maps through scatter; route B samples v' in a ball
// and v*' on the orthogonal plane with surface density, restricted to the
// image support |v'+v*'-v| <= sqrt(E). The map is 2:1 in nu and the polar
// Jacobian contributes 1/|v'-v|, so the manifold density against
// dv' dS(v*') is 2/|v'-v|.
struct CarlemanReport {
    struct MomentRow {
        std::string name;
        Estimate route_a;
        Estimate route_b;
        double z;
    };
    std::vector<MomentRow> moments;
    double mass_quadrature;  // deterministic radial quadrature of the total mass
    double max_abs_z;
};
CarlemanReport carleman_pushforward_check(const Vec3& v, double energy, long n_samples, RngKey key);

// Pointwise Boltzmann operator C(f (x) g)(x,v) = gain - loss, velocities
// truncated to |v*| <= sqrt(e_cut). The gain is integrated in Carleman
// coordinates, the loss over (v*, sigma). Returns the estimate and its
// standard error.
Estimate collision_operator(const DensityFunction& f, const DensityFunction& g, const Position& x,
                            const Vec3& v, double e_cut, long n_quad, RngKey key);
struct GainLoss {
    Estimate gain;
    Estimate loss;
};
GainLoss collision_gain_loss(const DensityFunction& f, const DensityFunction& g, const Position& x,
                             const Vec3& v, double e_cut, long n_quad, RngKey key);

// Stratified-sample lower bound of sup_s essup |f^s| exp(mu s + beta/2 |v_s|^2)
// over s in [1, s_max].
double xnorm(const std::function<double(int, const std::vector<Particle>&)>& f_family,
             double beta, double mu, int s_max, long budget, RngKey key, double v_cap);

enum class StripTarget { VStar, VPrime, VStarPrime };

// int 1{v_i.e in [a,b]} 1{|v|^2+|v*|^2 <= E} |(v-v*).nu| dv* dnu, where v_i
// is v*, v' or v*' according to target.
Estimate strip_integral(const Vec3& v, double a, double b, double energy, StripTarget target,
                        long n_samples, RngKey key);

// int (eps/|v_i.e|^power ∧ 1) 1{|v|^2+|v*|^2 <= E} |(v-v*).nu| dv* dnu,
// accumulated over dyadic bands of |v_i.e|.
Estimate singular_integral(const Vec3& v, double eps, double energy, int power, StripTarget target,
                           long n_samples, RngKey key);

}  // namespace slabgas
