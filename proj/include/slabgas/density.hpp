#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "slabgas/geometry.hpp"
#include "slabgas/random.hpp"
#include "slabgas/vec3.hpp"

// One-particle densities on the slab phase space, carried as evaluation
// contracts with a Gaussian domination certificate |f| <= C exp(-beta|v|^2/2).

namespace slabgas {

struct DensityFunction {
    std::function<double(const Position&, const Vec3&)> value;
    double cert_C = 1.0;
    double cert_beta = 1.0;
    // invariant in (x2,x3) and axisymmetric about e in v
    bool slab_symmetric = false;

    double operator()(const Position& x, const Vec3& v) const { return value(x, v); }
};

// A density that can also be sampled exactly (for initial configurations).
struct InitialDensity {
    DensityFunction f;
    std::function<Position(Rng&)> sample_position;
    std::function<Vec3(Rng&)> sample_velocity;
    double beta = 1.0;     // Maxwell parameter of the velocity factor
    double rho_max = 1.0;  // sup of the spatial profile
    std::string name;
};

inline double maxwell_weight(const Vec3& v, double beta) {
    return std::pow(beta / (2.0 * M_PI), 1.5) * std::exp(-0.5 * beta * v.norm2());
}

// Equilibrium: uniform in x, Maxwellian in v.
inline InitialDensity make_maxwell_uniform(double beta) {
    InitialDensity d;
    d.f.value = [beta](const Position&, const Vec3& v) { return maxwell_weight(v, beta); };
    d.f.cert_C = std::pow(beta / (2.0 * M_PI), 1.5);
    d.f.cert_beta = beta;
    d.f.slab_symmetric = true;
    d.sample_position = [](Rng& r) { return Position(r.uniform(), r.uniform(), r.uniform()); };
    d.sample_velocity = [beta](Rng& r) { return sample_maxwellian(r, beta); };
    d.beta = beta;
    d.rho_max = 1.0;
    d.name = "maxwell_uniform";
    return d;
}

// Non-equilibrium but wall-compatible profile: rho(x1) = 1 + a cos(pi x1)
// (unit mass, isotropic in direction). 0 <= a < 1.
inline InitialDensity make_maxwell_cosine(double beta, double amplitude) {
    if (amplitude < 0.0 || amplitude >= 1.0)
        throw std::invalid_argument("make_maxwell_cosine: amplitude must be in [0,1)");
    const double a = amplitude;
    InitialDensity d;
    d.f.value = [beta, a](const Position& x, const Vec3& v) {
        return (1.0 + a * std::cos(M_PI * x.x1)) * maxwell_weight(v, beta);
    };
    d.f.cert_C = (1.0 + a) * std::pow(beta / (2.0 * M_PI), 1.5);
    d.f.cert_beta = beta;
    d.f.slab_symmetric = true;
    d.sample_position = [a](Rng& r) {
        // invert F(x) = x + (a/pi) sin(pi x) by Newton iteration
        double u = r.uniform();
        double x = u;
        for (int it = 0; it < 50; ++it) {
            double fx = x + (a / M_PI) * std::sin(M_PI * x) - u;
            double dfx = 1.0 + a * std::cos(M_PI * x);
            double step = fx / dfx;
            x -= step;
            x = std::min(1.0, std::max(0.0, x));
            if (std::abs(step) < 1e-14) break;
        }
        return Position(x, r.uniform(), r.uniform());
    };
    d.sample_velocity = [beta](Rng& r) { return sample_maxwellian(r, beta); };
    d.beta = beta;
    d.rho_max = 1.0 + a;
    d.name = "maxwell_cosine";
    return d;
}

// Two-temperature mixture, uniform in x: isotropic (hence wall-compatible)
// but far from velocity equilibrium, so the collision operator acts on it
// at order one. Used as the probe for the short-time contraction fit.
inline InitialDensity make_maxwell_bimodal(double beta) {
    InitialDensity d;
    const double beta_cold = 4.0 * beta;  // both components dominated by e^{-beta|v|^2/2}
    d.f.value = [beta, beta_cold](const Position&, const Vec3& v) {
        return 0.5 * (maxwell_weight(v, beta) + maxwell_weight(v, beta_cold));
    };
    d.f.cert_beta = beta;
    d.f.cert_C =
        0.5 * (std::pow(beta / (2.0 * M_PI), 1.5) + std::pow(beta_cold / (2.0 * M_PI), 1.5));
    d.f.slab_symmetric = true;
    d.sample_position = [](Rng& r) { return Position(r.uniform(), r.uniform(), r.uniform()); };
    d.sample_velocity = [beta, beta_cold](Rng& r) {
        return sample_maxwellian(r, r.uniform() < 0.5 ? beta : beta_cold);
    };
    d.beta = beta;
    d.rho_max = 1.0;
    d.name = "maxwell_bimodal";
    return d;
}

// Direction-dependent bump: not compatible with the diffuse wall law.
// Used to exercise the compatibility residual; not exactly samplable.
inline DensityFunction make_direction_bump(double beta, double amplitude) {
    DensityFunction f;
    f.value = [beta, amplitude](const Position&, const Vec3& v) {
        double c = v.x / std::sqrt(v.norm2() + 1.0);
        return (1.0 + amplitude * c) * maxwell_weight(v, beta);
    };
    f.cert_C = (1.0 + amplitude) * std::pow(beta / (2.0 * M_PI), 1.5);
    f.cert_beta = beta;
    f.slab_symmetric = true;  // axisymmetric about e, uniform in x
    return f;
}

inline InitialDensity make_initial_density(const std::string& name, double beta, double amplitude) {
    if (name == "maxwell_uniform") return make_maxwell_uniform(beta);
    if (name == "maxwell_cosine") return make_maxwell_cosine(beta, amplitude);
    throw std::invalid_argument("unknown initial density: " + name);
}

}  // namespace slabgas
