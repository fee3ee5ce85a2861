#include "slabgas/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace slabgas {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

double ball_volume(double r) { return (4.0 / 3.0) * M_PI * r * r * r; }

// orthonormal pair spanning the plane orthogonal to unit vector n
std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
    Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1 = (a - n * a.dot(n)).normalized();
    Vec3 e2{n.y * e1.z - n.z * e1.y, n.z * e1.x - n.x * e1.z, n.x * e1.y - n.y * e1.x};
    return {e1, e2};
}

double target_component(StripTarget target, const Vec3& v, const Vec3& v_star, const Vec3& nu) {
    switch (target) {
        case StripTarget::VStar: return v_star.x;
        case StripTarget::VPrime: return scatter(v, v_star, nu).first.x;
        case StripTarget::VStarPrime: return scatter(v, v_star, nu).second.x;
    }
    return 0.0;
}

}  // namespace

std::pair<Vec3, Vec3> scatter(const Vec3& v, const Vec3& v_star, const Vec3& nu) {
    double q = nu.dot(v - v_star);
    return {v - nu * q, v_star + nu * q};
}

CarlemanReport carleman_pushforward_check(const Vec3& v, double energy, long n_samples, RngKey key) {
    const double radius = std::sqrt(energy);
    const double r1 = v.norm() + radius;

    struct MomentFn {
        std::string name;
        std::function<double(const Vec3&, const Vec3&)> fn;
    };
    const std::vector<MomentFn> fns = {
        {"1", [](const Vec3&, const Vec3&) { return 1.0; }},
        {"vp_x", [](const Vec3& a, const Vec3&) { return a.x; }},
        {"vp_y", [](const Vec3& a, const Vec3&) { return a.y; }},
        {"vsp_x", [](const Vec3&, const Vec3& b) { return b.x; }},
        {"vsp_y", [](const Vec3&, const Vec3& b) { return b.y; }},
        {"vp_sq", [](const Vec3& a, const Vec3&) { return a.norm2(); }},
        {"vsp_sq", [](const Vec3&, const Vec3& b) { return b.norm2(); }},
        {"vp_dot_vsp", [](const Vec3& a, const Vec3& b) { return a.dot(b); }},
    };

    std::vector<Accumulator> acc_a(fns.size()), acc_b(fns.size());

    // route A: (v*, nu) weighted by |(v-v*).nu|, mapped through scatter
    {
        Rng rng(key.sub(0xa));
        const double vol = ball_volume(radius) * kFourPi;
        for (long s = 0; s < n_samples; ++s) {
            Vec3 vs = rng.uniform_ball(radius);
            Vec3 nu = rng.unit_sphere();
            double w = std::abs((v - vs).dot(nu)) * vol;
            auto [vp, vsp] = scatter(v, vs, nu);
            for (std::size_t m = 0; m < fns.size(); ++m) acc_a[m].add(w * fns[m].fn(vp, vsp));
        }
    }

    // route B: v' uniform in B(v, r1), v*' on the orthogonal plane through v.
    // Polar coordinates a = (nu.u) nu give da = h^2/2 dh dnu over the double
    // nu-cover, so the manifold density against dv' dS(v*') is 2/|v'-v|.
    {
        Rng rng(key.sub(0xb));
        const double vol = ball_volume(r1) * (M_PI * r1 * r1);
        for (long s = 0; s < n_samples; ++s) {
            Vec3 vp = v + rng.uniform_ball(r1);
            Vec3 n = vp - v;
            double nn = n.norm();
            double w = 0.0;
            Vec3 vsp = v;
            if (nn > 1e-14) {
                auto [e1, e2] = plane_basis(n / nn);
                double rho = r1 * std::sqrt(rng.uniform());
                double phi = rng.uniform(0.0, 2.0 * M_PI);
                vsp = v + e1 * (rho * std::cos(phi)) + e2 * (rho * std::sin(phi));
                Vec3 v_star = vp + vsp - v;
                if (v_star.norm() <= radius) w = 2.0 / nn * vol;
            }
            for (std::size_t m = 0; m < fns.size(); ++m) acc_b[m].add(w * fns[m].fn(vp, vsp));
        }
    }

    // total mass int |(v-v*).nu| dnu dv* = 4 pi^2 int_{B} |v-v*| dv*, radial quadrature
    double mass = 0.0;
    {
        auto q = gauss_legendre(200, 0.0, radius);
        const double a = v.norm();
        for (int i = 0; i < 200; ++i) {
            double s = q.nodes[i];
            // int_{S^2} |v - s omega| domega closed form
            double inner;
            if (a < 1e-14) inner = 4.0 * M_PI * s;
            else inner = 2.0 * M_PI * (std::pow(a + s, 3) - std::pow(std::abs(a - s), 3)) / (3.0 * a * s);
            mass += q.weights[i] * s * s * inner;
        }
        mass *= 2.0 * M_PI;  // int_{S^2} |u.nu| dnu = 2 pi |u|
    }

    CarlemanReport rep;
    rep.mass_quadrature = mass;
    rep.max_abs_z = 0.0;
    for (std::size_t m = 0; m < fns.size(); ++m) {
        auto ea = acc_a[m].estimate();
        auto eb = acc_b[m].estimate();
        double denom = std::sqrt(ea.stderr_ * ea.stderr_ + eb.stderr_ * eb.stderr_);
        double z = denom > 0 ? (ea.mean - eb.mean) / denom : 0.0;
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
        rep.moments.push_back({fns[m].name, ea, eb, z});
    }
    return rep;
}

GainLoss collision_gain_loss(const DensityFunction& f, const DensityFunction& g, const Position& x,
                             const Vec3& v, double e_cut, long n_quad, RngKey key) {
    if (n_quad < 1 || n_quad > 200000000) throw QuadratureBudgetExceeded();
    const double radius = std::sqrt(e_cut);
    const double r1 = v.norm() + radius;

    Accumulator gain, loss;
    {
        // loss: f(x,v) int g(x,v*) ((v-v*).sigma)_- dv* dsigma, antithetic in v*
        Rng rng(key.sub(0x1055));
        const double fv = f(x, v);
        const double vol = ball_volume(radius) * kFourPi;
        for (long s = 0; s < (n_quad + 1) / 2; ++s) {
            Vec3 vs = rng.uniform_ball(radius);
            Vec3 nu = rng.unit_sphere();
            double pair_sum = 0.0;
            for (int anti = 0; anti < 2; ++anti) {
                Vec3 u = anti ? -vs : vs;
                double w = std::max(-(v - u).dot(nu), 0.0);
                pair_sum += fv * g(x, u) * w * vol;
            }
            loss.add(0.5 * pair_sum);
        }
    }
    {
        // gain in Carleman coordinates: the (.)_- half sphere maps one-to-one
        // onto the manifold with density 1/|v'-v| against dv' dS(v*')
        Rng rng(key.sub(0x6a1a));
        const double vol = ball_volume(r1) * (M_PI * r1 * r1);
        for (long s = 0; s < n_quad; ++s) {
            Vec3 vp = v + rng.uniform_ball(r1);
            Vec3 n = vp - v;
            double nn = n.norm();
            double val = 0.0;
            if (nn > 1e-14) {
                auto [e1, e2] = plane_basis(n / nn);
                double rho = r1 * std::sqrt(rng.uniform());
                double phi = rng.uniform(0.0, 2.0 * M_PI);
                Vec3 vsp = v + e1 * (rho * std::cos(phi)) + e2 * (rho * std::sin(phi));
                Vec3 v_star = vp + vsp - v;
                if (v_star.norm() <= radius) val = f(x, vp) * g(x, vsp) * vol / nn;
            }
            gain.add(val);
        }
    }
    return {gain.estimate(), loss.estimate()};
}

Estimate collision_operator(const DensityFunction& f, const DensityFunction& g, const Position& x,
                            const Vec3& v, double e_cut, long n_quad, RngKey key) {
    auto gl = collision_gain_loss(f, g, x, v, e_cut, n_quad, key);
    double se = std::sqrt(gl.gain.stderr_ * gl.gain.stderr_ + gl.loss.stderr_ * gl.loss.stderr_);
    return {gl.gain.mean - gl.loss.mean, se, std::min(gl.gain.n, gl.loss.n)};
}

double xnorm(const std::function<double(int, const std::vector<Particle>&)>& f_family,
             double beta, double mu, int s_max, long budget, RngKey key, double v_cap) {
    Rng rng(key.sub(0x40));
    double best = 0.0;
    const long per_s = std::max<long>(1, budget / std::max(1, s_max));
    for (int s = 1; s <= s_max; ++s) {
        std::vector<Particle> z(s);
        for (long k = 0; k < per_s; ++k) {
            double vsq = 0.0;
            for (int i = 0; i < s; ++i) {
                z[i].x = Position(rng.uniform(), rng.uniform(), rng.uniform());
                // stratify speed uniformly; the weight grows where f decays
                double speed = v_cap * rng.uniform();
                z[i].v = rng.unit_sphere() * speed;
                vsq += speed * speed;
            }
            double w = std::abs(f_family(s, z)) * std::exp(mu * s + 0.5 * beta * vsq);
            best = std::max(best, w);
        }
    }
    return best;
}

Estimate strip_integral(const Vec3& v, double a, double b, double energy, StripTarget target,
                        long n_samples, RngKey key) {
    if (a >= b) return {0.0, 0.0, n_samples};
    double rem = energy - v.norm2();
    if (rem <= 0.0) return {0.0, 0.0, n_samples};
    const double radius = std::sqrt(rem);
    const double vol = ball_volume(radius) * kFourPi;
    Rng rng(key.sub(0x57));
    Accumulator acc;
    for (long s = 0; s < n_samples; ++s) {
        Vec3 vs = rng.uniform_ball(radius);
        Vec3 nu = rng.unit_sphere();
        double c = target_component(target, v, vs, nu);
        double w = 0.0;
        if (c >= a && c <= b) w = std::abs((v - vs).dot(nu)) * vol;
        acc.add(w);
    }
    return acc.estimate();
}

Estimate singular_integral(const Vec3& v, double eps, double energy, int power, StripTarget target,
                           long n_samples, RngKey key) {
    if (power != 1 && power != 2) throw std::invalid_argument("singular_integral: power is 1 or 2");
    if (eps <= 0.0 || eps > 1.0) throw std::invalid_argument("singular_integral: eps in (0,1]");
    double rem = energy - v.norm2();
    if (rem <= 0.0) return {0.0, 0.0, n_samples};
    const double radius = std::sqrt(rem);
    const double vol = ball_volume(radius) * kFourPi;
    Rng rng(key.sub(0x516));

    // integrand is capped at 1 on the saturated band |v_i.e| <= eps^{1/power},
    // and decays dyadically outside; the cap keeps the estimator bounded
    Accumulator acc;
    for (long s = 0; s < n_samples; ++s) {
        Vec3 vs = rng.uniform_ball(radius);
        Vec3 nu = rng.unit_sphere();
        double c = std::abs(target_component(target, v, vs, nu));
        double base = std::abs((v - vs).dot(nu)) * vol;
        double capped = c == 0.0 ? 1.0 : std::min(eps / std::pow(c, power), 1.0);
        acc.add(capped * base);
    }
    return acc.estimate();
}

}  // namespace slabgas
