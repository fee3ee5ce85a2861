#include "slabgas/duhamel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slabgas {

std::vector<CollisionTree> enumerate_trees(int s, int r) {
    if (r > 4) throw std::invalid_argument("enumerate_trees: r > 4 is out of scope");
    std::vector<CollisionTree> out;
    CollisionTree base{s, r, std::vector<int>(r, 0), std::vector<int>(r, 1)};
    if (r == 0) {
        out.push_back(base);
        return out;
    }
    std::vector<int> a(r, 0);
    for (;;) {
        base.a = a;
        out.push_back(base);
        int c = r - 1;
        while (c >= 0) {
            if (++a[c] < s + c) break;
            a[c] = 0;
            --c;
        }
        if (c < 0) break;
    }
    return out;
}

namespace {

double tensor_f0(const DensityFunction& f0, std::span<const Particle> zs) {
    double p = 1.0;
    for (const auto& z : zs) p *= f0(z.x, z.v);
    return p;
}

double ball_volume(double radius) { return (4.0 / 3.0) * M_PI * radius * radius * radius; }

}  // namespace

TermEstimate estimate_term(PseudoMode mode, int s, int r, double t,
                           std::span<const Particle> z_s, const DensityFunction& f0,
                           const SeriesTruncation& trunc, long n_samples, RngKey key,
                           double epsilon) {
    if (t > trunc.horizon + 1e-12)
        throw std::invalid_argument("estimate_term: t beyond the series horizon");
    if (mode == PseudoMode::Epsilon && epsilon <= 0.0)
        throw std::invalid_argument("estimate_term: hard-sphere mode needs epsilon > 0");

    double root_energy = 0.0;
    for (const auto& z : z_s) root_energy += z.v.norm2();

    const double radius = std::sqrt(trunc.energy);
    const double vol_factor =
        r > 0 ? std::pow(t, r) / std::tgamma(r + 1.0) * std::pow(4.0 * M_PI, r) *
                    std::pow(ball_volume(radius), r)
              : 1.0;

    TermEstimate out;
    auto skeletons = enumerate_trees(s, r);
    double total_mean = 0.0, total_var = 0.0;
    long total_n = 0;

    std::uint64_t tree_id = 0;
    for (const auto& skel : skeletons) {
        for (std::uint64_t mask = 0; mask < (1ULL << r); ++mask, ++tree_id) {
            CollisionTree tree = skel;
            int sign = 1;
            for (int c = 0; c < r; ++c) {
                tree.sigma[c] = (mask >> c) & 1 ? 1 : -1;
                sign *= tree.sigma[c];
            }

            Accumulator acc;
            long inadmissible = 0;
            RngKey tkey = key.sub(0x7e55, tree_id);
            for (long n = 0; n < n_samples; ++n) {
                double value = 0.0;
                if (root_energy <= trunc.energy) {
                    RngKey skey = tkey.sub(0x5a, static_cast<std::uint64_t>(n));
                    Rng rng(skey);
                    CreationParams params;
                    params.times.resize(r);
                    params.nu.resize(r);
                    params.vbar.resize(r);
                    double extra_energy = 0.0;
                    for (int c = 0; c < r; ++c) params.times[c] = rng.uniform(0.0, t);
                    std::sort(params.times.begin(), params.times.end(), std::greater<>());
                    for (int c = 0; c < r; ++c) {
                        params.nu[c] = rng.unit_sphere();
                        params.vbar[c] = rng.uniform_ball(radius);
                        extra_energy += params.vbar[c].norm2();
                    }
                    if (root_energy + extra_energy <= trunc.energy) {
                        std::vector<ReflectionRecord> recs;
                        recs.reserve(s + r);
                        for (int i = 0; i < s + r; ++i)
                            recs.emplace_back(skey.sub(0x0dd, i), true);
                        auto built = build_backward(mode, t, z_s, tree, params, std::move(recs),
                                                    mode == PseudoMode::Epsilon ? epsilon : 0.0);
                        if (!built.complete && built.stop_reason != "sign") ++inadmissible;
                        if (built.complete && built.weight > 0.0)
                            value = built.weight * tensor_f0(f0, built.at_zero) * vol_factor;
                    }
                }
                acc.add(value);
            }
            if (r > 0 && inadmissible * 2 > n_samples) throw DegenerateSampleExcess();

            SignedTreeEstimate ste{std::move(tree), acc.estimate(), inadmissible};
            total_mean += sign * ste.estimate.mean;
            total_var += ste.estimate.stderr_ * ste.estimate.stderr_;
            total_n += ste.estimate.n;
            out.per_tree.push_back(std::move(ste));
        }
    }
    out.total = {total_mean, std::sqrt(total_var), total_n};
    return out;
}

double bbgky_prefactor(double n_particles, int s, int r) {
    double eps2 = 1.0 / n_particles;  // N eps^2 = 1
    double p = 1.0;
    for (int i = 0; i < r; ++i) p *= (n_particles - s - i) * eps2;
    return p;
}

SeriesResult sum_series(PseudoMode mode, int s, double t, std::span<const Particle> z_s,
                        const DensityFunction& f0, const SeriesTruncation& trunc,
                        long n_per_term, RngKey key, const NormParams& norm, double f0_norm,
                        double n_particles) {
    if (mode == PseudoMode::Epsilon && n_particles <= s)
        throw std::invalid_argument("sum_series: hard-sphere mode needs N > s");
    SeriesResult out;
    double mean = 0.0, var = 0.0;
    long n_min = std::numeric_limits<long>::max();
    const double epsilon = mode == PseudoMode::Epsilon ? 1.0 / std::sqrt(n_particles) : 0.0;
    for (int r = 0; r <= trunc.max_creations; ++r) {
        double pref = mode == PseudoMode::Epsilon ? bbgky_prefactor(n_particles, s, r) : 1.0;
        auto term = estimate_term(mode, s, r, t, z_s, f0, trunc, n_per_term, key.sub(0x5e7, r),
                                  epsilon);
        mean += pref * term.total.mean;
        var += pref * pref * term.total.stderr_ * term.total.stderr_;
        n_min = std::min(n_min, term.total.n);
        out.prefactors.push_back(pref);
        out.terms.push_back(std::move(term));
    }
    out.total = {mean, std::sqrt(var), n_min};

    double root_energy = 0.0;
    for (const auto& z : z_s) root_energy += z.v.norm2();
    const double envelope =
        f0_norm * std::exp(-(3.0 * norm.beta / 8.0) * root_energy - (norm.mu - 1.0) * s);
    out.remainder_creations = std::pow(2.0, -trunc.max_creations) * envelope;
    out.remainder_energy = 2.0 * std::exp(-norm.beta * trunc.energy / 16.0) * envelope;
    return out;
}

ContinuityReport continuity_bound_check(int s, int r_max, double t, const NormParams& norm,
                                        const DensityFunction& f0, double energy,
                                        int grid_points, long n_samples, RngKey key) {
    if (r_max > 3) throw std::invalid_argument("continuity_bound_check: r_max > 3 out of scope");

    // z_s sample grid: uniform positions, Maxwellian velocities plus a
    // zero-velocity point, where the Gaussian-weighted sup is attained
    std::vector<std::vector<Particle>> grid;
    Rng rng(key.sub(0x96d));
    for (int g = 0; g < grid_points; ++g) {
        std::vector<Particle> z(s);
        for (int i = 0; i < s; ++i) {
            z[i].x = Position(rng.uniform(), rng.uniform(), rng.uniform());
            z[i].v = g == 0 ? Vec3{0, 0, 0} : sample_maxwellian(rng, norm.beta);
        }
        grid.push_back(std::move(z));
    }

    SeriesTruncation trunc{r_max, energy, std::max(t, 1.0)};
    ContinuityReport rep;
    for (int r = 0; r <= r_max; ++r) {
        double sup = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            auto term = estimate_term(PseudoMode::Zero, s, r, t, grid[g], f0, trunc, n_samples,
                                      key.sub(0xc0 + r, g));
            double vsq = 0.0;
            for (const auto& z : grid[g]) vsq += z.v.norm2();
            double w = std::exp((norm.mu - 1.0) * s + (3.0 * norm.beta / 8.0) * vsq);
            sup = std::max(sup, std::abs(term.total.mean) * w);
        }
        rep.sup_per_r.push_back(sup);
        // per-creation rate with the t^r/r! structure divided out, so the
        // fit telescopes to one geometric constant
        if (r >= 1)
            rep.rate_per_r.push_back(rep.sup_per_r[r] * r / (t * rep.sup_per_r[r - 1]));
    }
    rep.fitted_rate = rep.rate_per_r.empty() ? 0.0 : rep.rate_per_r[0];
    rep.horizon = rep.fitted_rate > 0.0 ? 1.0 / (2.0 * rep.fitted_rate) : 1.0;
    return rep;
}

}  // namespace slabgas
