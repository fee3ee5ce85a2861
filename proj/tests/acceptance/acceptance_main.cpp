// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are fixed here, not calibrated at run time.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "slabgas/boltzmann.hpp"
#include "slabgas/density.hpp"
#include "slabgas/duhamel.hpp"
#include "slabgas/harness.hpp"
#include "slabgas/kernels.hpp"
#include "slabgas/pseudotrajectory.hpp"

using namespace slabgas;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("%s  %2d %-24s %s  (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

long g_reflection_bound_violations = 0;

// ---------------------------------------------------------------------------

void criterion_conservation() {
    Timer timer;
    const int n = 50;
    const double beta = 1.0;
    const double eps = 1.0 / std::sqrt(static_cast<double>(n));
    RngKey key{20250, 0};
    auto init = sample_initial_configuration(
        key, n, eps, [](Rng& r) { return Position(r.uniform(), r.uniform(), r.uniform()); },
        [beta](Rng& r) { return sample_maxwellian(r, beta); });
    HardSphereSim sim(std::move(init.particles), std::move(init.records), eps, 1e9);

    std::vector<double> speeds(n);
    for (int i = 0; i < n; ++i) speeds[i] = sim.particles()[i].v.norm();
    double max_speed_jump = 0.0;
    sim.set_event_callback([&](const EventReport& ev) {
        if (ev.kind == EventKind::WallReflection && !ev.grazed) {
            double s_new = sim.particles()[ev.i].v.norm();
            max_speed_jump = std::max(max_speed_jump,
                                      std::abs(s_new - speeds[ev.i]) / speeds[ev.i]);
        }
        speeds[ev.i] = sim.particles()[ev.i].v.norm();
        if (ev.j >= 0) speeds[ev.j] = sim.particles()[ev.j].v.norm();
    });

    const double e0 = sim.kinetic_energy();
    double min_dist = 1e9;
    bool ok = true;
    try {
        for (long events = 0; events < 10000; ++events) {
            if (!sim.step_to_next_event(1e9)) break;
            if (events % 250 == 0) min_dist = std::min(min_dist, sim.min_pair_distance());
        }
    } catch (const ReflectionBoundViolated&) {
        ++g_reflection_bound_violations;
        ok = false;
    }
    double drift = std::abs(sim.kinetic_energy() - e0) / e0;
    bool pass = ok && drift < 1e-9 && max_speed_jump < 1e-12 && min_dist >= eps - 1e-12;
    report(1, "conservation", pass,
           fmt("energy drift %.2e, speed jump %.2e, min dist %.4f", drift, max_speed_jump,
               min_dist),
           timer.elapsed());
}

void criterion_diffuse_law() {
    Timer timer;
    Rng rng(31337);
    const long n = 100000;
    std::vector<double> cosines;
    cosines.reserve(n);
    Accumulator mean;
    for (long i = 0; i < n; ++i) {
        Vec3 w = sample_diffuse_direction(rng, +1);
        cosines.push_back(w.x);
        mean.add(w.x);
    }
    double d = ks_statistic(cosines, [](double u) { return u * u; });
    double crit = ks_critical_99(n);
    auto est = mean.estimate();
    double dev = std::abs(est.mean - 2.0 / 3.0);
    bool pass = d < crit && dev < 3.0 * est.stderr_;
    report(2, "diffuse-law", pass,
           fmt("KS %.5f < %.5f, mean dev %.2e < 3se %.2e", d, crit, dev, 3.0 * est.stderr_),
           timer.elapsed());
}

void criterion_stationarity() {
    Timer timer;
    const int n = 256, replicas = 200;
    const double beta = 1.0, t_end = 0.5;
    const double eps = 1.0 / 16.0;
    auto f0 = make_maxwell_uniform(beta);
    std::vector<double> times{t_end};
    EnsembleResult ens;
    bool ok = true;
    try {
        ens = run_ensemble(f0, n, eps, replicas, times, RngKey{424242, 0}, 0);
    } catch (const ReflectionBoundViolated&) {
        ++g_reflection_bound_violations;
        ok = false;
    }
    std::vector<double> v1;
    Accumulator energy;
    for (const auto& ps : ens.by_time[0].replicas) {
        for (int i = 0; i < 16; ++i) v1.push_back(ps[i].v.x);  // subsample: near-independent
        double e = 0.0;
        for (const auto& p : ps) e += p.v.norm2();
        energy.add(e / n);
    }
    double d = ks_statistic(v1, [&](double u) { return 0.5 * std::erfc(-u * std::sqrt(beta / 2.0)); });
    double p = ks_pvalue(d, static_cast<long>(v1.size()));
    auto een = energy.estimate();
    double dev = std::abs(een.mean - 3.0 / beta);
    bool pass = ok && p > 0.01 && dev < 3.0 * een.stderr_;
    report(3, "stationarity", pass,
           fmt("velocity KS p %.3f, energy dev %.2e < 3se %.2e", p, dev, 3.0 * een.stderr_),
           timer.elapsed());
}

void criterion_reflection_bound() {
    Timer timer;
    // dedicated battery on top of whatever the other criteria already ran
    long violations = g_reflection_bound_violations;
    RngKey key{77001, 0};
    for (int trial = 0; trial < 200; ++trial) {
        Rng rng(key.sub(trial));
        Vec3 v = sample_maxwellian(rng, 1.0);
        std::vector<Particle> ps{{Position(rng.uniform(), rng.uniform(), rng.uniform()), v}};
        std::vector<ReflectionRecord> recs;
        recs.emplace_back(key.sub(0x7ec, trial), false);
        HardSphereSim sim(std::move(ps), std::move(recs), 0.01, 8.0);
        try {
            sim.run_to(8.0);
        } catch (const ReflectionBoundViolated&) {
            ++violations;
        }
    }
    report(4, "reflection-bound", violations == 0, fmt("%ld violations", violations),
           timer.elapsed());
}

void criterion_two_shock() {
    Timer timer;
    const int n = 16;
    const double eps = 0.25, beta = 1.0;
    RngKey key{55, 0};
    bool pass = true;
    std::string detail;
    for (double delta : {4e-3, 2e-3}) {
        int reps_hi = delta > 3e-3 ? 300000 : 600000;
        auto f1 = double_shock_fraction(n, eps, beta, delta, reps_hi,
                                        key.sub(1, static_cast<std::uint64_t>(delta * 1e6)));
        auto f2 = double_shock_fraction(n, eps, beta, delta / 2.0, 2 * reps_hi,
                                        key.sub(2, static_cast<std::uint64_t>(delta * 1e6)));
        double ratio = f1.mean / f2.mean;
        double sigma = ratio * std::sqrt(std::pow(f1.stderr_ / f1.mean, 2) +
                                         std::pow(f2.stderr_ / f2.mean, 2));
        bool ok = std::abs(ratio - 4.0) < 3.0 * sigma;
        pass = pass && ok;
        detail += fmt("delta %.0e: ratio %.2f +- %.2f; ", delta, ratio, sigma);
    }
    report(5, "two-shock-scaling", pass, detail, timer.elapsed());
}

void criterion_carleman() {
    Timer timer;
    RngKey key{70, 0};
    bool pass = true;
    std::string detail;

    {
        Rng rng(7171);
        double worst = 0.0;
        for (long i = 0; i < 1000000; ++i) {
            Vec3 v = rng.gaussian3(1.0), w = rng.gaussian3(1.0), nu = rng.unit_sphere();
            auto [a, b] = scatter(v, w, nu);
            worst = std::max(worst, std::abs((a - v).dot(b - v)));
        }
        pass = pass && worst < 1e-10;
        detail += fmt("orth %.1e; ", worst);
    }
    {
        auto rep = carleman_pushforward_check({0.3, 0.2, 0.1}, 9.0, 400000, key.sub(1));
        pass = pass && rep.max_abs_z < 3.0;
        detail += fmt("push z %.2f; ", rep.max_abs_z);
    }
    {
        const Vec3 v{0.3, 0.2, 0.1};
        auto wide = strip_integral(v, 0.2, 0.4, 9.0, StripTarget::VStar, 800000, key.sub(2));
        auto half = strip_integral(v, 0.2, 0.3, 9.0, StripTarget::VStar, 800000, key.sub(3));
        double ratio = wide.mean / half.mean;
        pass = pass && std::abs(ratio - 2.0) < 0.2;
        detail += fmt("strip %.3f; ", ratio);
    }
    for (int power : {1, 2}) {
        const Vec3 v{0.3, 0.2, 0.1};
        double ref = 0.0;
        bool ok = true;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            auto est = singular_integral(v, eps, 9.0, power, StripTarget::VStar, 400000,
                                         key.sub(4, power * 100));
            double denom = power == 1 ? 81.0 * eps * std::abs(std::log(eps))
                                      : 81.0 * std::sqrt(eps);
            double c = est.mean / denom;
            if (ref == 0.0) ref = c;
            ok = ok && c > 0.5 * ref && c < 1.5 * ref;
        }
        pass = pass && ok;
        detail += fmt("pow%d %s; ", power, ok ? "stable" : "UNSTABLE");
    }
    report(6, "carleman-suite", pass, detail, timer.elapsed());
}

double fit_big_t(double beta, double mu, RngKey key) {
    auto probe = make_maxwell_bimodal(beta);
    auto rep = continuity_bound_check(1, 1, 0.1, {beta, mu}, probe.f, 9.0, 8, 60000, key);
    return rep.horizon;
}

void criterion_continuity_envelope() {
    Timer timer;
    const double beta = 1.0, mu = 2.4;
    RngKey key{90, 0};
    auto probe = make_maxwell_bimodal(beta);
    double big_t = fit_big_t(beta, mu, key.sub(0xf17));
    std::vector<double> rates;
    for (double t : {big_t / 4.0, big_t / 2.0}) {
        auto rep = continuity_bound_check(1, 2, t, {beta, mu}, probe.f, 9.0, 6, 60000,
                                          key.sub(0xc, static_cast<std::uint64_t>(t * 1e6)));
        rates.push_back(rep.rate_per_r[0]);
        rates.push_back(rep.rate_per_r[1]);
    }
    double ref = rates[0];
    bool pass = true;
    std::string detail = fmt("T %.3f, rates", big_t);
    for (double r : rates) {
        detail += fmt(" %.3f", r);
        pass = pass && r > 0.5 * ref && r < 1.5 * ref;
    }
    report(7, "continuity-envelope", pass, detail, timer.elapsed());
}

void criterion_series_vs_solver() {
    Timer timer;
    const double beta = 1.0, mu = 2.4;
    RngKey key{80, 0};
    double big_t = fit_big_t(beta, mu, key.sub(0xf17));
    const double t = big_t / 4.0;
    auto f0 = make_maxwell_cosine(beta, 0.3);

    GridSpec spec;
    spec.dt = t / 8.0;
    std::vector<double> snaps{t};
    auto solved = picard_solve(f0.f, t, 1e-8, spec, snaps);

    SeriesTruncation trunc{2, 16.0, big_t};
    const double radius = std::sqrt(trunc.energy);
    struct Window {
        double lo, hi;
    };
    const Window windows[2] = {{0.15, 0.30}, {0.60, 0.75}};
    const char* names[3] = {"one", "v1", "speed_sq"};
    bool pass = true;
    std::string detail = fmt("t %.3f, gaps/se", t);
    for (const auto& w : windows) {
        Accumulator acc[3];
        const long n_outer = 60000;
        Rng rng(key.sub(0x0b5, static_cast<std::uint64_t>(w.lo * 100)));
        for (long i = 0; i < n_outer; ++i) {
            Position x(rng.uniform(w.lo, w.hi), 0.5, 0.5);
            Vec3 v = sample_maxwellian(rng, beta);
            double inv_dens = 1.0 / maxwell_weight(v, beta);
            double fs = 0.0;
            if (v.norm() <= radius) {
                std::vector<Particle> z{{x, v}};
                auto series = sum_series(PseudoMode::Zero, 1, t, z, f0.f, trunc, 1,
                                         key.sub(0x5e4, i), {beta, mu}, 0.1);
                fs = series.total.mean;
            }
            acc[0].add(inv_dens * fs);
            acc[1].add(inv_dens * fs * v.x);
            acc[2].add(inv_dens * fs * v.norm2());
        }
        for (int o = 0; o < 3; ++o) {
            auto est = acc[o].estimate();
            auto obs = make_observable(names[o]);
            double ref = solved.snapshots[0].observable(obs.phi_reduced, w.lo, w.hi);
            double gap = std::abs(est.mean - ref);
            bool ok = gap < 3.0 * est.stderr_;
            pass = pass && ok;
            detail += fmt(" %.2f", est.stderr_ > 0 ? gap / est.stderr_ : 0.0);
        }
    }
    report(8, "series-vs-solver", pass, detail, timer.elapsed());
}

void criterion_pseudo_continuity() {
    Timer timer;
    const double t = 0.5;
    RngKey key{60, 0};
    bool pass = true;
    std::string detail;
    double c_ref = 0.0;
    for (double eps : {1e-2, 1e-3}) {
        Accumulator dist;
        long taken = 0;
        for (long n = 0; n < 40000 && taken < 6000; ++n) {
            Rng rng(key.sub(0x9e, n));
            std::vector<Particle> roots{
                {Position(rng.uniform(), rng.uniform(), rng.uniform()), rng.uniform_ball(3.0)}};
            CollisionTree tree{1, 1, {0}, {rng.uniform() < 0.5 ? 1 : -1}};
            CreationParams params{{rng.uniform(0.0, t)}, {rng.unit_sphere()},
                                  {rng.uniform_ball(3.0)}};
            std::vector<ReflectionRecord> re, rz;
            for (int i = 0; i < 2; ++i) {
                re.emplace_back(key.sub(0x0dd ^ n, i), true);
                rz.emplace_back(key.sub(0x0dd ^ n, i), true);
            }
            auto zb = build_backward(PseudoMode::Zero, t, roots, tree, params, std::move(rz), eps);
            if (!zb.complete) continue;
            auto eb = build_backward(PseudoMode::Epsilon, t, roots, tree, params, std::move(re),
                                     eps);
            if (!eb.complete) continue;
            if (classify_discrepancy(eb, zb, eps) != DiscrepancyClass::Clean) continue;
            dist.add(final_distance(eb.at_zero, zb.at_zero));
            ++taken;
        }
        double c = dist.mean() / (eps * std::abs(std::log(eps)));
        if (c_ref == 0.0) c_ref = c;
        pass = pass && c > 0.5 * c_ref && c < 1.5 * c_ref && taken >= 2000;
        detail += fmt("eps %.0e: C %.3f (n=%ld); ", eps, c, taken);
    }
    report(9, "pseudo-continuity", pass, detail, timer.elapsed());
}

void criterion_bad_set_decay() {
    Timer timer;
    CollisionTree skeleton{1, 2, {0, 1}, {1, 1}};
    std::vector<double> eps_list{1e-1, 1e-2};
    auto rows = bad_set_decay_study(1, 2, 1.0, skeleton, eps_list, 60000, 9.0, RngKey{61, 0}, 0);
    bool pass = true;
    std::string detail;
    for (int c = 1; c <= static_cast<int>(DiscrepancyClass::Grazing); ++c) {
        const BadSetRow *coarse = nullptr, *fine = nullptr;
        for (const auto& r : rows) {
            if (static_cast<int>(r.cls) != c) continue;
            if (r.epsilon == 1e-1) coarse = &r;
            if (r.epsilon == 1e-2) fine = &r;
        }
        double z = (coarse->frequency - fine->frequency) /
                   std::sqrt(coarse->stderr_ * coarse->stderr_ + fine->stderr_ * fine->stderr_ +
                             1e-30);
        bool ok = fine->frequency < coarse->frequency && z > 1.645;
        pass = pass && ok;
        detail += fmt("%s z %.1f; ", to_string(static_cast<DiscrepancyClass>(c)), z);
    }
    report(10, "bad-set-decay", pass, detail, timer.elapsed());
}

void criterion_headline() {
    Timer timer;
    ExperimentConfig cfg;
    cfg.n_list = {64, 256, 1024};
    cfg.times = {0.05, 0.1, 0.2};
    cfg.replicas = 200;
    cfg.seed = 1234;
    auto rep = convergence_sweep(cfg);
    bool pass = true;
    std::string detail = fmt("T %.3f; ", rep.fitted_horizon);
    for (const auto& v : rep.verdicts) {
        pass = pass && v.non_increasing && v.final_gap_small;
        detail += fmt("%s@%.2f:%c%c ", v.observable.c_str(), v.t, v.non_increasing ? '+' : 'X',
                      v.final_gap_small ? '+' : 'X');
    }
    report(11, "lanford-convergence", pass, detail, timer.elapsed());
}

void criterion_determinism() {
    Timer timer;
    ExperimentConfig cfg;
    cfg.n_list = {16, 36};
    cfg.times = {0.04, 0.08};
    cfg.replicas = 24;
    cfg.bins = 8;
    cfg.eval_bin = 2;
    cfg.seed = 99;
    cfg.solver.nx = 9;
    cfg.solver.ns = 20;
    cfg.solver.nc = 13;
    cfg.solver.v_max = 5.0;
    cfg.solver.dt = 0.01;
    cfg.solver.collision_nodes = 200;

    auto once = [&]() {
        auto rep = convergence_sweep(cfg);
        CollisionTree skel{1, 1, {0}, {1}};
        std::vector<double> eps_list{0.1};
        auto rows = bad_set_decay_study(1, 1, 0.5, skel, eps_list, 2000, 9.0,
                                        RngKey{cfg.seed, 0}.sub(0xbad), 0);
        return sweep_json(rep, cfg) + marginals_csv(rep.marginal_rows) + badsets_csv(rows) +
               manifest_json(cfg, rep.fitted_horizon);
    };
    std::string a = once();
    std::string b = once();
    report(12, "determinism", a == b,
           fmt("%zu bytes %s", a.size(), a == b ? "identical" : "DIFFER"), timer.elapsed());
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_conservation();
    criterion_diffuse_law();
    criterion_stationarity();
    criterion_reflection_bound();
    criterion_two_shock();
    criterion_carleman();
    criterion_continuity_envelope();
    criterion_series_vs_solver();
    criterion_pseudo_continuity();
    criterion_bad_set_decay();
    criterion_headline();
    criterion_determinism();
    std::printf("%d failure(s)\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
