#include "slabgas/boltzmann.hpp"

#include <cmath>

#include "doctest.h"
#include "slabgas/duhamel.hpp"

using namespace slabgas;

namespace {

GridSpec small_grid() {
    GridSpec s;
    s.nx = 11;
    s.ns = 26;
    s.nc = 17;
    s.v_max = 5.5;
    s.dt = 0.02;
    s.collision_nodes = 512;
    return s;
}

}  // namespace

TEST_CASE("transport: free flight is exact before the first wall hit") {
    auto g = make_maxwell_cosine(1.0, 0.4);
    Position x(0.6, 0.5, 0.5);
    Vec3 v{0.5, 0.2, 0.0};
    // backward flight hits x1=0 after 1.2 time units
    double t = 0.3;
    double direct = g.f(advect(x, v, -t), v);
    CHECK(transport_apply_series(g.f, t, x, v) == doctest::Approx(direct).epsilon(1e-13));
    Rng rng(3);
    auto mc = transport_apply_mc(g.f, t, x, v, rng, 10);
    CHECK(mc.mean == doctest::Approx(direct).epsilon(1e-13));
    CHECK(mc.stderr_ == 0.0);
}

TEST_CASE("transport: maxwellian is stationary under the wall law") {
    auto g = make_maxwell_uniform(1.0);
    // points whose backward flight crosses the wall
    for (double t : {0.8, 2.0}) {
        Position x(0.2, 0.5, 0.5);
        Vec3 v{0.9, 0.3, 0.1};
        double val = transport_apply_series(g.f, t, x, v, 32, 24);
        CHECK(val == doctest::Approx(g.f(x, v)).epsilon(5e-4));
    }
}

TEST_CASE("transport: series and monte carlo agree") {
    auto g = make_maxwell_cosine(1.0, 0.5);
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        Position x(0.1 + 0.2 * trial, 0.4, 0.6);
        Vec3 v{0.6 - 0.2 * trial, 0.3, -0.2};
        double t = 0.6 + 0.4 * trial;
        double series = transport_apply_series(g.f, t, x, v, 28, 20);
        auto mc = transport_apply_mc(g.f, t, x, v, rng, 60000);
        CHECK(std::abs(series - mc.mean) < 3.0 * mc.stderr_ + 2e-4);
    }
}

TEST_CASE("future set membership") {
    Position on_wall(0.0, 0.2, 0.3);
    CHECK(future_set_membership(0.5, 0.5, on_wall, {1.0, 0.0, 0.0}));
    CHECK(!future_set_membership(0.5, 0.4, on_wall, {1.0, 0.0, 0.0}));  // tau < anchor
    CHECK(!future_set_membership(0.0, 1.0, Position(0.5, 0, 0), {0.0, 1.0, 0.0}));

    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        Position x(rng.uniform(), rng.uniform(), rng.uniform());
        Vec3 v = rng.gaussian3(1.0);
        if (std::abs(v.x) < 1e-6) continue;
        auto hit = wall_hit_time(x, -v);
        REQUIRE(hit.has_value());
        double t0 = rng.uniform(0.0, 2.0);
        CHECK(future_set_membership(t0, t0 + hit->time, x, v));
        CHECK(!future_set_membership(t0, t0 + hit->time + 0.01, x, v));
    }
}

TEST_CASE("compatibility residual") {
    auto iso = make_maxwell_cosine(1.0, 0.3);
    CHECK(compatibility_residual(iso.f) < 1e-10);
    auto mx = make_maxwell_uniform(0.7);
    CHECK(compatibility_residual(mx.f) < 1e-10);
    auto bump = make_direction_bump(1.0, 0.5);
    CHECK(compatibility_residual(bump) > 1e-3);
}

TEST_CASE("grid density: projection, mass, observables") {
    auto f0 = make_maxwell_cosine(1.0, 0.4);
    auto spec = small_grid();
    auto g = project_to_grid(f0.f, spec);
    CHECK(g.mass() == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(g.energy_moment() == doctest::Approx(3.0).epsilon(5e-3));
    // density average over a bin against the analytic profile
    double lo = 0.0, hi = 0.25;
    double ref = 1.0 + 0.4 * (std::sin(M_PI * hi) - std::sin(M_PI * lo)) / (M_PI * (hi - lo));
    double got = g.observable([](double, double) { return 1.0; }, lo, hi);
    CHECK(got == doctest::Approx(ref).epsilon(1e-2));
    // interpolation clamps negative and vanishes beyond the speed cutoff
    CHECK(g.value(0.5, spec.v_max * 1.1, 0.0) == 0.0);
}

TEST_CASE("collision quadrature annihilates the maxwellian") {
    auto f0 = make_maxwell_uniform(1.0);
    auto spec = small_grid();
    auto g = project_to_grid(f0.f, spec);
    auto quad = make_collision_quad(spec.collision_nodes, 1.0, spec.v_max, 7);
    auto c = collision_apply(g, quad);
    double peak = std::pow(1.0 / (2.0 * M_PI), 1.5);
    double worst = 0.0;
    for (int j = 0; j < spec.ns; ++j)
        for (int k = 0; k < spec.nc; ++k)
            worst = std::max(worst, std::abs(c.at(5, j, k)));
    CHECK(worst < 0.05 * peak);  // interpolation error only
}

TEST_CASE("picard: zero data stays zero, equilibrium stays fixed") {
    DensityFunction zero;
    zero.value = [](const Position&, const Vec3&) { return 0.0; };
    zero.slab_symmetric = true;
    auto spec = small_grid();
    std::vector<double> snaps{0.1};
    auto rz = picard_solve(zero, 0.1, 1e-10, spec, snaps);
    CHECK(rz.snapshots[0].mass() == 0.0);

    auto mx = make_maxwell_uniform(1.0);
    auto rm = picard_solve(mx.f, 0.12, 1e-7, spec, {&snaps[0], 1});
    auto g0 = project_to_grid(mx.f, spec);
    double scale = std::pow(1.0 / (2.0 * M_PI), 1.5);
    double worst = 0.0;
    for (int i = 0; i < spec.nx; ++i)
        for (int j = 0; j < spec.ns; ++j)
            for (int k = 0; k < spec.nc; ++k)
                worst = std::max(worst,
                                 std::abs(rm.snapshots[0].at(i, j, k) - g0.at(i, j, k)));
    CHECK(worst < 5e-3 * scale);
    CHECK(rm.snapshots[0].mass() == doctest::Approx(g0.mass()).epsilon(2e-3));
}

TEST_CASE("picard: mass and energy are conserved for a profile") {
    auto f0 = make_maxwell_cosine(1.0, 0.4);
    auto spec = small_grid();
    std::vector<double> snaps{0.0, 0.2};
    auto res = picard_solve(f0.f, 0.2, 1e-7, spec, snaps);
    double m0 = res.snapshots[0].mass(), m1 = res.snapshots[1].mass();
    double e0 = res.snapshots[0].energy_moment(), e1 = res.snapshots[1].energy_moment();
    CHECK(m1 == doctest::Approx(m0).epsilon(3e-3));
    CHECK(e1 == doctest::Approx(e0).epsilon(5e-3));
    CHECK(res.iterations >= 2);
}

TEST_CASE("picard rejects non-symmetric densities and off-grid snapshots") {
    DensityFunction f;
    f.value = [](const Position&, const Vec3&) { return 0.0; };
    f.slab_symmetric = false;
    auto spec = small_grid();
    std::vector<double> snaps{0.05};
    CHECK_THROWS_AS(picard_solve(f, 0.1, 1e-6, spec, snaps), std::invalid_argument);
    f.slab_symmetric = true;
    std::vector<double> bad{0.037};
    CHECK_THROWS_AS(picard_solve(f, 0.1, 1e-6, spec, bad), std::invalid_argument);
}

TEST_CASE("first picard iterate matches the r<=1 series") {
    auto f0 = make_maxwell_cosine(1.0, 0.4);
    auto spec = small_grid();
    spec.dt = 0.01;
    const double t = 0.04;
    std::vector<double> snaps{t};
    auto solved = picard_solve(f0.f, t, 1e-8, spec, snaps);

    SeriesTruncation trunc{1, 18.0, 0.5};
    NormParams norm{1.0, 2.4};
    for (double x1 : {0.31, 0.52}) {
        for (double c : {0.55, -0.35}) {
            const double speed = 1.1;
            Vec3 v{speed * c, speed * std::sqrt(1.0 - c * c), 0.0};
            std::vector<Particle> z{{Position(x1, 0.5, 0.5), v}};
            auto series = sum_series(PseudoMode::Zero, 1, t, z, f0.f, trunc, 120000,
                                     RngKey{17, 0}, norm, 0.1);
            double grid_val = solved.snapshots[0].value(x1, speed, c);
            INFO("x1 ", x1, " c ", c, " series ", series.total.mean, " grid ", grid_val);
            CHECK(std::abs(series.total.mean - grid_val) <
                  3.0 * series.total.stderr_ + 0.02 * std::abs(grid_val));
        }
    }
}
