#include "slabgas/boltzmann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "slabgas/geometry.hpp"

namespace slabgas {

namespace {

// Acklam's rational approximation of the standard normal quantile.
double inverse_normal_cdf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > phigh) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// R_d Kronecker lattice in 5 dimensions.
struct Lattice5 {
    double alpha[5];
    explicit Lattice5(std::uint64_t seed) {
        double phi = 1.2;  // root of x^6 = x + 1
        for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / 6.0);
        double shift = static_cast<double>(mix64(seed) >> 11) * 0x1.0p-53;
        double g = 1.0;
        for (int j = 0; j < 5; ++j) {
            g /= phi;
            alpha[j] = g;
        }
        shift_ = shift;
    }
    void point(long k, double* u) const {
        for (int j = 0; j < 5; ++j) {
            double x = shift_ + alpha[j] * static_cast<double>(k + 1);
            u[j] = x - std::floor(x);
        }
    }
    double shift_;
};

}  // namespace

Estimate transport_apply_mc(const DensityFunction& g, double t, const Position& x, const Vec3& v,
                            Rng& rng, long n_paths) {
    Accumulator acc;
    const double speed = v.norm();
    for (long n = 0; n < n_paths; ++n) {
        Position pos = x;
        Vec3 vel = v;
        double rem = t;
        for (;;) {
            auto hit = wall_hit_time(pos, -vel);
            if (!hit || hit->time >= rem) {
                pos = advect(pos, vel, -rem);
                break;
            }
            pos = advect(pos, vel, -hit->time);
            pos.x1 = hit->gamma > 0 ? 0.0 : 1.0;
            rem -= hit->time;
            Vec3 omega = sample_diffuse_direction(rng, -1);
            vel = omega * (speed * hit->gamma);
        }
        acc.add(g(pos, vel));
    }
    return acc.estimate();
}

double transport_apply_series(const DensityFunction& g, double t, const Position& x, const Vec3& v,
                              int n_cos, int n_phi) {
    auto hit = wall_hit_time(x, -v);
    if (!hit || hit->time >= t) return g(advect(x, v, -t), v);

    Position wall_pos = advect(x, v, -hit->time);
    wall_pos.x1 = hit->gamma > 0 ? 0.0 : 1.0;
    const double rem = t - hit->time;
    const double speed = v.norm();

    auto qu = gauss_legendre(n_cos, 0.0, 1.0);
    double sum = 0.0;
    for (int i = 0; i < n_cos; ++i) {
        double u = qu.nodes[i];
        double su = std::sqrt(std::max(0.0, 1.0 - u * u));
        double inner = 0.0;
        for (int p = 0; p < n_phi; ++p) {
            double phi = 2.0 * M_PI * (p + 0.5) / n_phi;
            Vec3 omega{-u, su * std::cos(phi), su * std::sin(phi)};
            Vec3 vel = omega * (speed * hit->gamma);
            inner += transport_apply_series(g, rem, wall_pos, vel, n_cos, n_phi);
        }
        sum += qu.weights[i] * 2.0 * u * inner / n_phi;
    }
    return sum;
}

bool future_set_membership(double t_anchor, double tau, const Position& x, const Vec3& v) {
    if (tau < t_anchor) return false;
    double x1 = x.x1 - (tau - t_anchor) * v.x;
    return std::abs(x1) <= kWallTol || std::abs(x1 - 1.0) <= kWallTol;
}

double compatibility_residual(const DensityFunction& f0, int n_speed, int n_dir, int n_cos,
                              int n_phi) {
    auto qu = gauss_legendre(n_cos, 0.0, 1.0);
    double worst = 0.0;
    for (int wall = 0; wall < 2; ++wall) {
        const int gamma = wall == 0 ? +1 : -1;
        Position x(wall == 0 ? 0.0 : 1.0, 0.3, 0.7);
        for (int js = 1; js <= n_speed; ++js) {
            double speed = 4.0 * js / n_speed;
            // incoming test directions v with v.n > 0
            for (int jd = 0; jd < n_dir; ++jd) {
                double uo = (jd + 0.5) / n_dir;
                double so = std::sqrt(std::max(0.0, 1.0 - uo * uo));
                Vec3 v{gamma * uo * speed, so * speed, 0.0};
                double lhs = f0(x, v);
                double rhs = 0.0;
                for (int i = 0; i < n_cos; ++i) {
                    double u = qu.nodes[i];
                    double su = std::sqrt(std::max(0.0, 1.0 - u * u));
                    double inner = 0.0;
                    for (int p = 0; p < n_phi; ++p) {
                        double phi = 2.0 * M_PI * (p + 0.5) / n_phi;
                        // omega with (Gamma omega.e) < 0: the outgoing trace amounts
                        // to averaging f0 over incoming directions at equal speed
                        Vec3 omega{-gamma * u, su * std::cos(phi), su * std::sin(phi)};
                        inner += f0(x, omega * speed);
                    }
                    rhs += qu.weights[i] * 2.0 * u * inner / n_phi;
                }
                worst = std::max(worst, std::abs(lhs - rhs));
            }
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------

GridDensity::GridDensity(int nx, int ns, int nc, double v_max)
    : nx_(nx), ns_(ns), nc_(nc), v_max_(v_max), v_(static_cast<std::size_t>(nx) * ns * nc, 0.0) {
    if (nx < 2 || ns < 2 || nc < 2 || v_max <= 0.0)
        throw std::invalid_argument("GridDensity: degenerate grid");
}

double GridDensity::value(double x1, double speed, double cosine) const {
    if (speed > v_max_) return 0.0;
    double fx = std::clamp(x1, 0.0, 1.0) * (nx_ - 1);
    double fs = std::clamp(speed / v_max_, 0.0, 1.0) * (ns_ - 1);
    double fc = std::clamp(0.5 * (cosine + 1.0), 0.0, 1.0) * (nc_ - 1);
    int ix = std::min(nx_ - 2, static_cast<int>(fx));
    int is = std::min(ns_ - 2, static_cast<int>(fs));
    int ic = std::min(nc_ - 2, static_cast<int>(fc));
    double ax = fx - ix, as = fs - is, ac = fc - ic;
    double out = 0.0;
    for (int dx = 0; dx < 2; ++dx)
        for (int ds = 0; ds < 2; ++ds)
            for (int dc = 0; dc < 2; ++dc)
                out += at(ix + dx, is + ds, ic + dc) * (dx ? ax : 1 - ax) * (ds ? as : 1 - as) *
                       (dc ? ac : 1 - ac);
    return signed_ ? out : std::max(out, 0.0);
}

double GridDensity::value(double x1, const Vec3& v) const {
    double speed = v.norm();
    double cosine = speed > 0.0 ? v.x / speed : 0.0;
    return value(x1, speed, cosine);
}

double GridDensity::mass() const {
    return observable([](double, double) { return 1.0; }, 0.0, 1.0);
}

double GridDensity::energy_moment() const {
    return observable([](double s, double) { return s * s; }, 0.0, 1.0);
}

double GridDensity::observable(const std::function<double(double, double)>& phi, double x1_lo,
                               double x1_hi) const {
    if (!(x1_hi > x1_lo)) throw std::invalid_argument("observable: empty x1 range");
    // dv = 2 pi s^2 ds dc; trapezoid over the native (s,c) grid, x1 by
    // sub-sampled midpoint average over the bin
    const int nsub = 8;
    double total = 0.0;
    for (int q = 0; q < nsub; ++q) {
        double x1 = x1_lo + (x1_hi - x1_lo) * (q + 0.5) / nsub;
        double slice = 0.0;
        for (int j = 0; j < ns_; ++j) {
            double ws = (j == 0 || j == ns_ - 1) ? 0.5 : 1.0;
            double s = speed_node(j);
            double inner = 0.0;
            for (int k = 0; k < nc_; ++k) {
                double wc = (k == 0 || k == nc_ - 1) ? 0.5 : 1.0;
                inner += wc * value(x1, s, cos_node(k)) * phi(s, cos_node(k));
            }
            slice += ws * 2.0 * M_PI * s * s * inner;
        }
        slice *= (v_max_ / (ns_ - 1)) * (2.0 / (nc_ - 1));
        total += slice / nsub;
    }
    return total;
}

GridDensity project_to_grid(const DensityFunction& f, const GridSpec& spec) {
    GridDensity g(spec.nx, spec.ns, spec.nc, spec.v_max);
    for (int i = 0; i < spec.nx; ++i) {
        Position x(g.x1_node(i), 0.37, 0.59);
        for (int j = 0; j < spec.ns; ++j) {
            double s = g.speed_node(j);
            for (int k = 0; k < spec.nc; ++k) {
                double c = g.cos_node(k);
                Vec3 v{s * c, s * std::sqrt(std::max(0.0, 1.0 - c * c)), 0.0};
                g.at(i, j, k) = f(x, v);
            }
        }
    }
    return g;
}

CollisionQuad make_collision_quad(long n, double beta, double v_max, std::uint64_t seed) {
    CollisionQuad q;
    q.beta = beta;
    q.v_star.reserve(n);
    q.nu.reserve(n);
    q.weight.reserve(n);
    Lattice5 lat(seed);
    const double sigma = 1.0 / std::sqrt(beta);
    const double norm = std::pow(beta / (2.0 * M_PI), 1.5);
    double u[5];
    for (long k = 0; k < n; ++k) {
        lat.point(k, u);
        Vec3 vs{sigma * inverse_normal_cdf(u[0]), sigma * inverse_normal_cdf(u[1]),
                sigma * inverse_normal_cdf(u[2])};
        double cn = 2.0 * u[3] - 1.0;
        double sn = std::sqrt(std::max(0.0, 1.0 - cn * cn));
        double phi = 2.0 * M_PI * u[4];
        q.v_star.push_back(vs);
        q.nu.push_back({cn, sn * std::cos(phi), sn * std::sin(phi)});
        double dens = norm * std::exp(-0.5 * beta * vs.norm2());
        q.weight.push_back(vs.norm() <= v_max ? 4.0 * M_PI / dens : 0.0);
    }
    return q;
}

namespace {

// node-level integral of g(s,c) phi(s,c) 2 pi s^2 ds dc on one x1 slice
double slice_moment(const GridDensity& g, int ix,
                    const std::function<double(double, double)>& phi) {
    double total = 0.0;
    for (int j = 0; j < g.ns(); ++j) {
        double ws = (j == 0 || j == g.ns() - 1) ? 0.5 : 1.0;
        double s = g.speed_node(j);
        double inner = 0.0;
        for (int k = 0; k < g.nc(); ++k) {
            double wc = (k == 0 || k == g.nc() - 1) ? 0.5 : 1.0;
            inner += wc * g.at(ix, j, k) * phi(s, g.cos_node(k));
        }
        total += ws * 2.0 * M_PI * s * s * inner;
    }
    return total * (g.v_max() / (g.ns() - 1)) * (2.0 / (g.nc() - 1));
}

}  // namespace

GridDensity collision_apply(const GridDensity& f, const CollisionQuad& quad) {
    GridDensity out(f.nx(), f.ns(), f.nc(), f.v_max());
    out.set_signed(true);
    const long n = static_cast<long>(quad.v_star.size());
    for (int i = 0; i < f.nx(); ++i) {
        double x1 = static_cast<double>(i) / (f.nx() - 1);
        for (int j = 0; j < f.ns(); ++j) {
            double s = f.speed_node(j);
            for (int k = 0; k < f.nc(); ++k) {
                double c = f.cos_node(k);
                Vec3 v{s * c, s * std::sqrt(std::max(0.0, 1.0 - c * c)), 0.0};
                double fv = f.value(x1, s, c);
                double sum = 0.0;
                for (long m = 0; m < n; ++m) {
                    if (quad.weight[m] == 0.0) continue;
                    const Vec3& vs = quad.v_star[m];
                    const Vec3& nu = quad.nu[m];
                    double kern = std::max(-(v - vs).dot(nu), 0.0);
                    if (kern == 0.0) continue;
                    double qd = nu.dot(v - vs);
                    Vec3 vp = v - nu * qd;
                    Vec3 vsp = vs + nu * qd;
                    sum += quad.weight[m] * kern *
                           (f.value(x1, vp) * f.value(x1, vsp) - fv * f.value(x1, vs));
                }
                out.at(i, j, k) = sum / static_cast<double>(n);
            }
        }
    }

    // conservative projection: remove the (1, v1, |v|^2) moments slice by
    // slice with a gaussian-weighted basis
    const double beta = quad.beta;
    const std::function<double(double, double)> phis[3] = {
        [](double, double) { return 1.0; },
        [](double s, double c) { return s * c; },
        [](double s, double) { return s * s; }};
    GridDensity basis(f.nx(), f.ns(), f.nc(), f.v_max());
    double gram[3][3];
    {
        auto w = [beta](double s) { return std::exp(-0.5 * beta * s * s); };
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                for (int j = 0; j < f.ns(); ++j)
                    for (int k = 0; k < f.nc(); ++k) {
                        double s = f.speed_node(j), c = f.cos_node(k);
                        basis.at(0, j, k) = phis[b](s, c) * w(s);
                    }
                gram[a][b] = slice_moment(basis, 0, phis[a]);
            }
    }
    for (int i = 0; i < f.nx(); ++i) {
        double m[3];
        for (int a = 0; a < 3; ++a) m[a] = slice_moment(out, i, phis[a]);
        // solve gram coef = m (3x3, gaussian elimination)
        double A[3][4];
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) A[a][b] = gram[a][b];
            A[a][3] = m[a];
        }
        for (int col = 0; col < 3; ++col) {
            int piv = col;
            for (int r2 = col + 1; r2 < 3; ++r2)
                if (std::abs(A[r2][col]) > std::abs(A[piv][col])) piv = r2;
            std::swap(A[col], A[piv]);
            for (int r2 = 0; r2 < 3; ++r2) {
                if (r2 == col) continue;
                double fac = A[r2][col] / A[col][col];
                for (int cc = col; cc < 4; ++cc) A[r2][cc] -= fac * A[col][cc];
            }
        }
        double coef[3];
        for (int a = 0; a < 3; ++a) coef[a] = A[a][3] / A[a][a];
        for (int j = 0; j < f.ns(); ++j) {
            double s = f.speed_node(j);
            double w = std::exp(-0.5 * beta * s * s);
            for (int k = 0; k < f.nc(); ++k) {
                double c = f.cos_node(k);
                out.at(i, j, k) -=
                    w * (coef[0] + coef[1] * s * c + coef[2] * s * s);
            }
        }
    }
    return out;
}

double transport_reduced(const std::function<double(double, double, double)>& terminal, double x1,
                         double speed, double cosine, double dt, const Quadrature1D& cos_quad) {
    double drift = speed * cosine;
    if (drift == 0.0) return terminal(x1, speed, cosine);
    double tw = drift > 0.0 ? x1 / drift : (1.0 - x1) / (-drift);
    if (tw >= dt) return terminal(x1 - dt * drift, speed, cosine);
    const double wall = drift > 0.0 ? 0.0 : 1.0;
    const int gamma = drift > 0.0 ? +1 : -1;
    const double rem = dt - tw;
    double sum = 0.0;
    for (std::size_t i = 0; i < cos_quad.nodes.size(); ++i) {
        double u = cos_quad.nodes[i];
        sum += cos_quad.weights[i] * 2.0 * u *
               transport_reduced(terminal, wall, speed, -gamma * u, rem, cos_quad);
    }
    return sum;
}

namespace {

GridDensity transport_grid(const GridDensity& g, double dt, const Quadrature1D& qu) {
    GridDensity out(g.nx(), g.ns(), g.nc(), g.v_max());
    out.set_signed(g.is_signed());
    auto term = [&g](double x1, double s, double c) { return g.value(x1, s, c); };
    for (int i = 0; i < g.nx(); ++i)
        for (int j = 0; j < g.ns(); ++j)
            for (int k = 0; k < g.nc(); ++k)
                out.at(i, j, k) =
                    transport_reduced(term, out.x1_node(i), out.speed_node(j), out.cos_node(k), dt, qu);
    return out;
}

double weighted_gap(const GridDensity& a, const GridDensity& b, double beta) {
    double gap = 0.0;
    for (int i = 0; i < a.nx(); ++i)
        for (int j = 0; j < a.ns(); ++j) {
            double s = a.speed_node(j);
            double w = std::exp(3.0 * beta / 8.0 * s * s);
            for (int k = 0; k < a.nc(); ++k)
                gap = std::max(gap, std::abs(a.at(i, j, k) - b.at(i, j, k)) * w);
        }
    return gap;
}

}  // namespace

PicardResult picard_solve(const DensityFunction& f0, double t_end, double tol,
                          const GridSpec& spec, std::span<const double> snapshot_times) {
    if (!f0.slab_symmetric)
        throw std::invalid_argument("picard_solve: reduced grid requires a slab-symmetric f0");
    if (spec.dt * spec.v_max >= 1.0)
        throw std::invalid_argument("picard_solve: dt v_max must stay below one crossing");

    const int levels = std::max(1, static_cast<int>(std::llround(t_end / spec.dt)));
    const double dt = t_end / levels;
    auto qu = gauss_legendre(24, 0.0, 1.0);

    // transported initial term, evaluated against the exact contract
    auto f0_term = [&f0](double x1, double s, double c) {
        Vec3 v{s * c, s * std::sqrt(std::max(0.0, 1.0 - c * c)), 0.0};
        return f0(Position(x1, 0.37, 0.59), v);
    };
    std::vector<GridDensity> base;
    base.reserve(levels + 1);
    for (int m = 0; m <= levels; ++m) {
        GridDensity g(spec.nx, spec.ns, spec.nc, spec.v_max);
        for (int i = 0; i < spec.nx; ++i)
            for (int j = 0; j < spec.ns; ++j)
                for (int k = 0; k < spec.nc; ++k)
                    g.at(i, j, k) = transport_reduced(f0_term, g.x1_node(i), g.speed_node(j),
                                                      g.cos_node(k), m * dt, qu);
        base.push_back(std::move(g));
    }

    auto quad = make_collision_quad(spec.collision_nodes, f0.cert_beta, spec.v_max, spec.quad_seed);

    std::vector<GridDensity> f = base;
    PicardResult res;
    res.dt = dt;
    double gap = std::numeric_limits<double>::infinity();
    for (int it = 0; it < spec.max_iterations; ++it) {
        // collision grids at half levels from the current iterate
        std::vector<GridDensity> coll;
        coll.reserve(levels);
        for (int j = 0; j < levels; ++j) {
            GridDensity mid(spec.nx, spec.ns, spec.nc, spec.v_max);
            for (int a = 0; a < spec.nx; ++a)
                for (int b = 0; b < spec.ns; ++b)
                    for (int cidx = 0; cidx < spec.nc; ++cidx)
                        mid.at(a, b, cidx) = 0.5 * (f[j].at(a, b, cidx) + f[j + 1].at(a, b, cidx));
            coll.push_back(collision_apply(mid, quad));
        }

        std::vector<GridDensity> fn = base;
        for (int j = 0; j < levels; ++j) {
            // increments dt T((m - j - 1/2) dt) C_j for all m > j, each
            // transported straight from the collision grid
            for (int m = j + 1; m <= levels; ++m) {
                GridDensity carried = transport_grid(coll[j], (m - j - 0.5) * dt, qu);
                for (int a = 0; a < spec.nx; ++a)
                    for (int b = 0; b < spec.ns; ++b)
                        for (int cidx = 0; cidx < spec.nc; ++cidx)
                            fn[m].at(a, b, cidx) += dt * carried.at(a, b, cidx);
            }
        }
        // clamp to nonnegative densities
        for (auto& g : fn)
            for (int a = 0; a < spec.nx; ++a)
                for (int b = 0; b < spec.ns; ++b)
                    for (int cidx = 0; cidx < spec.nc; ++cidx)
                        g.at(a, b, cidx) = std::max(g.at(a, b, cidx), 0.0);

        gap = 0.0;
        for (int m = 0; m <= levels; ++m) gap = std::max(gap, weighted_gap(f[m], fn[m], f0.cert_beta));
        f = std::move(fn);
        res.iterations = it + 1;
        if (gap < tol) break;
    }
    if (gap >= tol) throw NoConvergence();
    res.final_gap = gap;

    for (double ts : snapshot_times) {
        double lvl = ts / dt;
        int m = static_cast<int>(std::llround(lvl));
        if (m < 0 || m > levels || std::abs(lvl - m) > 1e-9)
            throw std::invalid_argument("picard_solve: snapshot time off the level grid");
        res.times.push_back(ts);
        res.snapshots.push_back(f[m]);
    }
    return res;
}

void write_grid_csv(std::ostream& os, double t, const GridDensity& g) {
    os << "t,x1,speed,cosine,value\n";
    char buf[160];
    for (int i = 0; i < g.nx(); ++i)
        for (int j = 0; j < g.ns(); ++j)
            for (int k = 0; k < g.nc(); ++k) {
                std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.17g\n", t, g.x1_node(i),
                              g.speed_node(j), g.cos_node(k), g.at(i, j, k));
                os << buf;
            }
}

}  // namespace slabgas
