#include "slabgas/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace slabgas {

namespace {

double wrap_unit(double x) {
    double y = x - std::floor(x);
    return (y >= 1.0) ? 0.0 : y;  // floor(1.0-eps) rounding can land on 1
}

double torus_rep(double d) {
    // representative of d mod 1 in (-1/2, 1/2], tie at 1/2 resolved to +1/2
    double y = d - std::round(d);
    if (y == -0.5) y = 0.5;
    return y;
}

}  // namespace

Position::Position(double a, double b, double c) : x1(a), x2(wrap_unit(b)), x3(wrap_unit(c)) {
    if (x1 < -kAdvectTol || x1 > 1.0 + kAdvectTol)
        throw std::domain_error("Position: x1 outside [0,1]");
    if (x1 < 0.0) x1 = 0.0;
    if (x1 > 1.0) x1 = 1.0;
}

std::optional<WallHit> wall_hit_time(const Position& x, const Vec3& v) {
    if (v.x == 0.0) return std::nullopt;
    if (v.x > 0.0) {
        double t = (1.0 - x.x1) / v.x;
        if (1.0 - x.x1 <= kWallTol) t = 0.0;
        return WallHit{t, Wall::X1One, -1};
    }
    double t = x.x1 / (-v.x);
    if (x.x1 <= kWallTol) t = 0.0;
    return WallHit{t, Wall::X1Zero, +1};
}

Position advect(const Position& x, const Vec3& v, double t) {
    double x1 = x.x1 + t * v.x;
    if (x1 < -kAdvectTol || x1 > 1.0 + kAdvectTol)
        throw std::domain_error("advect: flight crosses the slab boundary");
    Position out;
    out.x1 = std::min(1.0, std::max(0.0, x1));
    out.x2 = wrap_unit(x.x2 + t * v.y);
    out.x3 = wrap_unit(x.x3 + t * v.z);
    return out;
}

Vec3 minimum_image(const Position& a, const Position& b) {
    return {b.x1 - a.x1, torus_rep(b.x2 - a.x2), torus_rep(b.x3 - a.x3)};
}

double slab_torus_distance(const Position& a, const Position& b) {
    return minimum_image(a, b).norm();
}

std::vector<Vec3> unfold_images(const Position& b, double radius) {
    std::vector<Vec3> out;
    if (radius < 0.0) throw std::domain_error("unfold_images: negative radius");
    if (radius == 0.0) {
        out.push_back({b.x1, b.x2, b.x3});
        return out;
    }
    const int m = static_cast<int>(std::ceil(radius));
    for (int k2 = -m; k2 <= m; ++k2) {
        for (int k3 = -m; k3 <= m; ++k3) {
            bool in_ball = k2 * k2 + k3 * k3 <= m * m;
            bool in_stencil = std::abs(k2) <= 1 && std::abs(k3) <= 1;
            if (in_ball || in_stencil)
                out.push_back({b.x1, b.x2 + k2, b.x3 + k3});
        }
    }
    return out;
}

}  // namespace slabgas
