#pragma once

#include <optional>
#include <vector>

#include "slabgas/vec3.hpp"

// Slab/torus arithmetic for the domain [0,1] x T^2: free flight, wall-hit
// prediction, minimum-image displacement and the unfolding cover used by
// the recollision analysis.

namespace slabgas {

// |x1| or |x1-1| below this is treated as boundary contact.
inline constexpr double kWallTol = 1e-12;

// Slack allowed on the advect contract before a flight is rejected.
inline constexpr double kAdvectTol = 1e-9;

enum class Wall { X1Zero, X1One };

struct WallHit {
    double time;
    Wall wall;
    int gamma;  // +1 at x1=0, -1 at x1=1 (sign of the inner normal along e)
};

struct Position {
    double x1 = 0.0;  // slab coordinate, in [0,1]
    double x2 = 0.0;  // torus coordinates, in [0,1)
    double x3 = 0.0;

    Position() = default;
    Position(double a, double b, double c);
};

// Smallest t > 0 with x1 + t*v1 in {0,1}; absent iff v1 == 0. A point
// already within kWallTol of a wall and moving outward hits at t = 0.
std::optional<WallHit> wall_hit_time(const Position& x, const Vec3& v);

// Straight flight for time t. The segment must not cross x1 in {0,1};
// callers split flights at wall hits. Throws std::domain_error if the
// resulting x1 leaves [0,1] by more than kAdvectTol.
Position advect(const Position& x, const Vec3& v, double t);

// Displacement from a to b: plain difference in the slab direction,
// representative in (-1/2, 1/2] on the torus (ties resolve to +1/2).
Vec3 minimum_image(const Position& a, const Position& b);

double slab_torus_distance(const Position& a, const Position& b);

// Torus translates b + (0, k2, k3) in the covering [0,1] x R^2. radius 0
// gives the point itself; otherwise all k with Euclidean |k| <= ceil(radius),
// always including the 3x3 nearest-image stencil.
std::vector<Vec3> unfold_images(const Position& b, double radius);

}  // namespace slabgas
