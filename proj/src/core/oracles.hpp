#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "geometry.hpp"
#include "maze.hpp"
#include "raycast.hpp"

// Slow, independent reference implementations. Tests and the selftest
// command check the production code paths against these.
namespace navbench::oracle {

/// Union-find audit of the carved cell lattice of a generated maze.
struct LatticeAudit {
    int edges = 0;
    int components = 0;
    bool cycle = false;
};
LatticeAudit audit_lattice(const Maze& maze);

/// All-pairs hop counts over maze.floor_blocks() (in that order); -1 when
/// unreachable.
std::vector<std::vector<int>> floyd_warshall(const Maze& maze);

/// Fixed-step ray march (step 0.01 world units) with bisection refinement of
/// the first wall crossing, including corner cuts between samples. Returns
/// the distance in units of the direction vector's length, like cast_ray.
double march_depth(const Maze& maze, double block_size, double x, double y, double dx, double dy,
                   double step = 0.01);

/// Loop-closure labels by scanning every earlier pair.
std::vector<int> loop_labels_quadratic(std::span<const std::array<double, 2>> positions,
                                       const LoopClosureParams& params);

/// Steers along a BFS shortest block path toward the goal: turn toward the
/// next block centre, then move forward. Re-plans after a teleport.
class GeodesicPilot {
public:
    GeodesicPilot(const Maze& maze, BlockCoord goal, double block_size, double turn_speed, double forward_speed);
    Action next(const Pose& pose);

private:
    const Maze* maze_;
    BlockCoord goal_;
    double block_;
    double turn_;
    double speed_;
    std::vector<int> field_;
    std::optional<std::array<double, 2>> target_;
    std::optional<Pose> last_;
};

} // namespace navbench::oracle
