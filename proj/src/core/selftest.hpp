#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace navbench {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Generated mazes at cols x rows cells: connected, cells - 1 carved edges,
/// no cycle (union-find audit), over seeds 0 .. seeds-1.
CheckResult check_maze_lattice(int seeds = 1000, int cols = 4, int rows = 4);
/// BFS hop fields against Floyd-Warshall on random mazes of at most 9x9 blocks.
CheckResult check_shortest_paths(int mazes = 50, std::uint64_t seed = 1);
/// Hand-built hit times, a scripted geodesic walker (ratio 1 +- tol) and a
/// scripted walker that doubles every path (ratio 2 +- tol).
CheckResult check_metric_fidelity(double tolerance = 0.05);
/// Central finite differences for every primitive, the LSTM cell, the
/// losses and the combined rollout loss, `seeds` seeds each.
CheckResult check_gradients(int seeds = 20, double tolerance = 1e-4);
/// Per-column depth against a 0.01-unit ray march over random poses.
CheckResult check_raycaster(int poses = 1000, double tolerance = 1e-3, std::uint64_t seed = 1);

struct MetricWalk {
    int goal_hits = 0;
    double ratio = 0.0;
    int min_hops = 0;
};
/// Scripted walks used by check_metric_fidelity; `doubler` walks halfway
/// to the goal, back to the spawn, then to the goal.
MetricWalk scripted_walk(bool doubler);

/// The property suites behind `selftest`; `quick` shrinks sample counts.
std::vector<CheckResult> run_selftest(bool quick);

} // namespace navbench
