#pragma once

#include <optional>
#include <string>
#include <vector>

#include "maze.hpp"
#include "world.hpp"

namespace navbench {

/// Record indices t (1-based) of goal hits, strictly increasing.
struct GoalHitTimes {
    std::vector<int> tau;
    int episode_len = 0;
    std::size_t count() const noexcept { return tau.size(); }
};

/// Hit times from the logged GoalHit events.
GoalHitTimes extract_goal_hits(const EpisodeLog& log);
/// Hit times recomputed from the logged poses: ||x_t - x_g|| < epsilon.
GoalHitTimes goal_hits_from_poses(const EpisodeLog& log);

/// (N - 1) * tau_1 / (tau_N - tau_1); absent when N < 2.
std::optional<double> latency_ratio(const GoalHitTimes& hits);

enum class PathMode { Bfs, Manhattan };

std::string_view path_mode_name(PathMode mode);

/// Block-world distance in world units: BFS hops or |dx| + |dy| blocks,
/// times the block size. Both blocks must be Floor and connected.
double shortest_path_grid(const Maze& maze, BlockCoord a, BlockCoord b, double block_size, PathMode mode);

/// Traveled distance after each respawn divided by the summed shortest
/// distances from the post-respawn position to the goal. The shortest
/// distance runs to the goal-hit boundary: max(0, grid distance - epsilon).
/// Absent when N < 2.
std::optional<double> distance_inefficiency(const EpisodeLog& log, const GoalHitTimes& hits, const Maze& maze,
                                            PathMode mode);

struct EpisodeReport {
    std::string map_id;
    int episode = 0;
    int goal_hits = 0;
    std::optional<double> latency;
    std::optional<double> dist_ineff_bfs;
    std::optional<double> dist_ineff_manhattan;
    double reward = 0.0;
    int apples = 0;
};

EpisodeReport evaluate_episode(const EpisodeLog& log, const Maze& maze, std::string map_id, int episode);

struct Stat {
    double mean = 0.0;
    double std = 0.0; // population
    int count = 0;    // present values
    int absent = 0;
};

Stat summarize(const std::vector<std::optional<double>>& values);

struct MetricsSummary {
    Stat latency;
    Stat dist_ineff_bfs;
    Stat dist_ineff_manhattan;
    Stat reward;
    Stat goal_hits;
    int episodes = 0;
};

MetricsSummary aggregate(const std::vector<EpisodeReport>& reports);

/// CSV: header, one row per episode, then "# aggregate" footer rows.
std::string reports_to_csv(const std::vector<EpisodeReport>& reports);
std::string summary_to_json(const MetricsSummary& summary, const std::string& extra_json_fields = {});

/// Uniform-random policy on each map. Episode seeds are
/// derive_seed(seed, map index, episode index).
struct BaselineMap {
    std::string id;
    Maze maze;
    StageFlags flags;
    int apple_count = 0;
};
std::vector<EpisodeReport> random_agent_baseline(const std::vector<BaselineMap>& maps, const EnvConfig& config,
                                                 int episodes, std::uint64_t seed,
                                                 std::vector<EpisodeLog>* logs = nullptr);

/// Arm chosen on each spawn-to-goal traversal, by the first sentinel block
/// entered. Traversals that end the episode without a goal hit are dropped.
struct PathChoice {
    int shorter = 0;
    int longer = 0;
    int unresolved = 0;
};
PathChoice classify_traversals(const EpisodeLog& log, const PlanningMap& map);

struct ShorterPathFraction {
    double fraction = 0.0;       // pooled shorter / (shorter + longer)
    double episode_std = 0.0;    // population std of per-episode fractions
    int shorter = 0;
    int longer = 0;
    int unresolved = 0;
    int episodes_with_choices = 0;
};
ShorterPathFraction shorter_path_fraction(const std::vector<EpisodeLog>& logs, const PlanningMap& map);

} // namespace navbench
