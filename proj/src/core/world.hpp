#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "maze.hpp"
#include "raycast.hpp"
#include "rng.hpp"

namespace navbench {

enum class PlacementMode { Static, Random };

struct EnvConfig {
    int episode_len = 1200;          // T, steps
    double goal_reward = 10.0;
    double apple_reward = 1.0;
    double wall_penalty_cap = -0.2;  // per step, at contact
    double wall_penalty_radius = 32.0; // d0 = 2 * agent_radius
    double forward_speed = 25.0;     // world units per step
    double turn_speed = std::numbers::pi / 12.0; // radians per step
    double agent_radius = 16.0;
    double goal_epsilon = 50.0;      // goal hit when closer than this to the goal centre
    PlacementMode spawn_mode = PlacementMode::Static;
    PlacementMode goal_mode = PlacementMode::Static;
    RenderConfig render;             // block size lives here

    double block_size() const noexcept { return render.block_size; }
    void validate() const;
};

enum class Event : std::uint8_t { None, AppleHit, GoalHit, Respawn, WallContact };

std::string_view event_name(Event e);
Event parse_event(std::string_view name);

struct RewardTerms {
    double apple = 0.0;
    double goal = 0.0;
    double wall = 0.0;
    double total() const noexcept { return apple + goal + wall; }
    bool operator==(const RewardTerms&) const = default;
};

/// One step of an episode. `t` is 1-based: record t holds the pose x_t
/// reached by the t-th action. On a goal hit the pose is the goal-touching
/// pose; the respawn is applied before the next action and the next record
/// carries Event::Respawn.
struct TrajectoryRecord {
    int t = 0;
    Pose pose;
    Action action = Action::Forward;
    double reward = 0.0;
    RewardTerms terms;
    Event event = Event::None;
    bool operator==(const TrajectoryRecord&) const = default;
};

struct StepResult {
    Pose pose; // x_t as logged (pre-respawn on a goal hit)
    double reward = 0.0;
    RewardTerms terms;
    Event event = Event::None;
    bool done = false;
};

/// Episode state for one maze. Confined to a single thread.
class Environment {
public:
    /// Places the agent at the spawn: the spawn block centre, heading 0 for
    /// a static spawn and uniform for a random one. All apples present.
    Environment(Maze maze, MapAnnotations annotations, EnvConfig config, std::uint64_t episode_seed);

    StepResult step(Action action);

    const Pose& pose() const noexcept { return pose_; }
    int t() const noexcept { return t_; }
    bool done() const noexcept { return t_ >= config_.episode_len; }
    const Maze& maze() const noexcept { return maze_; }
    const MapAnnotations& annotations() const noexcept { return annotations_; }
    const EnvConfig& config() const noexcept { return config_; }
    std::array<double, 2> goal_position() const { return block_center(annotations_.goal, config_.block_size()); }
    std::vector<BlockCoord> live_apples() const;
    int apples_collected() const noexcept { return apples_collected_; }
    BlockCoord spawn_block() const noexcept { return spawn_block_; }

    /// Image for the current pose with goal and live-apple markers.
    Image render_view() const;
    /// Observation for the next decision: current view, previous action
    /// one-hot (zero before the first step) and previous reward.
    Observation observe() const;

    /// Distance from the agent centre to the nearest Wall face.
    double wall_distance() const;

private:
    void respawn();
    /// Returns true when the move was clamped.
    bool translate(double dx, double dy);

    Maze maze_;
    MapAnnotations annotations_;
    EnvConfig config_;
    Rng rng_;
    Pose pose_;
    BlockCoord spawn_block_;
    int t_ = 0;
    std::vector<char> apple_alive_;
    int apples_collected_ = 0;
    std::optional<Action> prev_action_;
    double prev_reward_ = 0.0;
    bool pending_respawn_event_ = false;
};

/// Distance from a point to the nearest Wall block face, searching blocks
/// within `search` world units.
double distance_to_wall(const Maze& maze, double block_size, double x, double y, double search);

struct EpisodeHeader {
    std::string map_id;
    std::uint64_t map_seed = 0;
    std::uint64_t episode_seed = 0;
    std::uint64_t config_hash = 0;
    BlockCoord goal;
    double goal_x = 0.0;
    double goal_y = 0.0;
    double goal_epsilon = 0.0;
    double block_size = 0.0;
    int episode_len = 0;
    Pose start;
    bool operator==(const EpisodeHeader&) const = default;
};

struct EpisodeLog {
    EpisodeHeader header;
    std::vector<TrajectoryRecord> records;
    bool operator==(const EpisodeLog&) const = default;
};

EpisodeHeader make_header(const Environment& env, std::string map_id, std::uint64_t episode_seed,
                          std::uint64_t config_hash);

/// JSON-lines trajectory log: header line, then one record per step.
std::string encode_episode_log(const EpisodeLog& log);
EpisodeLog decode_episode_log(std::string_view text);

/// Rolls out a full episode. `policy(observation, state)` returns the next
/// action and recurrent state; the state is threaded through respawns and
/// only starts fresh with the episode.
template <typename State, typename Policy>
EpisodeLog run_episode(const Maze& maze, const MapAnnotations& annotations, const EnvConfig& config, Policy&& policy,
                       State state, std::uint64_t episode_seed, std::string map_id = {},
                       std::uint64_t config_hash = 0) {
    Environment env(maze, annotations, config, episode_seed);
    EpisodeLog log;
    log.header = make_header(env, std::move(map_id), episode_seed, config_hash);
    log.records.reserve(static_cast<std::size_t>(config.episode_len));
    while (!env.done()) {
        Action action;
        try {
            auto [a, next] = policy(env.observe(), std::move(state));
            action = a;
            state = std::move(next);
        } catch (const std::exception& e) {
            fail(ErrorKind::Runtime, "agent callback failed at step " + std::to_string(env.t() + 1) + ": " + e.what());
        }
        const StepResult r = env.step(action);
        log.records.push_back({env.t(), r.pose, action, r.reward, r.terms, r.event});
    }
    return log;
}

} // namespace navbench
