#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "agent.hpp"
#include "maze.hpp"
#include "metrics.hpp"
#include "trainer.hpp"
#include "world.hpp"

namespace navbench {

/// One cell of the spawn/goal/map randomisation matrix.
struct StageSpec {
    int id = 1;
    bool goal_static = true;
    bool spawn_static = true;
    bool map_static = true;

    /// Stages 1..5: (S,S,S), (S goal, R spawn, S map), (R goal, S spawn, S map),
    /// (R,R,S), (R,R,R).
    static StageSpec canonical(int id);
    StageFlags flags() const { return {goal_static, spawn_static}; }
    /// Latency is uninformative when the goal never moves.
    bool latency_trivial() const { return goal_static; }
    std::string describe() const;
    bool operator==(const StageSpec&) const = default;
};

struct AblationFlags {
    bool apples_present = true;
    bool textures_random = true; // per-map procedural textures; false keeps every wall at texture 0
    bool operator==(const AblationFlags&) const = default;
};

enum class MapRole { Train, Test };

struct PoolEntry {
    std::string id;
    std::uint64_t seed = 0;
    int cols = 0;
    int rows = 0;
    MapRole role = MapRole::Train;
    bool in_static = false; // member of the evaluation subset (train maps only)
    bool operator==(const PoolEntry&) const = default;
};

class MapPool {
public:
    std::uint64_t pool_seed = 0;
    std::vector<PoolEntry> entries;

    const PoolEntry& find(std::string_view id) const;
    std::vector<std::string> ids(MapRole role) const;
    std::vector<std::string> static_ids() const;
    Maze maze(std::string_view id) const;

    /// One line per map: id TAB seed TAB cols TAB rows TAB role, role being
    /// train, test or static (a static map is also a train map). A leading
    /// "# pool_seed=N" comment records the pool seed.
    std::string manifest() const;
    static MapPool parse_manifest(std::string_view text);
    std::uint64_t hash() const;
    bool operator==(const MapPool&) const = default;
};

/// n_train + n_test maps with distinct seeds; min(n_static, n_train) train
/// maps form the static subset, drawn from pool_seed.
MapPool build_pool(std::uint64_t pool_seed, int n_train, int n_test, int cols = 4, int rows = 4, int n_static = 10);

/// Goal, spawn, apple and texture placement for one episode.
MapAnnotations stage_annotations(const Maze& maze, const StageSpec& stage, const AblationFlags& flags,
                                 std::uint64_t episode_seed);

/// Environment config with goal and spawn placement set by the stage.
EnvConfig stage_env(const EnvConfig& env, const StageSpec& stage);

/// hash(eval_seed, map_id, episode_index).
std::uint64_t evaluation_episode_seed(std::uint64_t eval_seed, std::string_view map_id, std::uint64_t index);

/// Training episodes: a static-map stage plays map_ids[0] only; stage 5
/// draws a map uniformly from map_ids for every episode.
EpisodeFactory make_training_factory(const MapPool& pool, const StageSpec& stage, std::vector<std::string> map_ids,
                                     const AblationFlags& flags, const EnvConfig& env, std::uint64_t seed);

/// Default training maps: the first static map for static-map stages, every
/// train map for stage 5 (or the first `subset` of them when subset > 0).
std::vector<std::string> training_maps(const MapPool& pool, const StageSpec& stage, int subset = 0);

TrainResult train_stage(const AgentConfig& agent, const TrainConfig& train_cfg, const StageSpec& stage,
                        const MapPool& pool, const std::vector<std::string>& map_ids, const AblationFlags& flags,
                        const EnvConfig& env, ParameterSet initial, const TrainCallbacks& callbacks = {});

/// Chooses actions during evaluation; one instance per episode.
class Controller {
public:
    virtual ~Controller() = default;
    virtual Action act(const Environment& env) = 0;
};
using ControllerFactory = std::function<std::unique_ptr<Controller>(const Environment& env, std::uint64_t episode_seed)>;

/// Network policy; throws Mismatch when the agent cannot consume frames of
/// `env`, or when the parameters do not fit the agent.
ControllerFactory network_controller(const AgentConfig& agent, ParameterSet params, ActionMode mode,
                                     const EnvConfig& env);
ControllerFactory random_controller();
ControllerFactory geodesic_controller();

EpisodeLog play_episode(const Maze& maze, const MapAnnotations& annotations, const EnvConfig& env,
                        const ControllerFactory& controller, std::uint64_t episode_seed, const std::string& map_id,
                        std::uint64_t config_hash);

enum class EvalVariant { Seen, Unseen };

struct EvalConfig {
    int episodes_per_map = 10;
    std::uint64_t eval_seed = 0;
    EvalVariant variant = EvalVariant::Seen;
    AblationFlags flags;
    EnvConfig env;
    int workers = 1;
    std::vector<std::string> map_ids; // overrides the variant's subset when set
    std::uint64_t config_hash = 0;    // stamped into log headers
};

/// Maps evaluated by a stage: the static subset for Seen, the test maps for
/// Unseen, or the explicit override.
std::vector<std::string> evaluation_maps(const MapPool& pool, const EvalConfig& cfg);

struct StageReport {
    StageSpec stage;
    std::vector<std::string> map_ids;
    std::vector<EpisodeReport> reports; // ordered by (map order, episode index)
    std::vector<EpisodeLog> logs;       // parallel to reports
    MetricsSummary summary;
};

/// Runs episodes_per_map episodes on every evaluation map. Episodes fan out
/// over cfg.workers threads; results come back in (map, episode) order.
StageReport run_stage(const StageSpec& stage, const MapPool& pool, const EvalConfig& cfg,
                      const ControllerFactory& controller);

/// Logs whose map is a train map of `pool`; must be zero for Unseen runs.
int count_train_maps(const std::vector<EpisodeLog>& logs, const MapPool& pool);

struct AblationCell {
    AblationFlags flags;
    StageReport report;
};
/// {apples} x {textures}, every cell on the same episode seeds.
std::vector<AblationCell> run_ablation_grid(const StageSpec& stage, const MapPool& pool, const EvalConfig& cfg,
                                            const ControllerFactory& controller);

/// Plain-text record of an evaluation run, enough to replay it.
struct StageManifest {
    StageSpec stage;
    EvalVariant variant = EvalVariant::Seen;
    std::uint64_t pool_seed = 0;
    std::uint64_t pool_hash = 0;
    std::uint64_t checkpoint_hash = 0;
    std::uint64_t eval_seed = 0;
    std::uint64_t config_hash = 0;
    int episodes_per_map = 0;
    ActionMode action_mode = ActionMode::Sampled;
    AblationFlags flags;
    std::vector<std::string> map_ids;
    std::string code_version;

    std::string to_text() const;
    static StageManifest from_text(std::string_view text);
    bool operator==(const StageManifest&) const = default;
};

std::string_view variant_name(EvalVariant v);
EvalVariant parse_variant(std::string_view s);

} // namespace navbench
