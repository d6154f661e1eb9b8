#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agent.hpp"
#include "maze.hpp"
#include "world.hpp"

namespace navbench {

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    int workers = 4;
    int t_max = 20;
    double gamma = 0.99;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double beta_value = 0.5;
    double beta_entropy = 0.01;
    double beta_depth1 = 0.33;
    double beta_depth2 = 0.33;
    double beta_loop = 0.33;
    double clip_norm = 40.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::uint64_t max_steps = 2'000'000;
    std::uint64_t checkpoint_every = 0; // 0: final checkpoint only
    std::uint64_t seed = 0;
    ActionMode action_mode = ActionMode::Sampled;

    void validate() const;
};

/// R_t = r_t + gamma * R_{t+1}, seeded with `bootstrap`.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma, double bootstrap);

/// One recorded decision of a rollout.
struct StepRecord {
    AgentOutputVars out;
    int action = 0;
    double reward = 0.0;
    std::vector<int> depth_targets; // per column group
    int loop_label = 0;
};

struct LossValues {
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double depth1 = 0.0;
    double depth2 = 0.0;
    double loop = 0.0;
    double total = 0.0;
};

struct LossTerms {
    Var total;
    LossValues values;
};

/// Total rollout loss: sum over steps of the policy term with a constant
/// advantage (R_t - V_t), beta_V (R_t - V_t)^2, beta_e sum(pi ln pi) and the
/// weighted auxiliary cross-entropies. Terms with zero weight are left off
/// the tape. Training and saliency both build their loss here.
LossTerms assemble_loss(const std::vector<StepRecord>& steps, std::span<const double> returns,
                        const TrainConfig& config, const AgentConfig& agent);

using Gradients = std::vector<Tensor>;

double global_norm(const Gradients& grads);
/// Scales in place when the norm exceeds `max_norm`; returns the norm before
/// clipping.
double clip_by_global_norm(Gradients& grads, double max_norm);
bool all_finite(const Gradients& grads);

/// Adam moments and step count for a parameter set.
struct OptimizerState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t updates = 0;
    static OptimizerState zeros(const ParameterSet& params);
};

/// One optimizer step in place: Adam with bias correction, or plain SGD.
void optimizer_apply(ParameterSet& params, OptimizerState& state, const Gradients& grads, const TrainConfig& config);

/// Master parameters and optimizer state shared by all workers. Every
/// apply() happens under one lock, so snapshots never see a partial update.
class SharedStore {
public:
    SharedStore(ParameterSet params, TrainConfig config);

    ParameterSet snapshot() const;
    struct Applied {
        std::uint64_t global_step = 0;
        std::optional<ParameterSet> checkpoint; // set when a checkpoint boundary was crossed
    };
    /// Applies gradients from a rollout of `steps` environment steps.
    Applied apply(const Gradients& grads, int steps);
    std::uint64_t global_step() const;
    std::uint64_t updates() const;

private:
    mutable std::mutex mutex_;
    ParameterSet params_;
    OptimizerState optimizer_;
    TrainConfig config_;
    std::uint64_t step_ = 0;
};

/// What a worker plays next: the map, annotations and environment settings
/// of one episode.
struct EpisodeSpec {
    std::string map_id;
    Maze maze;
    MapAnnotations annotations;
    EnvConfig env;
    std::uint64_t episode_seed = 0;
};
using EpisodeFactory = std::function<EpisodeSpec(int worker, std::uint64_t episode_index)>;

struct RolloutResult {
    Gradients grads;
    int steps = 0;
    double grad_norm = 0.0; // before clipping
    LossValues loss;
    bool ok = true;         // false when the update was aborted
    std::string error;
    struct Finished {
        std::string map_id;
        double reward = 0.0;
        int goal_hits = 0;
    };
    std::optional<Finished> finished; // episode that ended in this rollout
};

/// Owns one environment, its recurrent state and an rng; produces clipped
/// gradients for rollouts of up to t_max steps.
class RolloutWorker {
public:
    RolloutWorker(AgentConfig agent, TrainConfig config, EpisodeFactory factory, int worker_id);

    RolloutResult run(const ParameterSet& params);
    /// Abandons the current episode; the next rollout starts a fresh one.
    void reset_episode();
    std::uint64_t episodes_started() const noexcept { return episode_index_; }

private:
    void start_episode();

    AgentConfig agent_;
    TrainConfig config_;
    EpisodeFactory factory_;
    int worker_id_;
    Rng rng_;
    std::uint64_t episode_index_ = 0;
    std::optional<Environment> env_;
    std::string map_id_;
    std::optional<DepthBuckets> buckets_;
    LoopClosureTracker loop_{LoopClosureParams{}};
    RecurrentState state_;
    double episode_reward_ = 0.0;
    int episode_hits_ = 0;
};

struct TrainProgress {
    std::uint64_t global_step = 0;
    int worker = 0;
    RolloutResult::Finished episode; // valid when has_episode
    bool has_episode = false;
    LossValues loss;
    double grad_norm = 0.0;
    double wall_time_s = 0.0;
    bool aborted = false;
    std::string message;
};

struct TrainCallbacks {
    std::function<void(const TrainProgress&)> on_progress;
    std::function<void(std::uint64_t step, const ParameterSet&)> on_checkpoint;
};

struct TrainResult {
    ParameterSet params;
    std::uint64_t global_step = 0;
    std::uint64_t updates = 0;
    int failed_workers = 0;
    std::vector<std::string> worker_errors;
};

/// A3C: `config.workers` threads roll out against private environments and
/// apply gradients to one shared store until max_steps is reached. Callbacks
/// run on the calling thread. With one worker the run is deterministic.
TrainResult train(const AgentConfig& agent, const TrainConfig& config, ParameterSet initial,
                  const EpisodeFactory& factory, const TrainCallbacks& callbacks = {});

/// Training CSV header and row formatting.
std::string train_csv_header();
std::string train_csv_row(const TrainProgress& p);

} // namespace navbench
