#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "geometry.hpp"
#include "raycast.hpp"
#include "rng.hpp"

namespace navbench {

struct AgentConfig {
    int width = 42;
    int height = 42;
    int conv1_filters = 16;
    int conv1_kernel = 8;
    int conv1_stride = 4;
    int conv2_filters = 32;
    int conv2_kernel = 4;
    int conv2_stride = 2;
    int lstm1_size = 64;
    int lstm2_size = 32;
    int action_count = kActionCount;
    int depth_groups = 4;
    int depth_classes = DepthBuckets::kDefaultCount;
    bool encoder_skip = true; // encoder output also feeds core 2

    static AgentConfig paper_scale();

    int conv1_out_h() const { return (height - conv1_kernel) / conv1_stride + 1; }
    int conv1_out_w() const { return (width - conv1_kernel) / conv1_stride + 1; }
    int conv2_out_h() const { return (conv1_out_h() - conv2_kernel) / conv2_stride + 1; }
    int conv2_out_w() const { return (conv1_out_w() - conv2_kernel) / conv2_stride + 1; }
    /// Width of the encoder output o_t.
    int encoder_size() const { return conv2_filters * conv2_out_h() * conv2_out_w(); }
    int core1_input() const { return encoder_size() + 1; }
    int core2_input() const { return lstm1_size + (encoder_skip ? encoder_size() : 0) + action_count; }

    void validate() const;
    /// key=value lines, one per field, in a fixed order.
    std::string to_text() const;
    static AgentConfig from_text(std::string_view text);
    bool operator==(const AgentConfig&) const = default;
};

/// Named parameter tensors in a fixed order.
class ParameterSet {
public:
    void add(std::string name, Tensor value);
    std::size_t size() const noexcept { return tensors_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& operator[](std::size_t i) { return tensors_[i]; }
    const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
    std::size_t index_of(std::string_view name) const;
    Tensor& get(std::string_view name) { return tensors_[index_of(name)]; }
    const Tensor& get(std::string_view name) const { return tensors_[index_of(name)]; }
    std::size_t element_count() const;
    /// Same names and shapes.
    bool same_layout(const ParameterSet& other) const;
    bool operator==(const ParameterSet&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

/// Fan-in scaled uniform weights (+-sqrt(3 / fan_in)), zero biases except a
/// forget-gate bias of +1 in both cores.
ParameterSet init_params(std::uint64_t seed, const AgentConfig& config);
/// All-zero parameters with the agent's layout.
ParameterSet zero_params(const AgentConfig& config);

/// Numeric recurrent state, zero at episode start.
struct RecurrentState {
    Tensor h1, c1, h2, c2;
    static RecurrentState zeros(const AgentConfig& config);
    bool operator==(const RecurrentState&) const = default;
};

/// Parameters bound as leaves on a tape.
struct BoundParams {
    std::vector<Var> vars;
    const Var& operator[](std::size_t i) const { return vars[i]; }
};
BoundParams bind_params(Tape& tape, const ParameterSet& params, bool requires_grad);

struct TapedState {
    LstmState core1;
    LstmState core2;
};
TapedState bind_state(Tape& tape, const RecurrentState& state);
RecurrentState read_state(const TapedState& state);

struct AgentOutputVars {
    Var logits;    // [1, A]
    Var probs;     // [1, A]
    Var log_probs; // [1, A]
    Var value;     // [1, 1]
    Var depth1;    // [1, groups * classes], from core 1
    Var depth2;    // [1, groups * classes], from core 2
    Var loop;      // [1, 1], from core 2
};

struct ObservationVars {
    Var image;       // [3, H, W]
    Var prev_action; // [1, A]
    Var prev_reward; // [1, 1]
};
ObservationVars bind_observation(Tape& tape, const Observation& obs, bool image_requires_grad = false);

/// One recorded step of the network; advances `state`.
AgentOutputVars forward(const AgentConfig& config, const BoundParams& params, const ObservationVars& obs,
                        TapedState& state);

/// Plain values of one step.
struct AgentOutput {
    std::vector<double> probs;
    double value = 0.0;
    std::vector<double> depth1;
    std::vector<double> depth2;
    double loop_logit = 0.0;
};

/// Untaped convenience wrapper: evaluates one step and returns the next state.
std::pair<AgentOutput, RecurrentState> forward_values(const AgentConfig& config, const ParameterSet& params,
                                                      const Observation& obs, const RecurrentState& state);

enum class ActionMode { Sampled, Greedy };

/// Multinomial sample (or argmax, first index on ties). Rejects negative,
/// non-finite or unnormalised distributions.
Action sample_action(std::span<const double> probs, Rng& rng, ActionMode mode = ActionMode::Sampled);

struct Checkpoint {
    AgentConfig agent;
    std::string run_config;  // serialized run configuration
    std::uint64_t config_hash = 0;
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
    std::uint64_t global_step = 0;
    ParameterSet params;
    bool operator==(const Checkpoint&) const = default;
};

/// Binary checkpoint: magic "NAVBCKPT", u32 version, then length-prefixed
/// agent config text, run config text, config hash, seeds, global step and
/// named tensors (u32 name length, name, u32 rank, u64 extents, f64 data).
/// Integers and floats are little-endian.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

} // namespace navbench
