#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace navbench {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor row(std::span<const double> values) {
        return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t k) const { return shape_.at(k); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    const double& operator[](std::size_t i) const noexcept { return data_[i]; }

    void fill(double v);
    bool all_finite() const noexcept;
    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape& tape() const noexcept { return *tape_; }
    std::uint32_t id() const noexcept { return id_; }
    const Tensor& value() const;
    const Tensor& grad() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Records primitive operations in execution order; backward() visits them
/// in exact reverse order. A tape and its nodes belong to one thread.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

    /// Leaf node. Parameters pass requires_grad = true.
    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Seeds d(root)/d(root) = 1 for a one-element root and propagates.
    void backward(Var root);

    const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
    /// Gradient of the last backward root; zeros when none reached the node.
    const Tensor& grad(std::uint32_t id);
    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Interface for primitive implementations.
    Var record(Tensor value, bool requires_grad, BackwardFn backward, const char* op);
    /// Accumulation buffer for a node's gradient, zero-initialised on first use.
    Tensor& grad_buffer(std::uint32_t id);
    const Tensor& upstream(std::uint32_t id) const { return nodes_[id].grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    Tensor zeros_;
};

// ---------------------------------------------------------------------------
// Primitives. Shape mismatches raise ErrorKind::InvalidArgument naming the op
// and shapes; a non-finite result raises ErrorKind::Numeric.

/// [m, k] x [k, n] -> [m, n].
Var matmul(Var a, Var b);
/// [m, n] + [n] broadcast over rows.
Var bias_add(Var x, Var bias);
/// [C, H, W] (*) [F, C, kh, kw] + [F] with a square stride -> [F, oh, ow].
/// No padding: oh = (H - kh) / stride + 1.
Var conv2d(Var input, Var kernel, Var bias, int stride);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
/// Softmax over the last dimension.
Var softmax(Var x);
/// log(max(x, floor)); the gradient is zero where the floor is active.
Var log(Var x, double floor = 1e-12);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
/// Concatenate along the last dimension; leading dimensions must agree.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Elements [begin, end) of the last dimension.
Var slice(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);
/// Sum of all elements, shape [1].
Var sum(Var x);
/// Mean of all elements, shape [1].
Var mean(Var x);

// ---------------------------------------------------------------------------
// Recurrent cell.

struct LstmWeights {
    Var weight; // [input + hidden, 4 * hidden], gate order i, f, o, g
    Var bias;   // [4 * hidden]
};

struct LstmState {
    Var h; // [1, hidden]
    Var c; // [1, hidden]
};

/// Standard LSTM: i, f, o = sigmoid; candidate g = tanh;
/// c' = f * c + i * g; h' = o * tanh(c').
LstmState lstm_cell(Var x, LstmState prev, const LstmWeights& weights);

// ---------------------------------------------------------------------------
// Losses. All return a one-element Var to be minimised.

/// -advantage * log pi(action). The advantage enters as a constant.
Var policy_gradient_term(Var log_probs, int action, double advantage);
/// (target - value)^2.
Var value_mse(Var value, double target);
/// sum(pi * log pi), the negative entropy; minimising it raises entropy.
Var entropy_bonus(Var probs, Var log_probs);
/// Mean cross-entropy over groups: `logits` holds targets.size() groups of
/// `classes` logits.
Var depth_ce(Var logits, std::span<const int> targets, std::size_t classes);
/// Binary cross-entropy of a logit against a {0, 1} label.
Var loop_ce(Var logit, int label, double floor = 1e-12);

/// Number of log-floor activations (zero-probability chosen actions) seen
/// by policy_gradient_term since start.
std::uint64_t policy_log_floor_hits();

} // namespace navbench
