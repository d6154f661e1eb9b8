#include "agent.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "error.hpp"

namespace navbench {

namespace {

enum Param : std::size_t {
    kConv1W, kConv1B, kConv2W, kConv2B, kCore1W, kCore1B, kCore2W, kCore2B,
    kPolicyW, kPolicyB, kValueW, kValueB, kDepth1W, kDepth1B, kDepth2W, kDepth2B, kLoopW, kLoopB,
    kParamCount
};

constexpr std::uint64_t kInitStream = 0x696e6974; // "init"

struct ParamSpec {
    const char* name;
    Shape shape;
    std::size_t fan_in; // 0 for biases
};

std::vector<ParamSpec> param_specs(const AgentConfig& c) {
    const auto z = [](int v) { return static_cast<std::size_t>(v); };
    const std::size_t gd = z(c.depth_groups * c.depth_classes);
    const std::size_t h1 = z(c.lstm1_size), h2 = z(c.lstm2_size), a = z(c.action_count);
    return {
        {"conv1.w", {z(c.conv1_filters), 3, z(c.conv1_kernel), z(c.conv1_kernel)}, z(3 * c.conv1_kernel * c.conv1_kernel)},
        {"conv1.b", {z(c.conv1_filters)}, 0},
        {"conv2.w", {z(c.conv2_filters), z(c.conv1_filters), z(c.conv2_kernel), z(c.conv2_kernel)},
         z(c.conv1_filters * c.conv2_kernel * c.conv2_kernel)},
        {"conv2.b", {z(c.conv2_filters)}, 0},
        {"core1.w", {z(c.core1_input()) + h1, 4 * h1}, z(c.core1_input()) + h1},
        {"core1.b", {4 * h1}, 0},
        {"core2.w", {z(c.core2_input()) + h2, 4 * h2}, z(c.core2_input()) + h2},
        {"core2.b", {4 * h2}, 0},
        {"policy.w", {h2, a}, h2},
        {"policy.b", {a}, 0},
        {"value.w", {h2, 1}, h2},
        {"value.b", {1}, 0},
        {"depth1.w", {h1, gd}, h1},
        {"depth1.b", {gd}, 0},
        {"depth2.w", {h2, gd}, h2},
        {"depth2.b", {gd}, 0},
        {"loop.w", {h2, 1}, h2},
        {"loop.b", {1}, 0},
    };
}

} // namespace

AgentConfig AgentConfig::paper_scale() {
    AgentConfig c;
    c.width = 84;
    c.height = 84;
    c.lstm1_size = 256;
    c.lstm2_size = 64;
    return c;
}

void AgentConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v < 1) fail(ErrorKind::InvalidArgument, std::string("agent ") + what + " must be positive");
    };
    positive(width, "width");
    positive(height, "height");
    positive(conv1_filters, "conv1 filters");
    positive(conv1_kernel, "conv1 kernel");
    positive(conv1_stride, "conv1 stride");
    positive(conv2_filters, "conv2 filters");
    positive(conv2_kernel, "conv2 kernel");
    positive(conv2_stride, "conv2 stride");
    positive(lstm1_size, "lstm1 size");
    positive(lstm2_size, "lstm2 size");
    positive(depth_groups, "depth groups");
    positive(depth_classes, "depth classes");
    if (action_count != kActionCount) fail(ErrorKind::InvalidArgument, "agent action count must be 4");
    if (width < conv1_kernel || height < conv1_kernel || conv1_out_w() < conv2_kernel || conv1_out_h() < conv2_kernel)
        fail(ErrorKind::InvalidArgument, "image of " + std::to_string(width) + "x" + std::to_string(height) +
                                             " is too small for the encoder kernels");
    if (depth_groups > width) fail(ErrorKind::InvalidArgument, "more depth groups than image columns");
}

std::string AgentConfig::to_text() const {
    std::ostringstream o;
    o << "width=" << width << "\nheight=" << height << "\nconv1_filters=" << conv1_filters
      << "\nconv1_kernel=" << conv1_kernel << "\nconv1_stride=" << conv1_stride << "\nconv2_filters=" << conv2_filters
      << "\nconv2_kernel=" << conv2_kernel << "\nconv2_stride=" << conv2_stride << "\nlstm1_size=" << lstm1_size
      << "\nlstm2_size=" << lstm2_size << "\naction_count=" << action_count << "\ndepth_groups=" << depth_groups
      << "\ndepth_classes=" << depth_classes << "\nencoder_skip=" << (encoder_skip ? 1 : 0) << "\n";
    return o.str();
}

AgentConfig AgentConfig::from_text(std::string_view text) {
    AgentConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Parse, "agent config line without '=': " + line);
        const std::string key = line.substr(0, eq);
        int v = 0;
        try {
            v = std::stoi(line.substr(eq + 1));
        } catch (const std::exception&) {
            fail(ErrorKind::Parse, "agent config value is not an integer: " + line);
        }
        if (key == "width") c.width = v;
        else if (key == "height") c.height = v;
        else if (key == "conv1_filters") c.conv1_filters = v;
        else if (key == "conv1_kernel") c.conv1_kernel = v;
        else if (key == "conv1_stride") c.conv1_stride = v;
        else if (key == "conv2_filters") c.conv2_filters = v;
        else if (key == "conv2_kernel") c.conv2_kernel = v;
        else if (key == "conv2_stride") c.conv2_stride = v;
        else if (key == "lstm1_size") c.lstm1_size = v;
        else if (key == "lstm2_size") c.lstm2_size = v;
        else if (key == "action_count") c.action_count = v;
        else if (key == "depth_groups") c.depth_groups = v;
        else if (key == "depth_classes") c.depth_classes = v;
        else if (key == "encoder_skip") c.encoder_skip = v != 0;
        else fail(ErrorKind::Parse, "unknown agent config key '" + key + "'");
    }
    c.validate();
    return c;
}

void ParameterSet::add(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
}

std::size_t ParameterSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    fail(ErrorKind::InvalidArgument, "no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterSet::element_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].shape() != other.tensors_[i].shape()) return false;
    return true;
}

ParameterSet init_params(std::uint64_t seed, const AgentConfig& config) {
    config.validate();
    ParameterSet p;
    const auto specs = param_specs(config);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Tensor t(specs[i].shape, 0.0);
        if (specs[i].fan_in > 0) {
            Rng rng(derive_seed(seed, kInitStream, i));
            const double bound = std::sqrt(3.0 / static_cast<double>(specs[i].fan_in));
            for (auto& v : t.data()) v = rng.uniform(-bound, bound);
        }
        p.add(specs[i].name, std::move(t));
    }
    for (const auto [idx, hidden] : {std::pair{kCore1B, config.lstm1_size}, std::pair{kCore2B, config.lstm2_size}}) {
        Tensor& b = p[idx];
        for (int k = 0; k < hidden; ++k) b[static_cast<std::size_t>(hidden + k)] = 1.0;
    }
    return p;
}

ParameterSet zero_params(const AgentConfig& config) {
    config.validate();
    ParameterSet p;
    for (const auto& s : param_specs(config)) p.add(s.name, Tensor(s.shape, 0.0));
    return p;
}

RecurrentState RecurrentState::zeros(const AgentConfig& c) {
    const auto h1 = static_cast<std::size_t>(c.lstm1_size), h2 = static_cast<std::size_t>(c.lstm2_size);
    return {Tensor({1, h1}), Tensor({1, h1}), Tensor({1, h2}), Tensor({1, h2})};
}

BoundParams bind_params(Tape& tape, const ParameterSet& params, bool requires_grad) {
    BoundParams b;
    b.vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) b.vars.push_back(tape.leaf(params[i], requires_grad));
    return b;
}

TapedState bind_state(Tape& tape, const RecurrentState& s) {
    return {{tape.constant(s.h1), tape.constant(s.c1)}, {tape.constant(s.h2), tape.constant(s.c2)}};
}

RecurrentState read_state(const TapedState& s) {
    return {s.core1.h.value(), s.core1.c.value(), s.core2.h.value(), s.core2.c.value()};
}

ObservationVars bind_observation(Tape& tape, const Observation& obs, bool image_requires_grad) {
    const auto h = static_cast<std::size_t>(obs.image.height), w = static_cast<std::size_t>(obs.image.width);
    return {tape.leaf(Tensor({3, h, w}, obs.image.data), image_requires_grad),
            tape.constant(Tensor::row(obs.prev_action)), tape.constant(Tensor({1, 1}, obs.prev_reward))};
}

AgentOutputVars forward(const AgentConfig& c, const BoundParams& p, const ObservationVars& obs, TapedState& state) {
    if (p.vars.size() != kParamCount) fail(ErrorKind::InvalidArgument, "forward: parameter set has wrong size");
    const Shape& img = obs.image.shape();
    if (img != Shape{3, static_cast<std::size_t>(c.height), static_cast<std::size_t>(c.width)})
        fail(ErrorKind::InvalidArgument, "forward: observation " + shape_string(img) + " does not match agent input [3," +
                                             std::to_string(c.height) + "," + std::to_string(c.width) + "]");
    const Var f1 = relu(conv2d(obs.image, p[kConv1W], p[kConv1B], c.conv1_stride));
    const Var f2 = relu(conv2d(f1, p[kConv2W], p[kConv2B], c.conv2_stride));
    const Var o = reshape(f2, {1, static_cast<std::size_t>(c.encoder_size())});

    state.core1 = lstm_cell(concat({o, obs.prev_reward}), state.core1, {p[kCore1W], p[kCore1B]});
    const Var h1 = state.core1.h;
    const Var in2 = c.encoder_skip ? concat({h1, o, obs.prev_action}) : concat({h1, obs.prev_action});
    state.core2 = lstm_cell(in2, state.core2, {p[kCore2W], p[kCore2B]});
    const Var h2 = state.core2.h;

    AgentOutputVars out;
    out.logits = bias_add(matmul(h2, p[kPolicyW]), p[kPolicyB]);
    out.probs = softmax(out.logits);
    out.log_probs = log(out.probs, 1e-12);
    out.value = bias_add(matmul(h2, p[kValueW]), p[kValueB]);
    out.depth1 = bias_add(matmul(h1, p[kDepth1W]), p[kDepth1B]);
    out.depth2 = bias_add(matmul(h2, p[kDepth2W]), p[kDepth2B]);
    out.loop = bias_add(matmul(h2, p[kLoopW]), p[kLoopB]);
    return out;
}

std::pair<AgentOutput, RecurrentState> forward_values(const AgentConfig& config, const ParameterSet& params,
                                                      const Observation& obs, const RecurrentState& state) {
    Tape tape;
    const BoundParams p = bind_params(tape, params, false);
    TapedState s = bind_state(tape, state);
    const AgentOutputVars o = forward(config, p, bind_observation(tape, obs), s);
    AgentOutput out;
    out.probs.assign(o.probs.value().data().begin(), o.probs.value().data().end());
    out.value = o.value.value()[0];
    out.depth1.assign(o.depth1.value().data().begin(), o.depth1.value().data().end());
    out.depth2.assign(o.depth2.value().data().begin(), o.depth2.value().data().end());
    out.loop_logit = o.loop.value()[0];
    return {std::move(out), read_state(s)};
}

Action sample_action(std::span<const double> probs, Rng& rng, ActionMode mode) {
    if (probs.size() != static_cast<std::size_t>(kActionCount))
        fail(ErrorKind::InvalidArgument, "policy must have 4 entries, got " + std::to_string(probs.size()));
    double total = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) fail(ErrorKind::InvalidArgument, "policy has a negative or non-finite entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) fail(ErrorKind::InvalidArgument, "policy sums to " + std::to_string(total));
    if (mode == ActionMode::Greedy) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return static_cast<Action>(best);
    }
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<Action>(i);
    }
    // Rounding left u past the last edge; take the last action with mass.
    for (std::size_t i = probs.size(); i-- > 0;)
        if (probs[i] > 0.0) return static_cast<Action>(i);
    return Action::Forward;
}

namespace {

constexpr char kMagic[8] = {'N', 'A', 'V', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::string& out, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        out.append(bytes.data(), bytes.size());
    } else {
        char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        out.append(bytes, sizeof(T));
    }
}

void put_string(std::string& out, std::string_view s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        if constexpr (std::endian::native == std::endian::big) {
            std::array<char, sizeof(T)> b;
            std::memcpy(b.data(), bytes_.data() + pos_, sizeof(T));
            std::reverse(b.begin(), b.end());
            v = std::bit_cast<T>(b);
        } else {
            std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        }
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(bytes_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        const auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            fail(ErrorKind::Parse, "checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, c.agent.to_text());
    put_string(out, c.run_config);
    put<std::uint64_t>(out, c.config_hash);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.seeds.size()));
    for (const auto& [name, v] : c.seeds) {
        put_string(out, name);
        put<std::uint64_t>(out, v);
    }
    put<std::uint64_t>(out, c.global_step);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        const Tensor& t = c.params[i];
        put_string(out, c.params.name(i));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(out, d);
        for (double v : t.data()) put<double>(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
        fail(ErrorKind::Parse, "not a checkpoint file (bad magic bytes)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        fail(ErrorKind::Parse, "unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.agent = AgentConfig::from_text(r.get_string());
    c.run_config = r.get_string();
    c.config_hash = r.get<std::uint64_t>();
    const auto nseeds = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < nseeds; ++i) {
        std::string name = r.get_string();
        c.seeds.emplace_back(std::move(name), r.get<std::uint64_t>());
    }
    c.global_step = r.get<std::uint64_t>();
    const auto ntensors = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < ntensors; ++i) {
        std::string name = r.get_string();
        const auto rank = r.get<std::uint32_t>();
        if (rank > 8) fail(ErrorKind::Parse, "tensor '" + name + "' has implausible rank " + std::to_string(rank));
        Shape shape;
        for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>());
        const std::size_t n = shape_size(shape);
        if (n > bytes.size()) fail(ErrorKind::Parse, "tensor '" + name + "' is larger than the file");
        std::vector<double> data(n);
        for (auto& v : data) v = r.get<double>();
        c.params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.done()) fail(ErrorKind::Parse, "trailing bytes after checkpoint tensors");
    if (!c.params.same_layout(zero_params(c.agent)))
        fail(ErrorKind::Mismatch, "checkpoint tensors do not match its agent configuration");
    return c;
}

} // namespace navbench
