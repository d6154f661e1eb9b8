#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>

#include "error.hpp"
#include "hash.hpp"

namespace navbench {

namespace {

struct Field {
    const char* section;
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

std::string where(const Field& f) { return std::string(f.section) + "." + f.key; }

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

template <typename T>
T parse_number(std::string_view v, const std::string& name) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty())
        fail(ErrorKind::InvalidArgument, name + ": cannot parse '" + std::string(v) + "' as a number");
    return out;
}

bool parse_bool(std::string_view v, const std::string& name) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(ErrorKind::InvalidArgument, name + ": expected true or false, got '" + std::string(v) + "'");
}

std::string fmt_double(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

template <typename T, typename Access>
Field number(const char* section, const char* key, Access access) {
    Field f{section, key, nullptr, nullptr};
    f.get = [access](const RunConfig& c) {
        const T v = access(const_cast<RunConfig&>(c));
        if constexpr (std::is_floating_point_v<T>) return fmt_double(v);
        else return std::to_string(v);
    };
    const std::string name = std::string(section) + "." + key;
    f.set = [access, name](RunConfig& c, std::string_view v) { access(c) = parse_number<T>(v, name); };
    return f;
}

template <typename Access>
Field boolean(const char* section, const char* key, Access access) {
    const std::string name = std::string(section) + "." + key;
    return {section, key, [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); },
            [access, name](RunConfig& c, std::string_view v) { access(c) = parse_bool(v, name); }};
}

ActionMode parse_mode(std::string_view v, const std::string& name) {
    if (v == "sampled") return ActionMode::Sampled;
    if (v == "greedy") return ActionMode::Greedy;
    fail(ErrorKind::InvalidArgument, name + ": expected sampled or greedy, got '" + std::string(v) + "'");
}

const char* mode_name(ActionMode m) { return m == ActionMode::Greedy ? "greedy" : "sampled"; }

#define NB_D(sec, key, expr) number<double>(sec, key, [](RunConfig& c) -> double& { return expr; })
#define NB_I(sec, key, expr) number<int>(sec, key, [](RunConfig& c) -> int& { return expr; })
#define NB_U(sec, key, expr) number<std::uint64_t>(sec, key, [](RunConfig& c) -> std::uint64_t& { return expr; })
#define NB_B(sec, key, expr) boolean(sec, key, [](RunConfig& c) -> bool& { return expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> t{
            NB_I("env", "episode_len", c.env.episode_len),
            NB_D("env", "goal_reward", c.env.goal_reward),
            NB_D("env", "apple_reward", c.env.apple_reward),
            NB_D("env", "wall_penalty_cap", c.env.wall_penalty_cap),
            NB_D("env", "wall_penalty_radius", c.env.wall_penalty_radius),
            NB_D("env", "forward_speed", c.env.forward_speed),
            NB_D("env", "turn_speed", c.env.turn_speed),
            NB_D("env", "agent_radius", c.env.agent_radius),
            NB_D("env", "goal_epsilon", c.env.goal_epsilon),
            NB_D("env", "block_size", c.env.render.block_size),
            NB_I("env", "width", c.env.render.width),
            NB_I("env", "height", c.env.render.height),
            NB_D("env", "fov", c.env.render.fov),
            NB_I("agent", "conv1_filters", c.agent.conv1_filters),
            NB_I("agent", "conv1_kernel", c.agent.conv1_kernel),
            NB_I("agent", "conv1_stride", c.agent.conv1_stride),
            NB_I("agent", "conv2_filters", c.agent.conv2_filters),
            NB_I("agent", "conv2_kernel", c.agent.conv2_kernel),
            NB_I("agent", "conv2_stride", c.agent.conv2_stride),
            NB_I("agent", "lstm1_size", c.agent.lstm1_size),
            NB_I("agent", "lstm2_size", c.agent.lstm2_size),
            NB_I("agent", "depth_groups", c.agent.depth_groups),
            NB_I("agent", "depth_classes", c.agent.depth_classes),
            NB_B("agent", "encoder_skip", c.agent.encoder_skip),
            NB_I("train", "workers", c.train.workers),
            NB_I("train", "t_max", c.train.t_max),
            NB_D("train", "gamma", c.train.gamma),
            NB_D("train", "learning_rate", c.train.learning_rate),
            NB_D("train", "adam_beta1", c.train.adam_beta1),
            NB_D("train", "adam_beta2", c.train.adam_beta2),
            NB_D("train", "adam_epsilon", c.train.adam_epsilon),
            NB_D("train", "beta_value", c.train.beta_value),
            NB_D("train", "beta_entropy", c.train.beta_entropy),
            NB_D("train", "beta_depth1", c.train.beta_depth1),
            NB_D("train", "beta_depth2", c.train.beta_depth2),
            NB_D("train", "beta_loop", c.train.beta_loop),
            NB_D("train", "clip_norm", c.train.clip_norm),
            NB_U("train", "max_steps", c.train.max_steps),
            NB_U("train", "checkpoint_every", c.train.checkpoint_every),
        };
        t.push_back({"train", "optimizer",
                     [](const RunConfig& c) { return std::string(c.train.optimizer == OptimizerKind::Sgd ? "sgd" : "adam"); },
                     [](RunConfig& c, std::string_view v) {
                         if (v == "adam") c.train.optimizer = OptimizerKind::Adam;
                         else if (v == "sgd") c.train.optimizer = OptimizerKind::Sgd;
                         else fail(ErrorKind::InvalidArgument, "train.optimizer: expected adam or sgd, got '" + std::string(v) + "'");
                     }});
        t.push_back({"train", "action_mode", [](const RunConfig& c) { return std::string(mode_name(c.train.action_mode)); },
                     [](RunConfig& c, std::string_view v) { c.train.action_mode = parse_mode(v, "train.action_mode"); }});
        t.push_back(NB_I("pool", "train", c.pool.n_train));
        t.push_back(NB_I("pool", "test", c.pool.n_test));
        t.push_back(NB_I("pool", "cols", c.pool.cols));
        t.push_back(NB_I("pool", "rows", c.pool.rows));
        t.push_back(NB_I("pool", "static", c.pool.n_static));
        t.push_back(NB_I("eval", "episodes_per_map", c.eval.episodes_per_map));
        t.push_back(NB_I("eval", "workers", c.eval.workers));
        t.push_back({"eval", "action_mode", [](const RunConfig& c) { return std::string(mode_name(c.eval.action_mode)); },
                     [](RunConfig& c, std::string_view v) { c.eval.action_mode = parse_mode(v, "eval.action_mode"); }});
        t.push_back({"eval", "variant", [](const RunConfig& c) { return std::string(variant_name(c.eval.variant)); },
                     [](RunConfig& c, std::string_view v) { c.eval.variant = parse_variant(v); }});
        t.push_back(NB_B("eval", "apples", c.eval.flags.apples_present));
        t.push_back(NB_B("eval", "textures", c.eval.flags.textures_random));
        t.push_back(NB_I("stage", "id", c.stage.id));
        t.push_back(NB_I("stage", "train_subset", c.stage.train_subset));
        return t;
    }();
    return table;
}

#undef NB_D
#undef NB_I
#undef NB_U
#undef NB_B

const Field& find_field(std::string_view section, std::string_view key) {
    for (const auto& f : fields())
        if (section == f.section && key == f.key) return f;
    fail(ErrorKind::InvalidArgument, "unknown configuration key '" + std::string(section) + "." + std::string(key) + "'");
}

} // namespace

RunConfig RunConfig::defaults(bool paper_scale) {
    RunConfig c;
    if (paper_scale) {
        c.agent = AgentConfig::paper_scale();
        c.env.render.width = c.agent.width;
        c.env.render.height = c.agent.height;
        c.train.workers = 16;
        c.pool.n_train = 1000;
        c.pool.n_test = 100;
        c.eval.episodes_per_map = 10;
    }
    return c;
}

void RunConfig::set(std::string_view section, std::string_view key, std::string_view value) {
    find_field(section, key).set(*this, trim(value));
}

void RunConfig::set_dotted(std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
        fail(ErrorKind::InvalidArgument, "override must look like section.key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)), assignment.substr(eq + 1));
}

void RunConfig::apply_text(std::string_view text) {
    std::string section;
    std::size_t start = 0;
    int line_no = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line(text.substr(start, nl - start));
        start = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string at = "config line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorKind::InvalidArgument, at + "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::InvalidArgument, at + "expected key = value");
        if (section.empty()) fail(ErrorKind::InvalidArgument, at + "key outside of any [section]");
        try {
            set(section, trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
        } catch (const Error& e) {
            fail(ErrorKind::InvalidArgument, at + e.what());
        }
        if (start > text.size()) break;
    }
}

void RunConfig::apply_environment(const std::vector<std::string>& entries) {
    constexpr std::string_view prefix = "NAVBENCH_";
    for (const auto& e : entries) {
        if (e.rfind(prefix, 0) != 0) continue;
        const auto eq = e.find('=');
        if (eq == std::string::npos) continue;
        std::string name = e.substr(prefix.size(), eq - prefix.size());
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        const auto us = name.find('_');
        if (us == std::string::npos)
            fail(ErrorKind::InvalidArgument, "environment variable " + e.substr(0, eq) + " does not name a section and key");
        try {
            set(name.substr(0, us), name.substr(us + 1), e.substr(eq + 1));
        } catch (const Error& err) {
            fail(ErrorKind::InvalidArgument, "environment variable " + e.substr(0, eq) + ": " + err.what());
        }
    }
}

std::string RunConfig::to_text() const {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            section = f.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(*this) + "\n";
    }
    return out;
}

RunConfig RunConfig::from_text(std::string_view text) {
    RunConfig c;
    c.apply_text(text);
    c.finalize();
    return c;
}

void RunConfig::finalize() {
    agent.width = env.render.width;
    agent.height = env.render.height;
    env.validate();
    agent.validate();
    train.validate();
    if (pool.n_train < 1 || pool.n_test < 1) fail(ErrorKind::InvalidArgument, "pool.train and pool.test must be >= 1");
    if (pool.cols < 1 || pool.rows < 1) fail(ErrorKind::InvalidArgument, "pool.cols and pool.rows must be >= 1");
    if (pool.n_static < 1) fail(ErrorKind::InvalidArgument, "pool.static must be >= 1");
    if (eval.episodes_per_map < 1) fail(ErrorKind::InvalidArgument, "eval.episodes_per_map must be >= 1");
    if (eval.workers < 1) fail(ErrorKind::InvalidArgument, "eval.workers must be >= 1");
    StageSpec::canonical(stage.id);
    if (stage.train_subset < 0) fail(ErrorKind::InvalidArgument, "stage.train_subset must be >= 0");
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_text()); }

std::uint64_t RunConfig::model_hash() const {
    std::string s;
    for (const auto& f : fields())
        if (std::string_view(f.section) == "env" || std::string_view(f.section) == "agent")
            s += where(f) + "=" + f.get(*this) + "\n";
    return fnv1a(s);
}

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(where(f));
    return out;
}

std::uint64_t model_hash_of(std::string_view run_config_text) {
    RunConfig c;
    c.apply_text(run_config_text);
    return c.model_hash();
}

} // namespace navbench
