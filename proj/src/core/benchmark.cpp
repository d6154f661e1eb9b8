#include "benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "error.hpp"
#include "hash.hpp"
#include "oracles.hpp"
#include "rng.hpp"

namespace navbench {

namespace {

constexpr std::uint64_t kMapStream = 0x6d6170;     // "map"
constexpr std::uint64_t kStaticStream = 0x737461;  // "sta"
constexpr std::uint64_t kTrainStream = 0x74726e;   // "trn"
constexpr std::uint64_t kPickStream = 0x70636b;    // "pck"
constexpr std::uint64_t kActStream = 0x616374;     // "act"
constexpr std::uint64_t kRandomPolicy = 0x706f6c;  // same stream as the metrics baseline

std::string map_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "map%04d", i);
    return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used, 0);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorKind::Parse, what + ": expected an unsigned integer, got '" + s + "'");
    }
}

int parse_int(const std::string& s, const std::string& what) {
    const std::uint64_t v = parse_u64(s, what);
    if (v > 1'000'000'000ULL) fail(ErrorKind::Parse, what + ": value out of range");
    return static_cast<int>(v);
}

} // namespace

StageSpec StageSpec::canonical(int id) {
    switch (id) {
    case 1: return {1, true, true, true};
    case 2: return {2, true, false, true};
    case 3: return {3, false, true, true};
    case 4: return {4, false, false, true};
    case 5: return {5, false, false, false};
    default: fail(ErrorKind::InvalidArgument, "stage must be 1..5, got " + std::to_string(id));
    }
}

std::string StageSpec::describe() const {
    auto sr = [](bool s) { return s ? "static" : "random"; };
    return "stage " + std::to_string(id) + " (goal " + sr(goal_static) + ", spawn " + sr(spawn_static) + ", map " +
           sr(map_static) + ")";
}

const PoolEntry& MapPool::find(std::string_view id) const {
    for (const auto& e : entries)
        if (e.id == id) return e;
    fail(ErrorKind::InvalidArgument, "map '" + std::string(id) + "' is not in the pool");
}

std::vector<std::string> MapPool::ids(MapRole role) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.role == role) out.push_back(e.id);
    return out;
}

std::vector<std::string> MapPool::static_ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.in_static) out.push_back(e.id);
    return out;
}

Maze MapPool::maze(std::string_view id) const {
    const PoolEntry& e = find(id);
    return generate_maze(e.seed, e.cols, e.rows);
}

std::string MapPool::manifest() const {
    std::string out = "# pool_seed=" + std::to_string(pool_seed) + "\n";
    for (const auto& e : entries) {
        const char* role = e.role == MapRole::Test ? "test" : (e.in_static ? "static" : "train");
        out += e.id + "\t" + std::to_string(e.seed) + "\t" + std::to_string(e.cols) + "\t" + std::to_string(e.rows) +
               "\t" + role + "\n";
    }
    return out;
}

MapPool MapPool::parse_manifest(std::string_view text) {
    MapPool pool;
    std::set<std::string> seen;
    int line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# pool_seed=", 0) == 0) pool.pool_seed = parse_u64(line.substr(12), "pool_seed");
            continue;
        }
        const auto f = split(line, '\t');
        const std::string where = "pool manifest line " + std::to_string(line_no);
        if (f.size() != 5) fail(ErrorKind::Parse, where + ": expected 5 tab-separated fields, got " + std::to_string(f.size()));
        PoolEntry e;
        e.id = f[0];
        if (e.id.empty()) fail(ErrorKind::Parse, where + ": empty map id");
        if (!seen.insert(e.id).second) fail(ErrorKind::Parse, where + ": duplicate map id '" + e.id + "'");
        e.seed = parse_u64(f[1], where);
        e.cols = parse_int(f[2], where);
        e.rows = parse_int(f[3], where);
        if (f[4] == "train") e.role = MapRole::Train;
        else if (f[4] == "test") e.role = MapRole::Test;
        else if (f[4] == "static") {
            e.role = MapRole::Train;
            e.in_static = true;
        } else {
            fail(ErrorKind::Parse, where + ": role must be train, test or static, got '" + f[4] + "'");
        }
        pool.entries.push_back(std::move(e));
    }
    if (pool.entries.empty()) fail(ErrorKind::Parse, "pool manifest lists no maps");
    return pool;
}

std::uint64_t MapPool::hash() const { return fnv1a(manifest()); }

MapPool build_pool(std::uint64_t pool_seed, int n_train, int n_test, int cols, int rows, int n_static) {
    if (n_train < 1 || n_test < 1) fail(ErrorKind::InvalidArgument, "a pool needs at least one train and one test map");
    if (n_static < 0) fail(ErrorKind::InvalidArgument, "static subset size must be >= 0");
    if (cols < 1 || rows < 1) fail(ErrorKind::InvalidArgument, "cell dimensions must be positive");
    MapPool pool;
    pool.pool_seed = pool_seed;
    std::set<std::uint64_t> seeds;
    const int total = n_train + n_test;
    for (int i = 0; i < total; ++i) {
        std::uint64_t s = derive_seed(pool_seed, kMapStream, static_cast<std::uint64_t>(i));
        for (std::uint64_t bump = 1; !seeds.insert(s).second; ++bump)
            s = derive_seed(pool_seed, kMapStream, static_cast<std::uint64_t>(i), bump);
        pool.entries.push_back({map_id(i), s, cols, rows, i < n_train ? MapRole::Train : MapRole::Test, false});
    }
    std::vector<int> order(static_cast<std::size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(pool_seed, kStaticStream));
    rng.shuffle(std::span<int>(order));
    for (int k = 0; k < std::min(n_static, n_train); ++k) pool.entries[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])].in_static = true;
    return pool;
}

MapAnnotations stage_annotations(const Maze& maze, const StageSpec& stage, const AblationFlags& flags,
                                 std::uint64_t episode_seed) {
    MapAnnotations a = annotate(maze, stage.flags(), flags.apples_present ? default_apple_count(maze) : 0, episode_seed);
    if (flags.textures_random) a.textures = assign_textures(maze, 0);
    return a;
}

std::uint64_t evaluation_episode_seed(std::uint64_t eval_seed, std::string_view map_id, std::uint64_t index) {
    return derive_seed(eval_seed, fnv1a(map_id), index);
}

std::vector<std::string> training_maps(const MapPool& pool, const StageSpec& stage, int subset) {
    if (stage.map_static) {
        auto s = pool.static_ids();
        if (s.empty()) s = pool.ids(MapRole::Train);
        return {s.front()};
    }
    auto ids = pool.ids(MapRole::Train);
    if (subset > 0 && static_cast<std::size_t>(subset) < ids.size()) ids.resize(static_cast<std::size_t>(subset));
    return ids;
}

EnvConfig stage_env(const EnvConfig& env, const StageSpec& stage) {
    EnvConfig out = env;
    out.goal_mode = stage.goal_static ? PlacementMode::Static : PlacementMode::Random;
    out.spawn_mode = stage.spawn_static ? PlacementMode::Static : PlacementMode::Random;
    out.validate();
    return out;
}

EpisodeFactory make_training_factory(const MapPool& pool, const StageSpec& stage, std::vector<std::string> map_ids,
                                     const AblationFlags& flags, const EnvConfig& env, std::uint64_t seed) {
    if (map_ids.empty()) fail(ErrorKind::InvalidArgument, "training needs at least one map");
    if (stage.map_static && map_ids.size() != 1)
        fail(ErrorKind::InvalidArgument, stage.describe() + " trains on exactly one map, got " + std::to_string(map_ids.size()));
    for (const auto& id : map_ids)
        if (pool.find(id).role != MapRole::Train)
            fail(ErrorKind::InvalidArgument, "map '" + id + "' is a test map and cannot be used for training");
    const EnvConfig cfg = stage_env(env, stage);
    auto mazes = std::make_shared<std::vector<Maze>>();
    for (const auto& id : map_ids) mazes->push_back(pool.maze(id));
    auto ids = std::make_shared<std::vector<std::string>>(std::move(map_ids));
    return [=](int worker, std::uint64_t index) {
        const std::uint64_t es = derive_seed(seed, kTrainStream, static_cast<std::uint64_t>(worker), index);
        std::size_t pick = 0;
        if (ids->size() > 1) {
            Rng rng(derive_seed(es, kPickStream));
            pick = rng.uniform_index(ids->size());
        }
        const Maze& m = (*mazes)[pick];
        return EpisodeSpec{(*ids)[pick], m, stage_annotations(m, stage, flags, es), cfg, es};
    };
}

TrainResult train_stage(const AgentConfig& agent, const TrainConfig& train_cfg, const StageSpec& stage,
                        const MapPool& pool, const std::vector<std::string>& map_ids, const AblationFlags& flags,
                        const EnvConfig& env, ParameterSet initial, const TrainCallbacks& callbacks) {
    const EpisodeFactory factory = make_training_factory(pool, stage, map_ids, flags, env, train_cfg.seed);
    return train(agent, train_cfg, std::move(initial), factory, callbacks);
}

namespace {

class NetworkController final : public Controller {
public:
    NetworkController(const AgentConfig& agent, std::shared_ptr<const ParameterSet> params, ActionMode mode,
                      std::uint64_t seed)
        : agent_(agent), params_(std::move(params)), mode_(mode), rng_(derive_seed(seed, kActStream)),
          state_(RecurrentState::zeros(agent)) {}

    Action act(const Environment& env) override {
        auto [out, next] = forward_values(agent_, *params_, env.observe(), state_);
        state_ = std::move(next);
        return sample_action(out.probs, rng_, mode_);
    }

private:
    AgentConfig agent_;
    std::shared_ptr<const ParameterSet> params_;
    ActionMode mode_;
    Rng rng_;
    RecurrentState state_;
};

class RandomController final : public Controller {
public:
    explicit RandomController(std::uint64_t seed) : rng_(derive_seed(seed, kRandomPolicy)) {}
    Action act(const Environment&) override { return static_cast<Action>(rng_.uniform_index(kActionCount)); }

private:
    Rng rng_;
};

class GeodesicController final : public Controller {
public:
    explicit GeodesicController(const Environment& env)
        : pilot_(env.maze(), env.annotations().goal, env.config().block_size(), env.config().turn_speed,
                 env.config().forward_speed) {}
    Action act(const Environment& env) override { return pilot_.next(env.pose()); }

private:
    oracle::GeodesicPilot pilot_;
};

} // namespace

ControllerFactory network_controller(const AgentConfig& agent, ParameterSet params, ActionMode mode,
                                     const EnvConfig& env) {
    agent.validate();
    if (env.render.width != agent.width || env.render.height != agent.height)
        fail(ErrorKind::Mismatch, "checkpoint agent expects " + std::to_string(agent.width) + "x" +
                                      std::to_string(agent.height) + " frames but the environment renders " +
                                      std::to_string(env.render.width) + "x" + std::to_string(env.render.height));
    if (!params.same_layout(zero_params(agent)))
        fail(ErrorKind::Mismatch, "checkpoint parameters do not match the agent configuration");
    auto shared = std::make_shared<const ParameterSet>(std::move(params));
    return [agent, shared, mode](const Environment&, std::uint64_t seed) -> std::unique_ptr<Controller> {
        return std::make_unique<NetworkController>(agent, shared, mode, seed);
    };
}

ControllerFactory random_controller() {
    return [](const Environment&, std::uint64_t seed) -> std::unique_ptr<Controller> {
        return std::make_unique<RandomController>(seed);
    };
}

ControllerFactory geodesic_controller() {
    return [](const Environment& env, std::uint64_t) -> std::unique_ptr<Controller> {
        return std::make_unique<GeodesicController>(env);
    };
}

EpisodeLog play_episode(const Maze& maze, const MapAnnotations& annotations, const EnvConfig& env_cfg,
                        const ControllerFactory& controller, std::uint64_t episode_seed, const std::string& map_id,
                        std::uint64_t config_hash) {
    Environment env(maze, annotations, env_cfg, episode_seed);
    EpisodeLog log;
    log.header = make_header(env, map_id, episode_seed, config_hash);
    log.records.reserve(static_cast<std::size_t>(env_cfg.episode_len));
    const auto ctl = controller(env, episode_seed);
    while (!env.done()) {
        const Action a = ctl->act(env);
        const StepResult r = env.step(a);
        log.records.push_back({env.t(), r.pose, a, r.reward, r.terms, r.event});
    }
    return log;
}

std::string_view variant_name(EvalVariant v) { return v == EvalVariant::Seen ? "seen" : "unseen"; }

EvalVariant parse_variant(std::string_view s) {
    if (s == "seen") return EvalVariant::Seen;
    if (s == "unseen") return EvalVariant::Unseen;
    fail(ErrorKind::InvalidArgument, "variant must be seen or unseen, got '" + std::string(s) + "'");
}

std::vector<std::string> evaluation_maps(const MapPool& pool, const EvalConfig& cfg) {
    if (!cfg.map_ids.empty()) {
        for (const auto& id : cfg.map_ids) {
            const PoolEntry& e = pool.find(id);
            if (cfg.variant == EvalVariant::Unseen && e.role != MapRole::Test)
                fail(ErrorKind::InvalidArgument, "unseen evaluation cannot use train map '" + id + "'");
        }
        return cfg.map_ids;
    }
    auto ids = cfg.variant == EvalVariant::Unseen ? pool.ids(MapRole::Test) : pool.static_ids();
    if (ids.empty()) fail(ErrorKind::InvalidArgument, "the pool has no maps for the " + std::string(variant_name(cfg.variant)) + " variant");
    return ids;
}

StageReport run_stage(const StageSpec& stage, const MapPool& pool, const EvalConfig& cfg,
                      const ControllerFactory& controller) {
    if (cfg.episodes_per_map < 1) fail(ErrorKind::InvalidArgument, "episodes per map must be >= 1");
    if (cfg.workers < 1) fail(ErrorKind::InvalidArgument, "evaluation workers must be >= 1");
    StageReport out;
    out.stage = stage;
    out.map_ids = evaluation_maps(pool, cfg);
    const EnvConfig env = stage_env(cfg.env, stage);

    std::vector<Maze> mazes;
    for (const auto& id : out.map_ids) mazes.push_back(pool.maze(id));
    const std::size_t per = static_cast<std::size_t>(cfg.episodes_per_map);
    const std::size_t jobs = mazes.size() * per;
    out.reports.resize(jobs);
    out.logs.resize(jobs);

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto work = [&] {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs) return;
            try {
                const std::size_t m = j / per;
                const auto e = static_cast<int>(j % per);
                const std::string& id = out.map_ids[m];
                const std::uint64_t es = evaluation_episode_seed(cfg.eval_seed, id, static_cast<std::uint64_t>(e));
                const MapAnnotations ann = stage_annotations(mazes[m], stage, cfg.flags, es);
                out.logs[j] = play_episode(mazes[m], ann, env, controller, es, id, cfg.config_hash);
                out.reports[j] = evaluate_episode(out.logs[j], mazes[m], id, e);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(jobs);
                return;
            }
        }
    };
    const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), jobs));
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < n; ++i) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    out.summary = aggregate(out.reports);
    return out;
}

int count_train_maps(const std::vector<EpisodeLog>& logs, const MapPool& pool) {
    int n = 0;
    for (const auto& l : logs) {
        bool train = true;
        for (const auto& e : pool.entries)
            if (e.id == l.header.map_id) train = e.role == MapRole::Train;
        n += train ? 1 : 0;
    }
    return n;
}

std::vector<AblationCell> run_ablation_grid(const StageSpec& stage, const MapPool& pool, const EvalConfig& cfg,
                                            const ControllerFactory& controller) {
    std::vector<AblationCell> cells;
    for (bool apples : {true, false})
        for (bool textures : {true, false}) {
            EvalConfig c = cfg;
            c.flags = {apples, textures};
            cells.push_back({c.flags, run_stage(stage, pool, c, controller)});
        }
    return cells;
}

std::string StageManifest::to_text() const {
    std::ostringstream o;
    o << "# navbench stage manifest\n";
    o << "code_version=" << code_version << "\n";
    o << "stage=" << stage.id << "\n";
    o << "goal_static=" << stage.goal_static << "\n";
    o << "spawn_static=" << stage.spawn_static << "\n";
    o << "map_static=" << stage.map_static << "\n";
    o << "variant=" << variant_name(variant) << "\n";
    o << "pool_seed=" << pool_seed << "\n";
    o << "pool_hash=" << hex64(pool_hash) << "\n";
    o << "checkpoint_hash=" << hex64(checkpoint_hash) << "\n";
    o << "eval_seed=" << eval_seed << "\n";
    o << "config_hash=" << hex64(config_hash) << "\n";
    o << "episodes_per_map=" << episodes_per_map << "\n";
    o << "action_mode=" << (action_mode == ActionMode::Greedy ? "greedy" : "sampled") << "\n";
    o << "apples=" << flags.apples_present << "\n";
    o << "textures=" << flags.textures_random << "\n";
    o << "maps=";
    for (std::size_t i = 0; i < map_ids.size(); ++i) o << (i ? "," : "") << map_ids[i];
    o << "\n";
    return o.str();
}

StageManifest StageManifest::from_text(std::string_view text) {
    std::unordered_map<std::string, std::string> kv;
    int line_no = 0;
    for (const std::string& raw : split(text, '\n')) {
        ++line_no;
        if (raw.empty() || raw[0] == '#') continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Parse, "stage manifest line " + std::to_string(line_no) + ": expected key=value");
        kv[raw.substr(0, eq)] = raw.substr(eq + 1);
    }
    auto get = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorKind::Parse, std::string("stage manifest is missing '") + key + "'");
        return it->second;
    };
    auto flag = [&](const char* key) {
        const std::string& v = get(key);
        if (v != "0" && v != "1") fail(ErrorKind::Parse, std::string("stage manifest: ") + key + " must be 0 or 1");
        return v == "1";
    };
    auto hex = [&](const char* key) { return parse_u64("0x" + get(key), key); };
    StageManifest m;
    m.code_version = get("code_version");
    m.stage.id = parse_int(get("stage"), "stage");
    m.stage.goal_static = flag("goal_static");
    m.stage.spawn_static = flag("spawn_static");
    m.stage.map_static = flag("map_static");
    m.variant = parse_variant(get("variant"));
    m.pool_seed = parse_u64(get("pool_seed"), "pool_seed");
    m.pool_hash = hex("pool_hash");
    m.checkpoint_hash = hex("checkpoint_hash");
    m.eval_seed = parse_u64(get("eval_seed"), "eval_seed");
    m.config_hash = hex("config_hash");
    m.episodes_per_map = parse_int(get("episodes_per_map"), "episodes_per_map");
    const std::string& mode = get("action_mode");
    if (mode == "greedy") m.action_mode = ActionMode::Greedy;
    else if (mode == "sampled") m.action_mode = ActionMode::Sampled;
    else fail(ErrorKind::Parse, "stage manifest: action_mode must be greedy or sampled");
    m.flags.apples_present = flag("apples");
    m.flags.textures_random = flag("textures");
    const std::string& maps = get("maps");
    if (!maps.empty()) m.map_ids = split(maps, ',');
    return m;
}

} // namespace navbench
