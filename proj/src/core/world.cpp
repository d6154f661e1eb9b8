#include "world.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hash.hpp"

namespace navbench {
namespace {

constexpr std::uint64_t kHeadingStream = 0x68656164; // "head"
constexpr std::uint64_t kSpawnStream = 0x7370776e;   // "spwn"

double rect_distance(double x, double y, double x0, double y0, double x1, double y1) {
    const double dx = std::max({x0 - x, 0.0, x - x1});
    const double dy = std::max({y0 - y, 0.0, y - y1});
    return std::hypot(dx, dy);
}

} // namespace

void EnvConfig::validate() const {
    render.validate();
    if (episode_len <= 0) fail(ErrorKind::InvalidArgument, "episode length must be positive");
    if (!(goal_epsilon > 0.0) || !(goal_epsilon < block_size())) {
        fail(ErrorKind::InvalidArgument, "goal epsilon must lie in (0, block size)");
    }
    if (wall_penalty_cap > 0.0) fail(ErrorKind::InvalidArgument, "wall penalty cap must be <= 0");
    if (!(wall_penalty_radius > 0.0)) fail(ErrorKind::InvalidArgument, "wall penalty radius must be positive");
    if (!(agent_radius > 0.0) || !(2.0 * agent_radius < block_size())) {
        fail(ErrorKind::InvalidArgument, "agent diameter must be smaller than a block");
    }
    if (!(forward_speed > 0.0) || !(forward_speed < block_size() - 2.0 * agent_radius)) {
        fail(ErrorKind::InvalidArgument, "forward speed must be positive and below the corridor clearance");
    }
    if (!(turn_speed > 0.0)) fail(ErrorKind::InvalidArgument, "turn speed must be positive");
}

std::string_view event_name(Event e) {
    switch (e) {
    case Event::None: return "none";
    case Event::AppleHit: return "apple";
    case Event::GoalHit: return "goal";
    case Event::Respawn: return "respawn";
    case Event::WallContact: return "wall";
    }
    return "none";
}

Event parse_event(std::string_view name) {
    for (const Event e : {Event::None, Event::AppleHit, Event::GoalHit, Event::Respawn, Event::WallContact}) {
        if (event_name(e) == name) return e;
    }
    fail(ErrorKind::Parse, "unknown event '" + std::string(name) + "'");
}

double distance_to_wall(const Maze& maze, double block_size, double x, double y, double search) {
    const BlockCoord c = block_of(x, y, block_size);
    const int reach = static_cast<int>(std::ceil(search / block_size)) + 1;
    double best = std::numeric_limits<double>::infinity();
    for (int by = c.y - reach; by <= c.y + reach; ++by) {
        for (int bx = c.x - reach; bx <= c.x + reach; ++bx) {
            if (maze.is_floor(bx, by)) continue;
            best = std::min(best, rect_distance(x, y, bx * block_size, by * block_size, (bx + 1) * block_size,
                                                (by + 1) * block_size));
        }
    }
    return best;
}

Environment::Environment(Maze maze, MapAnnotations annotations, EnvConfig config, std::uint64_t episode_seed)
    : maze_(std::move(maze)), annotations_(std::move(annotations)), config_(config), rng_(episode_seed) {
    config_.validate();
    if (!maze_.is_floor(annotations_.goal)) fail(ErrorKind::InvalidArgument, "goal must lie on a Floor block");
    if (config_.spawn_mode == PlacementMode::Static) {
        if (!annotations_.spawn) fail(ErrorKind::InvalidArgument, "static spawn mode needs a spawn block");
        if (!maze_.is_floor(*annotations_.spawn) || *annotations_.spawn == annotations_.goal) {
            fail(ErrorKind::InvalidArgument, "spawn must be a Floor block distinct from the goal");
        }
    } else if (maze_.floor_count() < 2) {
        fail(ErrorKind::InvalidArgument, "random spawns need a Floor block besides the goal");
    }
    for (const BlockCoord a : annotations_.apples) {
        if (!maze_.is_floor(a) || a == annotations_.goal) {
            fail(ErrorKind::InvalidArgument, "apples must lie on Floor blocks other than the goal");
        }
    }
    if (annotations_.textures.ids.size() != maze_.blocks().size()) annotations_.textures = zero_textures(maze_);
    apple_alive_.assign(annotations_.apples.size(), 1);
    respawn();
}

void Environment::respawn() {
    if (config_.spawn_mode == PlacementMode::Static) {
        spawn_block_ = *annotations_.spawn;
        const auto c = block_center(spawn_block_, config_.block_size());
        pose_ = {c[0], c[1], 0.0};
        return;
    }
    std::vector<BlockCoord> options;
    for (const BlockCoord f : maze_.floor_blocks()) {
        if (f != annotations_.goal) options.push_back(f);
    }
    spawn_block_ = options[static_cast<std::size_t>(rng_.uniform_index(options.size()))];
    const auto c = block_center(spawn_block_, config_.block_size());
    pose_ = {c[0], c[1], wrap_angle(rng_.uniform(0.0, kTwoPi))};
}

bool Environment::translate(double dx, double dy) {
    const double b = config_.block_size();
    const double r = config_.agent_radius;
    bool clamped = false;

    // Axis-separable sweep: x first, then y with the updated x.
    if (dx != 0.0) {
        double nx = pose_.x + dx;
        const int j_lo = static_cast<int>(std::floor((pose_.y - r) / b));
        const int j_hi = static_cast<int>(std::ceil((pose_.y + r) / b)) - 1;
        const int col = dx > 0.0 ? static_cast<int>(std::ceil((nx + r) / b)) - 1
                                 : static_cast<int>(std::floor((nx - r) / b));
        for (int j = j_lo; j <= j_hi; ++j) {
            if (!maze_.is_floor(col, j)) {
                nx = dx > 0.0 ? col * b - r : (col + 1) * b + r;
                clamped = true;
                break;
            }
        }
        pose_.x = nx;
    }
    if (dy != 0.0) {
        double ny = pose_.y + dy;
        const int i_lo = static_cast<int>(std::floor((pose_.x - r) / b));
        const int i_hi = static_cast<int>(std::ceil((pose_.x + r) / b)) - 1;
        const int row = dy > 0.0 ? static_cast<int>(std::ceil((ny + r) / b)) - 1
                                 : static_cast<int>(std::floor((ny - r) / b));
        for (int i = i_lo; i <= i_hi; ++i) {
            if (!maze_.is_floor(i, row)) {
                ny = dy > 0.0 ? row * b - r : (row + 1) * b + r;
                clamped = true;
                break;
            }
        }
        pose_.y = ny;
    }
    return clamped;
}

StepResult Environment::step(Action action) {
    if (done()) fail(ErrorKind::Contract, "step called after the episode finished (t = " + std::to_string(t_) + ")");

    bool clamped = false;
    switch (action) {
    case Action::Forward:
    case Action::Backward: {
        const double s = action == Action::Forward ? config_.forward_speed : -config_.forward_speed;
        clamped = translate(s * std::cos(pose_.heading), s * std::sin(pose_.heading));
        break;
    }
    case Action::RotateLeft: pose_.heading = wrap_angle(pose_.heading + config_.turn_speed); break;
    case Action::RotateRight: pose_.heading = wrap_angle(pose_.heading - config_.turn_speed); break;
    }
    ++t_;

    StepResult res;
    const double d = wall_distance();
    res.terms.wall = config_.wall_penalty_cap * std::max(0.0, 1.0 - d / config_.wall_penalty_radius);

    Event event = clamped ? Event::WallContact : Event::None;
    const BlockCoord here = block_of(pose_.x, pose_.y, config_.block_size());
    for (std::size_t i = 0; i < annotations_.apples.size(); ++i) {
        if (apple_alive_[i] && annotations_.apples[i] == here) {
            apple_alive_[i] = 0;
            ++apples_collected_;
            res.terms.apple += config_.apple_reward;
            event = Event::AppleHit;
        }
    }
    if (pending_respawn_event_) {
        event = Event::Respawn;
        pending_respawn_event_ = false;
    }

    res.pose = pose_;
    const auto goal = goal_position();
    if (distance(pose_.x, pose_.y, goal[0], goal[1]) < config_.goal_epsilon) {
        res.terms.goal = config_.goal_reward;
        event = Event::GoalHit;
        respawn();
        pending_respawn_event_ = true;
    }

    res.reward = res.terms.total();
    res.event = event;
    res.done = done();
    prev_action_ = action;
    prev_reward_ = res.reward;
    return res;
}

double Environment::wall_distance() const {
    return distance_to_wall(maze_, config_.block_size(), pose_.x, pose_.y, config_.wall_penalty_radius);
}

std::vector<BlockCoord> Environment::live_apples() const {
    std::vector<BlockCoord> out;
    for (std::size_t i = 0; i < annotations_.apples.size(); ++i) {
        if (apple_alive_[i]) out.push_back(annotations_.apples[i]);
    }
    return out;
}

Image Environment::render_view() const {
    return render(maze_, annotations_.textures, pose_, config_.render, {annotations_.goal, live_apples()});
}

Observation Environment::observe() const {
    Observation obs;
    obs.image = render_view();
    if (prev_action_) obs.prev_action[static_cast<std::size_t>(*prev_action_)] = 1.0;
    obs.prev_reward = prev_reward_;
    return obs;
}

EpisodeHeader make_header(const Environment& env, std::string map_id, std::uint64_t episode_seed,
                          std::uint64_t config_hash) {
    EpisodeHeader h;
    h.map_id = std::move(map_id);
    h.map_seed = env.maze().seed();
    h.episode_seed = episode_seed;
    h.config_hash = config_hash;
    h.goal = env.annotations().goal;
    const auto g = env.goal_position();
    h.goal_x = g[0];
    h.goal_y = g[1];
    h.goal_epsilon = env.config().goal_epsilon;
    h.block_size = env.config().block_size();
    h.episode_len = env.config().episode_len;
    h.start = env.pose();
    return h;
}

std::string encode_episode_log(const EpisodeLog& log) {
    using nlohmann::json;
    const auto& h = log.header;
    json header = {
        {"version", std::string(kCodeVersion)},
        {"map_id", h.map_id},
        {"map_seed", h.map_seed},
        {"episode_seed", h.episode_seed},
        {"config_hash", hex64(h.config_hash)},
        {"goal", {h.goal.x, h.goal.y}},
        {"goal_pos", {h.goal_x, h.goal_y}},
        {"epsilon", h.goal_epsilon},
        {"block", h.block_size},
        {"T", h.episode_len},
        {"start", {h.start.x, h.start.y, h.start.heading}},
    };
    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& r : log.records) {
        json rec = {{"t", r.t},
                    {"x", r.pose.x},
                    {"y", r.pose.y},
                    {"h", r.pose.heading},
                    {"a", static_cast<int>(r.action)},
                    {"r", r.reward},
                    {"e", std::string(event_name(r.event))},
                    {"rt", {r.terms.apple, r.terms.goal, r.terms.wall}}};
        out += rec.dump();
        out.push_back('\n');
    }
    return out;
}

EpisodeLog decode_episode_log(std::string_view text) {
    using nlohmann::json;
    EpisodeLog log;
    std::size_t pos = 0;
    int line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, (nl == std::string_view::npos ? text.size() : nl) - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, "trajectory log line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (!j.contains("goal") || !j.contains("goal_pos")) {
                    fail(ErrorKind::Parse, "trajectory log header is missing the goal");
                }
                auto& h = log.header;
                h.map_id = j.value("map_id", std::string{});
                h.map_seed = j.value("map_seed", std::uint64_t{0});
                h.episode_seed = j.value("episode_seed", std::uint64_t{0});
                h.config_hash = std::stoull(j.value("config_hash", std::string("0")), nullptr, 16);
                h.goal = {j["goal"][0].get<int>(), j["goal"][1].get<int>()};
                h.goal_x = j["goal_pos"][0].get<double>();
                h.goal_y = j["goal_pos"][1].get<double>();
                h.goal_epsilon = j.at("epsilon").get<double>();
                h.block_size = j.at("block").get<double>();
                h.episode_len = j.at("T").get<int>();
                h.start = {j["start"][0].get<double>(), j["start"][1].get<double>(), j["start"][2].get<double>()};
                have_header = true;
                continue;
            }
            TrajectoryRecord r;
            r.t = j.at("t").get<int>();
            r.pose = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("h").get<double>()};
            const int a = j.at("a").get<int>();
            if (a < 0 || a >= kActionCount) fail(ErrorKind::Parse, "action index out of range");
            r.action = static_cast<Action>(a);
            r.reward = j.at("r").get<double>();
            r.event = parse_event(j.at("e").get<std::string>());
            if (j.contains("rt")) r.terms = {j["rt"][0].get<double>(), j["rt"][1].get<double>(), j["rt"][2].get<double>()};
            log.records.push_back(r);
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, "trajectory log line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Parse && !have_header) throw;
            fail(ErrorKind::Parse, "trajectory log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) fail(ErrorKind::Parse, "trajectory log header is missing the goal");
    return log;
}

} // namespace navbench
