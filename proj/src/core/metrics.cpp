#include "metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace navbench {

GoalHitTimes extract_goal_hits(const EpisodeLog& log) {
    GoalHitTimes h;
    h.episode_len = log.header.episode_len;
    for (const auto& r : log.records)
        if (r.event == Event::GoalHit) h.tau.push_back(r.t);
    return h;
}

GoalHitTimes goal_hits_from_poses(const EpisodeLog& log) {
    GoalHitTimes h;
    h.episode_len = log.header.episode_len;
    for (const auto& r : log.records)
        if (distance(r.pose.x, r.pose.y, log.header.goal_x, log.header.goal_y) < log.header.goal_epsilon)
            h.tau.push_back(r.t);
    return h;
}

std::optional<double> latency_ratio(const GoalHitTimes& hits) {
    const std::size_t n = hits.count();
    if (n < 2) return std::nullopt;
    const double t1 = hits.tau.front();
    const double tn = hits.tau.back();
    return static_cast<double>(n - 1) * t1 / (tn - t1);
}

std::string_view path_mode_name(PathMode mode) { return mode == PathMode::Bfs ? "bfs" : "manhattan"; }

double shortest_path_grid(const Maze& maze, BlockCoord a, BlockCoord b, double block_size, PathMode mode) {
    if (!maze.is_floor(a) || !maze.is_floor(b)) fail(ErrorKind::InvalidArgument, "shortest path endpoints must be Floor blocks");
    const int hops = bfs_distance_field(maze, a)[maze.index(b.x, b.y)];
    if (hops < 0) {
        fail(ErrorKind::InvalidArgument, "blocks (" + std::to_string(a.x) + "," + std::to_string(a.y) + ") and (" +
                                             std::to_string(b.x) + "," + std::to_string(b.y) + ") are not connected");
    }
    if (mode == PathMode::Bfs) return hops * block_size;
    return (std::abs(a.x - b.x) + std::abs(a.y - b.y)) * block_size;
}

std::optional<double> distance_inefficiency(const EpisodeLog& log, const GoalHitTimes& hits, const Maze& maze,
                                            PathMode mode) {
    if (hits.count() < 2) return std::nullopt;
    const auto& recs = log.records;
    auto pose_at = [&](int t) -> const Pose& {
        if (t < 1 || static_cast<std::size_t>(t) > recs.size() || recs[static_cast<std::size_t>(t - 1)].t != t) {
            fail(ErrorKind::InvalidArgument, "trajectory has no record for step " + std::to_string(t));
        }
        return recs[static_cast<std::size_t>(t - 1)].pose;
    };
    const BlockCoord goal = log.header.goal;
    const double block = log.header.block_size;
    double traveled = 0.0;
    double shortest = 0.0;
    for (std::size_t i = 0; i + 1 < hits.count(); ++i) {
        const int start = hits.tau[i] + 1;
        const int stop = hits.tau[i + 1];
        for (int t = start; t < stop; ++t) {
            const Pose& a = pose_at(t);
            const Pose& b = pose_at(t + 1);
            traveled += distance(a.x, a.y, b.x, b.y);
        }
        const Pose& s = pose_at(start);
        const double grid = shortest_path_grid(maze, block_of(s.x, s.y, block), goal, block, mode);
        shortest += std::max(0.0, grid - log.header.goal_epsilon);
    }
    if (!(shortest > 0.0)) return std::nullopt;
    return traveled / shortest;
}

EpisodeReport evaluate_episode(const EpisodeLog& log, const Maze& maze, std::string map_id, int episode) {
    EpisodeReport r;
    r.map_id = std::move(map_id);
    r.episode = episode;
    const GoalHitTimes hits = extract_goal_hits(log);
    r.goal_hits = static_cast<int>(hits.count());
    r.latency = latency_ratio(hits);
    r.dist_ineff_bfs = distance_inefficiency(log, hits, maze, PathMode::Bfs);
    r.dist_ineff_manhattan = distance_inefficiency(log, hits, maze, PathMode::Manhattan);
    for (const auto& rec : log.records) {
        r.reward += rec.reward;
        if (rec.terms.apple > 0.0) ++r.apples;
    }
    return r;
}

Stat summarize(const std::vector<std::optional<double>>& values) {
    Stat s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) {
            ++s.absent;
            continue;
        }
        sum += *v;
        ++s.count;
    }
    if (s.count == 0) return s;
    s.mean = sum / s.count;
    double sq = 0.0;
    for (const auto& v : values)
        if (v) sq += (*v - s.mean) * (*v - s.mean);
    s.std = std::sqrt(sq / s.count);
    return s;
}

MetricsSummary aggregate(const std::vector<EpisodeReport>& reports) {
    if (reports.empty()) fail(ErrorKind::InvalidArgument, "aggregate needs at least one report");
    std::vector<std::optional<double>> lat, bfs, man, rew, hits;
    for (const auto& r : reports) {
        lat.push_back(r.latency);
        bfs.push_back(r.dist_ineff_bfs);
        man.push_back(r.dist_ineff_manhattan);
        rew.push_back(r.reward);
        hits.push_back(static_cast<double>(r.goal_hits));
    }
    return {summarize(lat), summarize(bfs), summarize(man), summarize(rew), summarize(hits),
            static_cast<int>(reports.size())};
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

nlohmann::json stat_json(const Stat& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}, {"absent", s.absent}};
}

} // namespace

std::string reports_to_csv(const std::vector<EpisodeReport>& reports) {
    std::string out = "map_id,episode,N,latency_ratio,dist_ineff_bfs,dist_ineff_manhattan,reward,goal_hits\n";
    for (const auto& r : reports) {
        out += r.map_id + "," + std::to_string(r.episode) + "," + std::to_string(r.goal_hits) + "," + fmt(r.latency) +
               "," + fmt(r.dist_ineff_bfs) + "," + fmt(r.dist_ineff_manhattan) + "," + fmt(r.reward) + "," +
               std::to_string(r.goal_hits) + "\n";
    }
    if (reports.empty()) return out;
    const MetricsSummary s = aggregate(reports);
    auto row = [&](const char* what, const Stat& st) {
        out += "# aggregate," + std::string(what) + ",mean=" + fmt(st.mean) + ",std=" + fmt(st.std) +
               ",count=" + std::to_string(st.count) + ",absent=" + std::to_string(st.absent) + "\n";
    };
    row("latency_ratio", s.latency);
    row("dist_ineff_bfs", s.dist_ineff_bfs);
    row("dist_ineff_manhattan", s.dist_ineff_manhattan);
    row("reward", s.reward);
    row("goal_hits", s.goal_hits);
    return out;
}

std::string summary_to_json(const MetricsSummary& s, const std::string& extra_json_fields) {
    nlohmann::json j = nlohmann::json::object();
    if (!extra_json_fields.empty()) j = nlohmann::json::parse(extra_json_fields);
    j["episodes"] = s.episodes;
    j["latency_ratio"] = stat_json(s.latency);
    j["dist_ineff_bfs"] = stat_json(s.dist_ineff_bfs);
    j["dist_ineff_manhattan"] = stat_json(s.dist_ineff_manhattan);
    j["reward"] = stat_json(s.reward);
    j["goal_hits"] = stat_json(s.goal_hits);
    return j.dump(2) + "\n";
}

std::vector<EpisodeReport> random_agent_baseline(const std::vector<BaselineMap>& maps, const EnvConfig& config,
                                                 int episodes, std::uint64_t seed, std::vector<EpisodeLog>* logs) {
    std::vector<EpisodeReport> out;
    for (std::size_t m = 0; m < maps.size(); ++m) {
        const BaselineMap& bm = maps[m];
        EnvConfig cfg = config;
        cfg.spawn_mode = bm.flags.spawn_static ? PlacementMode::Static : PlacementMode::Random;
        cfg.goal_mode = bm.flags.goal_static ? PlacementMode::Static : PlacementMode::Random;
        for (int e = 0; e < episodes; ++e) {
            const std::uint64_t es = derive_seed(seed, m, static_cast<std::uint64_t>(e));
            const MapAnnotations ann = annotate(bm.maze, bm.flags, bm.apple_count, es);
            Rng rng(derive_seed(es, 0x706f6c));
            auto policy = [&rng](const Observation&, int s) {
                return std::make_pair(static_cast<Action>(rng.uniform_index(kActionCount)), s);
            };
            EpisodeLog log = run_episode(bm.maze, ann, cfg, policy, 0, es, bm.id);
            out.push_back(evaluate_episode(log, bm.maze, bm.id, e));
            if (logs) logs->push_back(std::move(log));
        }
    }
    return out;
}

PathChoice classify_traversals(const EpisodeLog& log, const PlanningMap& map) {
    PathChoice c;
    const double block = log.header.block_size;
    int first = 0; // 0 none, 1 shorter, 2 longer
    for (const auto& r : log.records) {
        if (first == 0) {
            const BlockCoord b = block_of(r.pose.x, r.pose.y, block);
            if (b == map.short_sentinel) first = 1;
            else if (b == map.long_sentinel) first = 2;
        }
        if (r.event == Event::GoalHit) {
            if (first == 1) ++c.shorter;
            else if (first == 2) ++c.longer;
            else ++c.unresolved;
            first = 0;
        }
    }
    return c;
}

ShorterPathFraction shorter_path_fraction(const std::vector<EpisodeLog>& logs, const PlanningMap& map) {
    ShorterPathFraction f;
    std::vector<std::optional<double>> per_episode;
    for (const auto& log : logs) {
        const PathChoice c = classify_traversals(log, map);
        f.shorter += c.shorter;
        f.longer += c.longer;
        f.unresolved += c.unresolved;
        if (c.shorter + c.longer > 0) {
            per_episode.push_back(static_cast<double>(c.shorter) / (c.shorter + c.longer));
            ++f.episodes_with_choices;
        }
    }
    if (f.shorter + f.longer > 0) f.fraction = static_cast<double>(f.shorter) / (f.shorter + f.longer);
    f.episode_std = summarize(per_episode).std;
    return f;
}

} // namespace navbench
