#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "maze.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "world.hpp"

using namespace navbench;

namespace {

const char* kCorridor =
    "#######\n"
    "#S...G#\n"
    "#######\n";

// Goal two blocks east of the spawn but reachable only around a wall.
const char* kDetour =
    "#######\n"
    "#S#G..#\n"
    "#.###.#\n"
    "#.....#\n"
    "#######\n";

EpisodeLog forward_only(const ParsedMap& pm, int len) {
    EnvConfig cfg;
    cfg.episode_len = len;
    auto policy = [](const Observation&, int s) { return std::make_pair(Action::Forward, s); };
    return run_episode(pm.maze, pm.annotations(), cfg, policy, 0, 1, "corridor");
}

GoalHitTimes hits_of(std::vector<int> tau, int len = 1200) {
    GoalHitTimes h;
    h.tau = std::move(tau);
    h.episode_len = len;
    return h;
}

} // namespace

TEST(Latency, HandValues) {
    EXPECT_DOUBLE_EQ(*latency_ratio(hits_of({100, 150})), 2.0);
    EXPECT_DOUBLE_EQ(*latency_ratio(hits_of({300, 600, 900})), 1.0);
    EXPECT_DOUBLE_EQ(*latency_ratio(hits_of({10, 110, 210, 310})), 0.1);
    EXPECT_FALSE(latency_ratio(hits_of({500})).has_value());
    EXPECT_FALSE(latency_ratio(hits_of({})).has_value());
}

TEST(Metrics, CorridorWalkerIsExactlyEfficient) {
    const ParsedMap pm = parse_map(kCorridor);
    const EpisodeLog log = forward_only(pm, 300);
    const GoalHitTimes h = extract_goal_hits(log);
    // Spawn centre 150, goal centre 550, epsilon 50, 25 per step: first hit at t = 15,
    // then every 15 steps (the respawned record already moved once).
    ASSERT_GE(h.count(), 2u);
    EXPECT_EQ(h.tau[0], 15);
    for (std::size_t i = 1; i < h.count(); ++i) EXPECT_EQ(h.tau[i] - h.tau[i - 1], 15);
    EXPECT_DOUBLE_EQ(*latency_ratio(h), 1.0);
    EXPECT_NEAR(*distance_inefficiency(log, h, pm.maze, PathMode::Bfs), 1.0, 1e-12);
    EXPECT_EQ(goal_hits_from_poses(log).tau, h.tau);
}

TEST(Metrics, ShortestPathModes) {
    const Maze m = parse_map(kDetour).maze;
    EXPECT_DOUBLE_EQ(shortest_path_grid(m, {1, 1}, {3, 1}, 100.0, PathMode::Manhattan), 200.0);
    EXPECT_DOUBLE_EQ(shortest_path_grid(m, {1, 1}, {3, 1}, 100.0, PathMode::Bfs), 1000.0);
    EXPECT_THROW(shortest_path_grid(m, {2, 1}, {3, 1}, 100.0, PathMode::Bfs), Error);
    EXPECT_EQ(path_mode_name(PathMode::Bfs), "bfs");
}

TEST(Metrics, HitsFromEventsMatchPosesOnRandomEpisodes) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Maze m = generate_maze(seed, 3, 3);
        EnvConfig cfg;
        cfg.goal_epsilon = 60.0;
        Rng rng(seed);
        auto policy = [&rng](const Observation&, int s) {
            return std::make_pair(static_cast<Action>(rng.uniform_index(kActionCount)), s);
        };
        const EpisodeLog log = run_episode(m, annotate(m, {}, 0, 0), cfg, policy, 0, seed);
        EXPECT_EQ(extract_goal_hits(log).tau, goal_hits_from_poses(log).tau) << seed;
    }
}

TEST(Metrics, EvaluateEpisodeSumsRewards) {
    const ParsedMap pm = parse_map(kCorridor);
    const EpisodeLog log = forward_only(pm, 100);
    const EpisodeReport r = evaluate_episode(log, pm.maze, "c", 3);
    double total = 0.0;
    for (const auto& rec : log.records) total += rec.reward;
    EXPECT_DOUBLE_EQ(r.reward, total);
    EXPECT_EQ(r.goal_hits, 6); // t = 15, 30, ..., 90
    EXPECT_EQ(r.episode, 3);
    EXPECT_TRUE(r.latency.has_value());
}

TEST(Metrics, AggregateCountsAbsentValues) {
    std::vector<EpisodeReport> rs(3);
    rs[0].latency = 1.0;
    rs[1].latency = 3.0;
    rs[0].reward = 1.0;
    rs[1].reward = 2.0;
    rs[2].reward = 6.0;
    const MetricsSummary s = aggregate(rs);
    EXPECT_EQ(s.episodes, 3);
    EXPECT_DOUBLE_EQ(s.latency.mean, 2.0);
    EXPECT_DOUBLE_EQ(s.latency.std, 1.0);
    EXPECT_EQ(s.latency.count, 2);
    EXPECT_EQ(s.latency.absent, 1);
    EXPECT_DOUBLE_EQ(s.reward.mean, 3.0);
    EXPECT_EQ(s.dist_ineff_bfs.count, 0);
}

TEST(Metrics, CsvHasOneRowPerEpisode) {
    std::vector<EpisodeReport> rs(4);
    for (int i = 0; i < 4; ++i) {
        rs[static_cast<std::size_t>(i)].map_id = "m";
        rs[static_cast<std::size_t>(i)].episode = i;
    }
    rs[1].latency = 1.5;
    const std::string csv = reports_to_csv(rs);
    int rows = 0, comments = 0;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        const std::string line = csv.substr(pos, end - pos);
        if (line.rfind("m,", 0) == 0) ++rows;
        if (line.rfind("#", 0) == 0) ++comments;
        pos = end + 1;
    }
    EXPECT_EQ(rows, 4);
    EXPECT_GT(comments, 0);
    EXPECT_NE(csv.find("m,1,0,1.5,"), std::string::npos);
}

TEST(Baseline, DeterministicAndUninformative) {
    const Maze m = generate_maze(8, 3, 3);
    EnvConfig cfg;
    cfg.episode_len = 300;
    const std::vector<BaselineMap> maps{{"a", m, {}, 2}};
    const auto r1 = random_agent_baseline(maps, cfg, 4, 11);
    const auto r2 = random_agent_baseline(maps, cfg, 4, 11);
    ASSERT_EQ(r1.size(), 4u);
    for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_DOUBLE_EQ(r1[i].reward, r2[i].reward);
    const auto r3 = random_agent_baseline(maps, cfg, 4, 12);
    bool differ = false;
    for (std::size_t i = 0; i < r1.size(); ++i) differ = differ || r1[i].reward != r3[i].reward;
    EXPECT_TRUE(differ);
}

TEST(PathChoice, ClassifiesByFirstSentinel) {
    const PlanningMap pm = square_planning_map();
    EpisodeLog log;
    log.header.block_size = 100.0;
    auto rec = [](BlockCoord b, Event e) {
        TrajectoryRecord r;
        r.pose = {(b.x + 0.5) * 100.0, (b.y + 0.5) * 100.0, 0.0};
        r.event = e;
        return r;
    };
    log.records = {rec(pm.spawn, Event::None), rec(pm.short_sentinel, Event::None), rec(pm.long_sentinel, Event::None),
                   rec(pm.goal, Event::GoalHit), rec(pm.long_sentinel, Event::Respawn), rec(pm.goal, Event::GoalHit),
                   rec(pm.spawn, Event::Respawn), rec(pm.goal, Event::GoalHit), rec(pm.short_sentinel, Event::None)};
    const PathChoice c = classify_traversals(log, pm);
    EXPECT_EQ(c.shorter, 1);
    EXPECT_EQ(c.longer, 1);
    EXPECT_EQ(c.unresolved, 1);
    const ShorterPathFraction f = shorter_path_fraction({log, log}, pm);
    EXPECT_DOUBLE_EQ(f.fraction, 0.5);
    EXPECT_EQ(f.episodes_with_choices, 2);
    EXPECT_DOUBLE_EQ(f.episode_std, 0.0);
}
