#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "maze.hpp"
#include "oracles.hpp"
#include "raycast.hpp"
#include "rng.hpp"
#include "world.hpp"

using namespace navbench;

namespace {

// Straight corridor, spawn at the west end facing the goal.
const char* kCorridor =
    "#######\n"
    "#S.A.G#\n"
    "#######\n";

struct Corridor {
    ParsedMap parsed = parse_map(kCorridor);
    EnvConfig cfg;
    Environment make(std::uint64_t seed = 1) const { return Environment(parsed.maze, parsed.annotations(), cfg, seed); }
};

} // namespace

TEST(Raycast, CorridorDepthAlongHeading) {
    const Maze m = parse_map(kCorridor).maze;
    const RayHit hit = cast_ray(m, 100.0, 150.0, 150.0, 1.0, 0.0);
    EXPECT_NEAR(hit.perp, 450.0, 1e-9);
    EXPECT_EQ(hit.block, (BlockCoord{6, 1}));
    EXPECT_TRUE(hit.x_side);
    const RayHit up = cast_ray(m, 100.0, 150.0, 150.0, 0.0, -1.0);
    EXPECT_NEAR(up.perp, 50.0, 1e-9);
    EXPECT_FALSE(up.x_side);
    // Direction length scales the reported distance.
    EXPECT_NEAR(cast_ray(m, 100.0, 150.0, 150.0, 2.0, 0.0).perp, 225.0, 1e-9);
}

TEST(Raycast, GoalEntryRecorded) {
    const Maze m = parse_map(kCorridor).maze;
    const RayHit hit = cast_ray(m, 100.0, 150.0, 150.0, 1.0, 0.0, BlockCoord{5, 1});
    EXPECT_NEAR(hit.goal_entry, 350.0, 1e-9);
    EXPECT_LT(cast_ray(m, 100.0, 150.0, 150.0, -1.0, 0.0, BlockCoord{5, 1}).goal_entry, 0.0);
}

TEST(Raycast, ColumnRaysAreSymmetric) {
    const Pose p{0.0, 0.0, 0.3};
    const int w = 8;
    for (int c = 0; c < w / 2; ++c) {
        const auto a = column_ray(p, c, w, std::numbers::pi / 2);
        const auto b = column_ray(p, w - 1 - c, w, std::numbers::pi / 2);
        // Mirror images about the heading: equal projection on the heading.
        const double ha = a[0] * std::cos(0.3) + a[1] * std::sin(0.3);
        const double hb = b[0] * std::cos(0.3) + b[1] * std::sin(0.3);
        EXPECT_NEAR(ha, 1.0, 1e-12);
        EXPECT_NEAR(hb, 1.0, 1e-12);
    }
}

TEST(Raycast, DepthMatchesMarchOnRandomPoses) {
    const Maze m = generate_maze(5, 4, 4);
    Rng rng(9);
    const auto floors = m.floor_blocks();
    for (int i = 0; i < 100; ++i) {
        const BlockCoord b = floors[rng.uniform_index(floors.size())];
        const Pose p{(b.x + rng.uniform(0.2, 0.8)) * 100.0, (b.y + rng.uniform(0.2, 0.8)) * 100.0,
                     rng.uniform(0.0, kTwoPi)};
        for (int col : {0, 7, 20, 41}) {
            const auto r = column_ray(p, col, 42, std::numbers::pi / 2);
            const double fast = cast_ray(m, 100.0, p.x, p.y, r[0], r[1]).perp;
            const double slow = oracle::march_depth(m, 100.0, p.x, p.y, r[0], r[1]);
            ASSERT_NEAR(fast, slow, 1e-3) << "pose " << i << " column " << col;
        }
    }
}

TEST(Raycast, SliceHeightShrinksWithDistance) {
    EXPECT_EQ(slice_height(42, 100.0, 0.0), 42);
    int prev = slice_height(42, 100.0, 10.0);
    for (double d = 20.0; d < 2000.0; d *= 1.5) {
        const int h = slice_height(42, 100.0, d);
        EXPECT_LE(h, prev);
        prev = h;
    }
}

TEST(Raycast, RenderInRange) {
    const Maze m = generate_maze(2, 3, 3);
    const MapAnnotations ann = annotate(m, {}, 3, 0);
    const RenderConfig rc;
    const auto c = block_center(*ann.spawn, 100.0);
    const Image img = render(m, assign_textures(m, 4), {c[0], c[1], 1.0}, rc, {ann.goal, ann.apples});
    ASSERT_EQ(img.width, 42);
    ASSERT_EQ(img.height, 42);
    ASSERT_EQ(img.data.size(), 3u * 42 * 42);
    for (double v : img.data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(Raycast, PpmHeader) {
    Image img(2, 1);
    img.at(0, 0, 0) = 1.0;
    img.at(2, 0, 1) = 0.5;
    const std::string ppm = encode_ppm(img, "hello");
    EXPECT_EQ(ppm.rfind("P6\n# hello\n2 1\n255\n", 0), 0u);
    const std::string px = ppm.substr(ppm.size() - 6);
    EXPECT_EQ(static_cast<unsigned char>(px[0]), 255);
    EXPECT_EQ(static_cast<unsigned char>(px[1]), 0);
    EXPECT_EQ(static_cast<unsigned char>(px[5]), 128);
}

TEST(DepthBuckets, GeometricEdges) {
    const DepthBuckets b(16.0, 1024.0, 6);
    ASSERT_EQ(b.count(), 6);
    const auto& e = b.edges();
    EXPECT_NEAR(e.front(), 16.0, 1e-9);
    EXPECT_NEAR(e.back(), 1024.0, 1e-9);
    for (std::size_t i = 1; i + 1 < e.size(); ++i) EXPECT_NEAR(e[i] / e[i - 1], e[i + 1] / e[i], 1e-9);
    EXPECT_EQ(b.bucket(1.0), 0);
    EXPECT_EQ(b.bucket(1e6), 5);
    EXPECT_EQ(b.bucket(33.0), 1);
}

TEST(DepthBuckets, GroupsAverageColumns) {
    const DepthBuckets b(1.0, 1000.0, 3); // edges 1, 10, 100, 1000
    DepthVector d;
    d.depths = {5.0, 5.0, 50.0, 50.0, 500.0, 700.0};
    const auto g = grouped_depth_classes(d, 3, b);
    EXPECT_EQ(g, (std::vector<int>{0, 1, 2}));
    EXPECT_THROW(grouped_depth_classes(d, 7, b), Error);
}

TEST(LoopClosure, TrackerMatchesQuadraticOracle) {
    const LoopClosureParams params;
    Rng rng(3);
    std::vector<std::array<double, 2>> pts;
    double x = 0.0, y = 0.0, h = 0.0;
    for (int t = 0; t < 600; ++t) {
        h += rng.uniform(-0.6, 0.6);
        x += 25.0 * std::cos(h);
        y += 25.0 * std::sin(h);
        x = std::clamp(x, -200.0, 200.0);
        y = std::clamp(y, -200.0, 200.0);
        pts.push_back({x, y});
    }
    const std::vector<int> ref = oracle::loop_labels_quadratic(pts, params);
    LoopClosureTracker tracker(params);
    int positives = 0;
    for (std::size_t t = 0; t < pts.size(); ++t) {
        const int label = tracker.push(pts[t]);
        ASSERT_EQ(label, ref[t]) << "t = " << t;
        ASSERT_EQ(label, loop_closure_truth(std::span(pts).first(t), pts[t], params));
        positives += label;
    }
    EXPECT_GT(positives, 0);
    EXPECT_LT(positives, 600);
}

TEST(LoopClosure, RecentPointsDoNotCount) {
    const LoopClosureParams params{30, 50.0};
    std::vector<std::array<double, 2>> pts(29, {0.0, 0.0});
    EXPECT_EQ(loop_closure_truth(pts, {0.0, 0.0}, params), 0);
    pts.push_back({0.0, 0.0});
    EXPECT_EQ(loop_closure_truth(pts, {0.0, 0.0}, params), 1);
    EXPECT_EQ(loop_closure_truth(pts, {60.0, 0.0}, params), 0);
}

TEST(World, ForwardAndTurnKinematics) {
    Corridor c;
    Environment env = c.make();
    EXPECT_DOUBLE_EQ(env.pose().x, 150.0);
    EXPECT_DOUBLE_EQ(env.pose().heading, 0.0);
    env.step(Action::Forward);
    EXPECT_NEAR(env.pose().x, 175.0, 1e-12);
    env.step(Action::RotateLeft);
    EXPECT_NEAR(env.pose().heading, std::numbers::pi / 12, 1e-12);
    env.step(Action::RotateRight);
    env.step(Action::RotateRight);
    EXPECT_NEAR(env.pose().heading, kTwoPi - std::numbers::pi / 12, 1e-12);
    EXPECT_EQ(env.t(), 4);
}

TEST(World, WallClampsAndPenalises) {
    Corridor c;
    Environment env = c.make();
    StepResult r{};
    for (int i = 0; i < 4; ++i) r = env.step(Action::Backward);
    EXPECT_NEAR(env.pose().x, 116.0, 1e-9); // wall face at 100 plus the radius
    EXPECT_EQ(r.event, Event::WallContact);
    EXPECT_NEAR(r.terms.wall, -0.1, 1e-9); // -0.2 * (1 - 16 / 32)
    // Centred in the corridor: no penalty.
    Environment env2 = c.make();
    EXPECT_DOUBLE_EQ(env2.step(Action::Forward).terms.wall, 0.0);
}

TEST(World, AgentNeverEntersWalls) {
    const Maze m = generate_maze(11, 4, 4);
    EnvConfig cfg;
    cfg.spawn_mode = PlacementMode::Random;
    cfg.goal_mode = PlacementMode::Random;
    Environment env(m, annotate(m, {false, false}, 3, 5), cfg, 5);
    Rng rng(2);
    while (!env.done()) {
        env.step(static_cast<Action>(rng.uniform_index(kActionCount)));
        ASSERT_TRUE(m.is_floor(block_of(env.pose().x, env.pose().y, 100.0)));
        ASSERT_GE(env.wall_distance(), cfg.agent_radius - 1e-9);
    }
}

TEST(World, GoalHitRespawnsAndApplesCountOnce) {
    Corridor c;
    Environment env = c.make();
    std::vector<StepResult> rs;
    for (int i = 0; i < 16; ++i) rs.push_back(env.step(Action::Forward));
    // x_t = 150 + 25 t; within 50 of the goal centre (550) first at t = 15.
    for (int i = 0; i < 14; ++i) EXPECT_DOUBLE_EQ(rs[i].terms.goal, 0.0) << i;
    EXPECT_EQ(rs[14].event, Event::GoalHit);
    EXPECT_DOUBLE_EQ(rs[14].terms.goal, 10.0);
    EXPECT_NEAR(rs[14].pose.x, 525.0, 1e-9);
    EXPECT_EQ(rs[15].event, Event::Respawn);
    EXPECT_NEAR(rs[15].pose.x, 175.0, 1e-9);
    int apples = 0;
    for (const auto& r : rs) apples += r.terms.apple > 0.0 ? 1 : 0;
    EXPECT_EQ(apples, 1);
    EXPECT_EQ(env.apples_collected(), 1);
    // The apple block (3, 1) is passed again after the respawn but stays eaten.
    for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(env.step(Action::Forward).terms.apple, 0.0);
}

TEST(World, EpisodeLengthAndContract) {
    Corridor c;
    c.cfg.episode_len = 5;
    Environment env = c.make();
    for (int i = 0; i < 5; ++i) EXPECT_EQ(env.step(Action::RotateLeft).done, i == 4);
    EXPECT_TRUE(env.done());
    try {
        env.step(Action::Forward);
        FAIL() << "expected a contract error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Contract);
    }
}

TEST(World, ObservationCarriesPreviousActionAndReward) {
    Corridor c;
    Environment env = c.make();
    Observation o = env.observe();
    for (double v : o.prev_action) EXPECT_EQ(v, 0.0);
    env.step(Action::RotateRight);
    o = env.observe();
    EXPECT_EQ(o.prev_action[static_cast<std::size_t>(Action::RotateRight)], 1.0);
    EXPECT_EQ(o.prev_action[0], 0.0);
    EXPECT_EQ(o.image.width, c.cfg.render.width);
}

TEST(World, RandomSpawnDeterministicPerSeed) {
    const Maze m = generate_maze(4, 3, 3);
    EnvConfig cfg;
    cfg.spawn_mode = PlacementMode::Random;
    const MapAnnotations ann = annotate(m, {true, false}, 0, 0);
    Environment a(m, ann, cfg, 77), b(m, ann, cfg, 77), d(m, ann, cfg, 78);
    EXPECT_EQ(a.pose(), b.pose());
    int differs = 0;
    for (std::uint64_t s = 0; s < 10; ++s) differs += Environment(m, ann, cfg, s).pose() == a.pose() ? 0 : 1;
    EXPECT_GT(differs, 5);
    (void)d;
}

TEST(World, RejectsBadPlacement) {
    Corridor c;
    MapAnnotations ann = c.parsed.annotations();
    ann.goal = {0, 0};
    EXPECT_THROW(Environment(c.parsed.maze, ann, c.cfg, 1), Error);
    ann = c.parsed.annotations();
    ann.spawn = ann.goal;
    EXPECT_THROW(Environment(c.parsed.maze, ann, c.cfg, 1), Error);
}

TEST(EpisodeLog, RoundTripAndRunEpisode) {
    const Maze m = generate_maze(3, 3, 3);
    EnvConfig cfg;
    cfg.episode_len = 50;
    const MapAnnotations ann = annotate(m, {}, 2, 0);
    Rng rng(1);
    auto policy = [&rng](const Observation&, int s) {
        return std::make_pair(static_cast<Action>(rng.uniform_index(kActionCount)), s + 1);
    };
    const EpisodeLog log = run_episode(m, ann, cfg, policy, 0, 9, "m", 0xabc);
    ASSERT_EQ(log.records.size(), 50u);
    for (std::size_t i = 0; i < log.records.size(); ++i) EXPECT_EQ(log.records[i].t, static_cast<int>(i) + 1);
    EXPECT_EQ(log.header.map_id, "m");
    EXPECT_EQ(log.header.config_hash, 0xabcu);
    const std::string text = encode_episode_log(log);
    const EpisodeLog back = decode_episode_log(text);
    EXPECT_EQ(encode_episode_log(back), text);
    EXPECT_EQ(back.records.size(), log.records.size());
    EXPECT_THROW(decode_episode_log("{not json"), Error);
}

TEST(EpisodeLog, EventNamesRoundTrip) {
    for (Event e : {Event::None, Event::AppleHit, Event::GoalHit, Event::Respawn, Event::WallContact})
        EXPECT_EQ(parse_event(event_name(e)), e);
    EXPECT_THROW(parse_event("teleport"), Error);
}
