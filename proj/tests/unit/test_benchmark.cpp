#include <gtest/gtest.h>

#include <set>

#include "agent.hpp"
#include "benchmark.hpp"
#include "config.hpp"
#include "error.hpp"
#include "metrics.hpp"

using namespace navbench;

namespace {

EnvConfig short_env(int len = 200) {
    EnvConfig e;
    e.episode_len = len;
    return e;
}

EvalConfig eval_cfg(int episodes, std::uint64_t seed) {
    EvalConfig c;
    c.episodes_per_map = episodes;
    c.eval_seed = seed;
    c.env = short_env();
    return c;
}

} // namespace

TEST(Stage, CanonicalMatrix) {
    const StageSpec s1 = StageSpec::canonical(1), s2 = StageSpec::canonical(2), s3 = StageSpec::canonical(3),
                    s4 = StageSpec::canonical(4), s5 = StageSpec::canonical(5);
    EXPECT_TRUE(s1.goal_static && s1.spawn_static && s1.map_static);
    EXPECT_TRUE(s2.goal_static && !s2.spawn_static && s2.map_static);
    EXPECT_TRUE(!s3.goal_static && s3.spawn_static && s3.map_static);
    EXPECT_TRUE(!s4.goal_static && !s4.spawn_static && s4.map_static);
    EXPECT_TRUE(!s5.goal_static && !s5.spawn_static && !s5.map_static);
    EXPECT_TRUE(s1.latency_trivial());
    EXPECT_FALSE(s3.latency_trivial());
    EXPECT_THROW(StageSpec::canonical(6), Error);
}

TEST(Pool, SizesSplitAndDeterminism) {
    const MapPool p = build_pool(7, 100, 10);
    EXPECT_EQ(p.entries.size(), 110u);
    EXPECT_EQ(p.ids(MapRole::Train).size(), 100u);
    EXPECT_EQ(p.ids(MapRole::Test).size(), 10u);
    EXPECT_EQ(p.static_ids().size(), 10u);
    std::set<std::uint64_t> seeds;
    for (const auto& e : p.entries) seeds.insert(e.seed);
    EXPECT_EQ(seeds.size(), 110u);
    for (const auto& id : p.static_ids()) EXPECT_EQ(p.find(id).role, MapRole::Train);
    EXPECT_EQ(build_pool(7, 100, 10), p);
    EXPECT_NE(build_pool(8, 100, 10).hash(), p.hash());
    EXPECT_EQ(build_pool(7, 3, 1).static_ids().size(), 3u);
    EXPECT_THROW(build_pool(7, 0, 1), Error);
}

TEST(Pool, ManifestRoundTrip) {
    const MapPool p = build_pool(3, 12, 4, 3, 3, 5);
    const std::string text = p.manifest();
    EXPECT_EQ(text.rfind("# pool_seed=3\n", 0), 0u);
    EXPECT_NE(text.find("\tstatic\n"), std::string::npos);
    EXPECT_NE(text.find("\ttest\n"), std::string::npos);
    const MapPool back = MapPool::parse_manifest(text);
    EXPECT_EQ(back, p);
    EXPECT_TRUE(back.maze("map0002").same_layout(generate_maze(p.find("map0002").seed, 3, 3)));
}

TEST(Pool, ManifestErrorsCiteLine) {
    try {
        MapPool::parse_manifest("# pool_seed=1\nmap0000\t5\t4\t4\ttrain\nmap0001\tx\t4\t4\ttrain\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Parse);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(MapPool::parse_manifest("map0000\t5\t4\t4\tvalidation\n"), Error);
}

TEST(Benchmark, EpisodeSeedsPairByMapAndIndex) {
    EXPECT_EQ(evaluation_episode_seed(1, "a", 0), evaluation_episode_seed(1, "a", 0));
    EXPECT_NE(evaluation_episode_seed(1, "a", 0), evaluation_episode_seed(1, "a", 1));
    EXPECT_NE(evaluation_episode_seed(1, "a", 0), evaluation_episode_seed(1, "b", 0));
    EXPECT_NE(evaluation_episode_seed(1, "a", 0), evaluation_episode_seed(2, "a", 0));
}

TEST(Benchmark, Stage3MovesTheGoal) {
    const MapPool pool = build_pool(1, 5, 1, 4, 4, 1);
    const StageReport r = run_stage(StageSpec::canonical(3), pool, eval_cfg(10, 4), random_controller());
    std::set<std::pair<int, int>> goals;
    for (const auto& l : r.logs) goals.insert({l.header.goal.x, l.header.goal.y});
    EXPECT_GE(goals.size(), 2u);
    // Stage 1 keeps it put.
    const StageReport s = run_stage(StageSpec::canonical(1), pool, eval_cfg(10, 4), random_controller());
    goals.clear();
    for (const auto& l : s.logs) goals.insert({l.header.goal.x, l.header.goal.y});
    EXPECT_EQ(goals.size(), 1u);
}

TEST(Benchmark, AccountingAndOrdering) {
    const MapPool pool = build_pool(2, 6, 2, 3, 3, 3);
    EvalConfig c = eval_cfg(4, 9);
    c.workers = 3;
    const StageReport r = run_stage(StageSpec::canonical(2), pool, c, random_controller());
    ASSERT_EQ(r.reports.size(), 12u);
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
        EXPECT_EQ(r.reports[i].map_id, r.map_ids[i / 4]);
        EXPECT_EQ(r.reports[i].episode, static_cast<int>(i % 4));
        EXPECT_EQ(r.logs[i].header.map_id, r.reports[i].map_id);
    }
    c.workers = 1;
    const StageReport serial = run_stage(StageSpec::canonical(2), pool, c, random_controller());
    for (std::size_t i = 0; i < r.logs.size(); ++i) EXPECT_EQ(serial.logs[i], r.logs[i]);
}

TEST(Benchmark, UnseenNeverLoadsTrainMaps) {
    const MapPool pool = build_pool(5, 8, 3, 3, 3, 4);
    EvalConfig c = eval_cfg(2, 1);
    c.variant = EvalVariant::Unseen;
    const StageReport r = run_stage(StageSpec::canonical(5), pool, c, random_controller());
    EXPECT_EQ(r.map_ids, pool.ids(MapRole::Test));
    EXPECT_EQ(count_train_maps(r.logs, pool), 0);
    c.variant = EvalVariant::Seen;
    const StageReport seen = run_stage(StageSpec::canonical(5), pool, c, random_controller());
    EXPECT_EQ(seen.map_ids, pool.static_ids());
    EXPECT_EQ(count_train_maps(seen.logs, pool), static_cast<int>(seen.logs.size()));
}

TEST(Benchmark, GeodesicAgentIsEfficientOnStage1) {
    const MapPool pool = build_pool(1, 4, 1, 4, 4, 2);
    EvalConfig c = eval_cfg(2, 3);
    c.env.episode_len = 1200;
    const StageReport r = run_stage(StageSpec::canonical(1), pool, c, geodesic_controller());
    ASSERT_GT(r.summary.dist_ineff_bfs.count, 0);
    EXPECT_NEAR(r.summary.dist_ineff_bfs.mean, 1.0, 0.1);
    EXPECT_NEAR(r.summary.latency.mean, 1.0, 0.1);
}

TEST(Ablation, ApplesOffAndPairedSeeds) {
    const MapPool pool = build_pool(6, 3, 1, 3, 3, 2);
    const auto cells = run_ablation_grid(StageSpec::canonical(4), pool, eval_cfg(3, 2), random_controller());
    ASSERT_EQ(cells.size(), 4u);
    for (const auto& cell : cells) {
        ASSERT_EQ(cell.report.logs.size(), cells[0].report.logs.size());
        for (std::size_t i = 0; i < cell.report.logs.size(); ++i) {
            const auto& h = cell.report.logs[i].header;
            const auto& h0 = cells[0].report.logs[i].header;
            EXPECT_EQ(h.episode_seed, h0.episode_seed);
            EXPECT_EQ(h.goal, h0.goal);
            EXPECT_EQ(h.start, h0.start);
        }
        if (!cell.flags.apples_present)
            for (const auto& l : cell.report.logs)
                for (const auto& rec : l.records) ASSERT_EQ(rec.terms.apple, 0.0);
    }
    const Maze m = pool.maze("map0000");
    const MapAnnotations plain = stage_annotations(m, StageSpec::canonical(1), {true, false}, 1);
    for (auto id : plain.textures.ids) EXPECT_TRUE(id == 0 || id == kNoTexture);
    const MapAnnotations tex = stage_annotations(m, StageSpec::canonical(1), {true, true}, 1);
    EXPECT_NE(tex.textures, plain.textures);
    EXPECT_TRUE(stage_annotations(m, StageSpec::canonical(1), {false, true}, 1).apples.empty());
}

TEST(Training, StageMapsAndFactoryWiring) {
    const MapPool pool = build_pool(4, 20, 2, 3, 3, 5);
    EXPECT_EQ(training_maps(pool, StageSpec::canonical(1)), std::vector<std::string>{pool.static_ids()[0]});
    EXPECT_EQ(training_maps(pool, StageSpec::canonical(5)).size(), 20u);
    EXPECT_EQ(training_maps(pool, StageSpec::canonical(5), 10).size(), 10u);

    const EpisodeFactory f1 =
        make_training_factory(pool, StageSpec::canonical(1), training_maps(pool, StageSpec::canonical(1)), {},
                              short_env(), 1);
    for (std::uint64_t i = 0; i < 10; ++i) EXPECT_EQ(f1(static_cast<int>(i % 3), i).map_id, pool.static_ids()[0]);

    const auto subset = training_maps(pool, StageSpec::canonical(5), 10);
    const EpisodeFactory f5 = make_training_factory(pool, StageSpec::canonical(5), subset, {}, short_env(), 1);
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < 400; ++i) seen.insert(f5(0, i).map_id);
    EXPECT_EQ(seen, std::set<std::string>(subset.begin(), subset.end()));

    EXPECT_THROW(make_training_factory(pool, StageSpec::canonical(1), subset, {}, short_env(), 1), Error);
    EXPECT_THROW(make_training_factory(pool, StageSpec::canonical(5), pool.ids(MapRole::Test), {}, short_env(), 1),
                 Error);
}

TEST(Training, CheckpointCadenceThroughStage) {
    AgentConfig a;
    a.width = a.height = 12;
    a.conv1_filters = 2;
    a.conv1_kernel = 4;
    a.conv1_stride = 2;
    a.conv2_filters = 2;
    a.conv2_kernel = 3;
    a.conv2_stride = 1;
    a.lstm1_size = 4;
    a.lstm2_size = 3;
    EnvConfig env = short_env(40);
    env.render.width = env.render.height = 12;
    TrainConfig t;
    t.workers = 1;
    t.max_steps = 100;
    t.checkpoint_every = 40;
    const MapPool pool = build_pool(1, 2, 1, 3, 3, 1);
    std::vector<std::uint64_t> at;
    TrainCallbacks cb;
    cb.on_checkpoint = [&](std::uint64_t step, const ParameterSet&) { at.push_back(step); };
    const TrainResult r = train_stage(a, t, StageSpec::canonical(3), pool, training_maps(pool, StageSpec::canonical(3)),
                                      {}, env, init_params(1, a), cb);
    EXPECT_EQ(r.global_step, 100u);
    EXPECT_EQ(at, (std::vector<std::uint64_t>{40, 80}));
}

TEST(Controllers, NetworkRejectsMismatch) {
    AgentConfig a;
    EnvConfig env;
    env.render.width = 30;
    EXPECT_THROW(network_controller(a, init_params(1, a), ActionMode::Sampled, env), Error);
    AgentConfig other = a;
    other.lstm1_size = 8;
    EXPECT_THROW(network_controller(a, init_params(1, other), ActionMode::Sampled, EnvConfig{}), Error);
}

TEST(Manifest, RoundTripAndErrors) {
    StageManifest m;
    m.stage = StageSpec::canonical(5);
    m.variant = EvalVariant::Unseen;
    m.pool_seed = 3;
    m.pool_hash = 0xfeed;
    m.checkpoint_hash = 0xbeef;
    m.eval_seed = 11;
    m.config_hash = 0xabc;
    m.episodes_per_map = 7;
    m.action_mode = ActionMode::Greedy;
    m.flags = {false, true};
    m.map_ids = {"map0100", "map0101"};
    m.code_version = "x";
    EXPECT_EQ(StageManifest::from_text(m.to_text()), m);
    EXPECT_THROW(StageManifest::from_text("stage=9\n"), Error);
    EXPECT_EQ(parse_variant(variant_name(EvalVariant::Seen)), EvalVariant::Seen);
    EXPECT_THROW(parse_variant("both"), Error);
}

TEST(Config, DefaultsValidateAndRoundTrip) {
    RunConfig c = RunConfig::defaults();
    c.finalize();
    EXPECT_EQ(c.train.workers, 4);
    EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-4);
    const RunConfig back = RunConfig::from_text(c.to_text());
    EXPECT_EQ(back.to_text(), c.to_text());
    EXPECT_EQ(back.hash(), c.hash());

    RunConfig paper = RunConfig::defaults(true);
    paper.finalize();
    EXPECT_EQ(paper.agent.width, 84);
    EXPECT_EQ(paper.agent.lstm1_size, 256);
    EXPECT_EQ(paper.train.workers, 16);
    EXPECT_NE(paper.model_hash(), c.model_hash());
}

TEST(Config, LayeringAndErrors) {
    RunConfig c = RunConfig::defaults();
    c.apply_text("# comment\n[train]\nlearning_rate = 0.001\n\n[eval]\nvariant = unseen\n");
    EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.001);
    EXPECT_EQ(c.eval.variant, EvalVariant::Unseen);
    c.apply_environment({"NAVBENCH_TRAIN_T_MAX=5", "PATH=/bin", "NAVBENCH_ENV_EPISODE_LEN=300"});
    EXPECT_EQ(c.train.t_max, 5);
    EXPECT_EQ(c.env.episode_len, 300);
    c.set_dotted("env.width=24");
    c.set_dotted("env.height=24");
    c.finalize();
    EXPECT_EQ(c.agent.width, 24);

    try {
        c.apply_text("[train]\nlr = 1\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(c.set_dotted("train.t_max=abc"), Error);
    EXPECT_THROW(c.set_dotted("nosection"), Error);
    RunConfig bad = RunConfig::defaults();
    bad.set_dotted("train.gamma=1.5");
    EXPECT_THROW(bad.finalize(), Error);
}

TEST(Config, ModelHashIgnoresEvalAndTrain) {
    RunConfig a = RunConfig::defaults(), b = RunConfig::defaults();
    b.set_dotted("train.learning_rate=0.5");
    b.set_dotted("eval.episodes_per_map=3");
    EXPECT_EQ(a.model_hash(), b.model_hash());
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(model_hash_of(b.to_text()), a.model_hash());
    b.set_dotted("agent.lstm2_size=16");
    EXPECT_NE(a.model_hash(), b.model_hash());
}
