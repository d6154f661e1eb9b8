#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "navbench/navbench.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("navbench_capi_" + name);
    fs::remove_all(p);
    return p;
}

// Small network and frames so a training run takes well under a second.
nb_config* tiny_config() {
    nb_config* c = nullptr;
    EXPECT_EQ(nb_config_new(0, &c), NB_OK);
    for (const char* s : {"env.width=12", "env.height=12", "env.episode_len=60", "agent.conv1_filters=2",
                          "agent.conv1_kernel=4", "agent.conv1_stride=2", "agent.conv2_filters=2",
                          "agent.conv2_kernel=3", "agent.conv2_stride=1", "agent.lstm1_size=4",
                          "agent.lstm2_size=3", "train.workers=1", "train.max_steps=200", "pool.train=4",
                          "pool.test=2", "pool.cols=3", "pool.rows=3", "pool.static=2",
                          "eval.episodes_per_map=2"})
        EXPECT_EQ(nb_config_set(c, s), NB_OK) << s;
    EXPECT_EQ(nb_config_finalize(c), NB_OK) << nb_last_error();
    return c;
}

} // namespace

TEST(CApi, ConfigErrorsAndText) {
    nb_config* c = nullptr;
    ASSERT_EQ(nb_config_new(0, &c), NB_OK);
    EXPECT_EQ(nb_config_set(c, "train.nonsense=1"), NB_ERR_INVALID_ARGUMENT);
    EXPECT_NE(std::string(nb_last_error()).find("nonsense"), std::string::npos);
    nb_pool* p = nullptr;
    EXPECT_EQ(nb_pool_build(c, 1, &p), NB_ERR_CONTRACT); // not finalized
    ASSERT_EQ(nb_config_finalize(c), NB_OK);
    EXPECT_STREQ(nb_last_error(), "");
    nb_buffer* text = nullptr;
    ASSERT_EQ(nb_config_text(c, &text), NB_OK);
    EXPECT_NE(std::string(nb_buffer_data(text)).find("[train]"), std::string::npos);
    EXPECT_EQ(nb_buffer_size(text), std::string(nb_buffer_data(text)).size());
    nb_buffer_free(text);
    const uint64_t h = nb_config_hash(c);
    ASSERT_EQ(nb_config_set(c, "train.gamma=0.9"), NB_OK);
    EXPECT_NE(nb_config_hash(c), h);
    ASSERT_EQ(nb_config_set(c, "train.gamma=2"), NB_OK);
    EXPECT_EQ(nb_config_finalize(c), NB_ERR_INVALID_ARGUMENT);
    nb_config_free(c);
    EXPECT_EQ(nb_config_new(0, nullptr), NB_ERR_INVALID_ARGUMENT);
    EXPECT_STREQ(nb_status_name(NB_ERR_MISMATCH), "mismatch");
}

TEST(CApi, ConfigFileAndEnvironment) {
    const fs::path dir = scratch("cfgfile");
    fs::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "[train]\nt_max = 7\n";
    nb_config* c = nullptr;
    ASSERT_EQ(nb_config_new(0, &c), NB_OK);
    ASSERT_EQ(nb_config_load_file(c, (dir / "run.cfg").c_str()), NB_OK);
    ::setenv("NAVBENCH_TRAIN_T_MAX", "9", 1);
    ASSERT_EQ(nb_config_apply_environment(c), NB_OK);
    ::unsetenv("NAVBENCH_TRAIN_T_MAX");
    ASSERT_EQ(nb_config_finalize(c), NB_OK);
    nb_buffer* text = nullptr;
    ASSERT_EQ(nb_config_text(c, &text), NB_OK);
    EXPECT_NE(std::string(nb_buffer_data(text)).find("t_max = 9"), std::string::npos);
    nb_buffer_free(text);
    EXPECT_EQ(nb_config_load_file(c, (dir / "missing.cfg").c_str()), NB_ERR_IO);
    nb_config_free(c);
}

TEST(CApi, PoolSaveLoad) {
    nb_config* c = tiny_config();
    nb_pool* p = nullptr;
    ASSERT_EQ(nb_pool_build(c, 7, &p), NB_OK);
    EXPECT_EQ(nb_pool_size(p), 6u);
    const fs::path dir = scratch("pool");
    ASSERT_EQ(nb_pool_save(p, dir.c_str()), NB_OK);
    std::size_t maps = 0;
    for (const auto& e : fs::directory_iterator(dir)) maps += e.path().extension() == ".map" ? 1 : 0;
    EXPECT_EQ(maps, 6u);
    nb_pool* q = nullptr;
    ASSERT_EQ(nb_pool_load((dir / "manifest.tsv").c_str(), &q), NB_OK);
    EXPECT_EQ(nb_pool_hash(q), nb_pool_hash(p));
    nb_pool_free(q);
    EXPECT_EQ(nb_pool_load((dir / "absent.tsv").c_str(), &q), NB_ERR_IO);
    nb_pool_free(p);
    nb_config_free(c);
}

TEST(CApi, TrainEvalReplay) {
    nb_config* c = tiny_config();
    nb_pool* p = nullptr;
    ASSERT_EQ(nb_pool_build(c, 3, &p), NB_OK);
    const fs::path run = scratch("run");
    nb_train_summary ts{};
    ASSERT_EQ(nb_train(c, p, 5, nullptr, run.c_str(), nullptr, nullptr, &ts), NB_OK) << nb_last_error();
    EXPECT_EQ(ts.global_step, 200u);
    ASSERT_TRUE(fs::exists(run / "final.bin"));
    EXPECT_EQ(slurp(run / "train.csv").rfind("# code_version=", 0), 0u);

    // A second run from the same seed writes the same checkpoint.
    const fs::path run2 = scratch("run2");
    ASSERT_EQ(nb_train(c, p, 5, nullptr, run2.c_str(), nullptr, nullptr, nullptr), NB_OK);
    EXPECT_EQ(slurp(run / "final.bin"), slurp(run2 / "final.bin"));

    const fs::path ev = scratch("eval");
    nb_eval_summary es{};
    const std::string ckpt = (run / "final.bin").string();
    ASSERT_EQ(nb_eval(c, p, ckpt.c_str(), 11, nullptr, ev.c_str(), &es), NB_OK) << nb_last_error();
    EXPECT_EQ(es.episodes, 4); // 2 static maps x 2 episodes
    EXPECT_TRUE(fs::exists(ev / "summary.json"));
    EXPECT_TRUE(fs::exists(ev / "logs"));

    const fs::path ev2 = scratch("eval2");
    ASSERT_EQ(nb_eval_replay(c, (ev / "manifest.txt").c_str(), p, ckpt.c_str(), ev2.c_str(), nullptr), NB_OK)
        << nb_last_error();
    EXPECT_EQ(slurp(ev / "report.csv"), slurp(ev2 / "report.csv"));
    EXPECT_EQ(slurp(ev / "manifest.txt"), slurp(ev2 / "manifest.txt"));

    // Wrong checkpoint for the manifest.
    EXPECT_EQ(nb_eval_replay(c, (ev / "manifest.txt").c_str(), p, (run / "ckpt_missing.bin").c_str(), ev2.c_str(),
                             nullptr),
              NB_ERR_IO);

    // Network shape differs from the checkpoint.
    nb_config* other = tiny_config();
    ASSERT_EQ(nb_config_set(other, "agent.lstm1_size=5"), NB_OK);
    ASSERT_EQ(nb_config_finalize(other), NB_OK);
    const fs::path bad = scratch("bad");
    EXPECT_EQ(nb_eval(other, p, ckpt.c_str(), 11, nullptr, bad.c_str(), nullptr), NB_ERR_MISMATCH);
    EXPECT_FALSE(fs::exists(bad / "report.csv"));
    nb_config_free(other);

    // Analysis on one of the logs.
    fs::path log;
    for (const auto& e : fs::directory_iterator(ev / "logs")) log = e.path();
    nb_saliency_summary ss{};
    const fs::path an = scratch("an");
    ASSERT_EQ(nb_analyze_episode(c, p, ckpt.c_str(), log.c_str(), 20, an.c_str(), &ss), NB_OK)
        << nb_last_error();
    EXPECT_EQ(ss.frames, 60);
    EXPECT_GE(ss.mask_min, 0.0);
    EXPECT_TRUE(fs::exists(an / "topdown.ppm"));
    EXPECT_TRUE(fs::exists(an / "saliency.csv"));

    const fs::path svg = scratch("plot.svg");
    ASSERT_EQ(nb_plot("reward", (run / "train.csv").c_str(), nullptr, svg.c_str()), NB_OK) << nb_last_error();
    EXPECT_EQ(nb_plot("pie", (run / "train.csv").c_str(), nullptr, svg.c_str()), NB_ERR_INVALID_ARGUMENT);

    nb_pool_free(p);
    nb_config_free(c);
}

TEST(CApi, BaselineAndAblation) {
    nb_config* c = tiny_config();
    ASSERT_EQ(nb_config_set(c, "stage.id=4"), NB_OK);
    ASSERT_EQ(nb_config_finalize(c), NB_OK);
    nb_pool* p = nullptr;
    ASSERT_EQ(nb_pool_build(c, 3, &p), NB_OK);
    nb_eval_summary es{};
    ASSERT_EQ(nb_baseline(c, p, 1, nullptr, scratch("base").c_str(), &es), NB_OK) << nb_last_error();
    EXPECT_EQ(es.episodes, 4);
    ASSERT_EQ(nb_baseline(c, p, 1, "map0001", scratch("base1").c_str(), &es), NB_OK) << nb_last_error();
    EXPECT_EQ(es.episodes, 2);
    EXPECT_EQ(nb_baseline(c, p, 1, "nope", scratch("base2").c_str(), &es), NB_ERR_INVALID_ARGUMENT);
    const fs::path run = scratch("abl_run");
    ASSERT_EQ(nb_train(c, p, 1, nullptr, run.c_str(), nullptr, nullptr, nullptr), NB_OK);
    const fs::path ab = scratch("abl");
    ASSERT_EQ(nb_ablate(c, p, (run / "final.bin").c_str(), 2, ab.c_str()), NB_OK) << nb_last_error();
    const std::string csv = slurp(ab / "ablation.csv");
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n' ? 1 : 0;
    EXPECT_EQ(rows, 6u); // provenance, header, four cells
    EXPECT_TRUE(fs::exists(ab / "apples0_textures0" / "report.csv"));
    nb_pool_free(p);
    nb_config_free(c);
}
