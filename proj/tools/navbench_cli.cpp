// navbench command-line front end. Talks to the library only through the C API.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navbench/navbench.h"

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

int exit_code(nb_status s) {
    switch (s) {
    case NB_OK: return kOk;
    case NB_ERR_INVALID_ARGUMENT:
    case NB_ERR_PARSE:
    case NB_ERR_MISMATCH:
    case NB_ERR_CONTRACT: return kValidation;
    default: return kRuntime;
    }
}

struct Failure {
    int code;
};

void check(nb_status s, const char* what) {
    if (s == NB_OK) return;
    std::fprintf(stderr, "navbench: %s failed (%s): %s\n", what, nb_status_name(s), nb_last_error());
    throw Failure{exit_code(s)};
}

struct ConfigHandle {
    nb_config* p = nullptr;
    ~ConfigHandle() { nb_config_free(p); }
};
struct PoolHandle {
    nb_pool* p = nullptr;
    ~PoolHandle() { nb_pool_free(p); }
};

struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    bool paper_scale = false;
};

/// defaults <- config file <- NAVBENCH_* environment <- --set <- subcommand flags
void build_config(ConfigHandle& cfg, const Common& common, const std::vector<std::string>& flag_sets) {
    check(nb_config_new(common.paper_scale ? 1 : 0, &cfg.p), "config");
    if (!common.config_file.empty()) check(nb_config_load_file(cfg.p, common.config_file.c_str()), "config file");
    check(nb_config_apply_environment(cfg.p), "environment overrides");
    for (const auto& s : common.sets) check(nb_config_set(cfg.p, s.c_str()), "--set");
    for (const auto& s : flag_sets) check(nb_config_set(cfg.p, s.c_str()), "flag");
    check(nb_config_finalize(cfg.p), "config validation");
}

void load_pool(PoolHandle& pool, const std::string& path) { check(nb_pool_load(path.c_str(), &pool.p), "loading pool"); }

void print_eval(const char* label, const nb_eval_summary& s) {
    std::printf("%s: episodes %d  reward %.3f +- %.3f  goal hits %.2f  latency %.3f (n=%d)  dist-ineff %.3f (n=%d)\n",
                label, s.episodes, s.reward_mean, s.reward_std, s.goal_hits_mean, s.latency_mean, s.latency_count,
                s.dist_ineff_mean, s.dist_ineff_count);
}

struct ProgressPrinter {
    int every = 20;
    int episodes = 0;
    double reward = 0.0;
    int hits = 0;
};

void on_progress(const nb_train_progress* p, void* user) {
    auto* pp = static_cast<ProgressPrinter*>(user);
    if (!p->has_episode) return;
    ++pp->episodes;
    pp->reward += p->episode_reward;
    pp->hits += p->goal_hits;
    if (pp->episodes % pp->every == 0) {
        std::fprintf(stderr, "step %" PRIu64 "  %.0fs  mean reward %.2f  mean goal hits %.2f\n", p->global_step,
                     p->wall_time_s, pp->reward / pp->every, static_cast<double>(pp->hits) / pp->every);
        pp->reward = 0.0;
        pp->hits = 0;
    }
}

std::string keys_footer() {
    nb_buffer* b = nullptr;
    if (nb_config_keys(&b) != NB_OK) return {};
    std::string keys = nb_buffer_data(b);
    nb_buffer_free(b);
    std::string out = "Config keys (config file [section] key = value, --set section.key=value, or environment "
                      "NAVBENCH_SECTION_KEY):\n";
    std::size_t start = 0;
    while (start < keys.size()) {
        const std::size_t end = keys.find('\n', start);
        out += "  " + keys.substr(start, end - start) + "\n";
        start = end == std::string::npos ? keys.size() : end + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"navbench: maze navigation benchmark"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(keys_footer());
    app.set_version_flag("--version", std::string(nb_version()));

    Common common;
    app.add_option("--config", common.config_file, "Config file ([section] key = value)")->envname("NAVBENCH_CONFIG");
    app.add_option("--set", common.sets, "Override a config key: section.key=value (repeatable)");
    app.add_flag("--paper-scale", common.paper_scale, "Start from the paper-scale preset (84x84 frames, 256/64 cores)");

    // gen-maps
    auto* gen = app.add_subcommand("gen-maps", "Generate a map pool: manifest.tsv plus one .map file per map");
    std::uint64_t gen_seed = 0;
    int gen_train = -1, gen_test = -1, gen_cols = -1, gen_rows = -1, gen_static = -1;
    std::string gen_out = "maps";
    gen->add_option("--seed", gen_seed, "Pool seed")->required();
    gen->add_option("--train", gen_train, "Number of training maps (pool.train)");
    gen->add_option("--test", gen_test, "Number of held-out test maps (pool.test)");
    gen->add_option("--cols", gen_cols, "Maze width in cells (pool.cols)");
    gen->add_option("--rows", gen_rows, "Maze height in cells (pool.rows)");
    gen->add_option("--static", gen_static, "Size of the static evaluation subset (pool.static)");
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

    // shared by pool-consuming subcommands
    std::string pool_path = "maps/manifest.tsv";
    auto add_pool = [&](CLI::App* sub) {
        sub->add_option("--pool", pool_path, "Pool manifest written by gen-maps")
            ->envname("NAVBENCH_POOL")
            ->capture_default_str();
    };
    int stage = 0;
    auto add_stage = [&](CLI::App* sub, bool required) {
        auto* o = sub->add_option("--stage", stage, "Stage 1-5 (stage.id)")->check(CLI::Range(1, 5));
        if (required) o->required();
    };

    // train
    auto* train = app.add_subcommand("train", "Train an agent on one stage");
    add_pool(train);
    add_stage(train, true);
    std::uint64_t train_seed = 0, train_steps = 0;
    int train_workers = 0;
    std::string train_init, train_out = "run";
    int train_every = 20;
    train->add_option("--seed", train_seed, "Training seed")->required();
    train->add_option("--steps", train_steps, "Environment steps (train.max_steps)");
    train->add_option("--workers", train_workers, "Worker threads (train.workers)");
    train->add_option("--init", train_init, "Start from this checkpoint");
    train->add_option("--out", train_out, "Output directory")->capture_default_str();
    train->add_option("--report-every", train_every, "Print a progress line every N episodes")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one stage");
    add_pool(eval);
    add_stage(eval, false);
    std::string eval_ckpt, eval_out = "eval", eval_variant, eval_maps, eval_replay;
    std::uint64_t eval_seed = 0;
    int eval_episodes = 0, eval_workers = 0;
    bool eval_greedy = false;
    auto* eval_seed_opt = eval->add_option("--seed", eval_seed, "Evaluation seed (required unless --replay)");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required();
    eval->add_option("--episodes", eval_episodes, "Episodes per map (eval.episodes_per_map)");
    eval->add_option("--variant", eval_variant, "seen (static subset) or unseen (test maps) (eval.variant)");
    eval->add_option("--maps", eval_maps, "Comma-separated map ids overriding the variant's maps");
    eval->add_option("--workers", eval_workers, "Evaluation threads (eval.workers)");
    eval->add_flag("--greedy", eval_greedy, "Argmax actions instead of sampling (eval.action_mode=greedy)");
    eval->add_option("--replay", eval_replay, "Re-run the evaluation recorded in this manifest.txt");
    eval->add_option("--out", eval_out, "Output directory")->capture_default_str();

    // baseline
    auto* base = app.add_subcommand("baseline", "Uniform-random agent on one stage");
    add_pool(base);
    add_stage(base, true);
    std::uint64_t base_seed = 0;
    int base_episodes = 0;
    std::string base_out = "baseline", base_maps;
    base->add_option("--seed", base_seed, "Evaluation seed")->required();
    base->add_option("--maps", base_maps, "Comma-separated map ids overriding the variant's maps");
    base->add_option("--episodes", base_episodes, "Episodes per map (eval.episodes_per_map)");
    base->add_option("--out", base_out, "Output directory")->capture_default_str();

    // ablate
    auto* abl = app.add_subcommand("ablate", "Evaluate a checkpoint on the apples x textures grid");
    add_pool(abl);
    add_stage(abl, true);
    std::uint64_t abl_seed = 0;
    int abl_episodes = 0;
    std::string abl_ckpt, abl_out = "ablate";
    abl->add_option("--seed", abl_seed, "Evaluation seed")->required();
    abl->add_option("--checkpoint", abl_ckpt, "Checkpoint to evaluate")->required();
    abl->add_option("--episodes", abl_episodes, "Episodes per map (eval.episodes_per_map)");
    abl->add_option("--out", abl_out, "Output directory")->capture_default_str();

    // bench
    auto* bench = app.add_subcommand("bench", "Train (or load) and evaluate all five stages");
    add_pool(bench);
    std::uint64_t bench_seed = 0, bench_steps = 0;
    std::string bench_ckpts, bench_out = "bench";
    bench->add_option("--seed", bench_seed, "Seed for training and evaluation")->required();
    bench->add_option("--steps", bench_steps, "Training steps per stage (train.max_steps)");
    bench->add_option("--checkpoints", bench_ckpts, "Directory with stage<k>.bin checkpoints to reuse");
    bench->add_option("--out", bench_out, "Output directory")->capture_default_str();

    // analyze
    auto* an = app.add_subcommand("analyze", "Saliency and top-down frames for an episode log, or plots from CSVs");
    add_pool(an);
    add_stage(an, false);
    std::string an_log, an_ckpt, an_out = "analysis", an_plot, an_inputs, an_metric = "dist_ineff_bfs";
    int an_stride = 50;
    an->add_option("--log", an_log, "Episode log (.jsonl) from eval");
    an->add_option("--checkpoint", an_ckpt, "Checkpoint that produced the log");
    an->add_option("--stride", an_stride, "Write frames every N steps")->capture_default_str();
    an->add_option("--plot", an_plot, "Plot kind: reward (training CSVs) or metric (report CSVs)");
    an->add_option("--inputs", an_inputs, "Comma-separated CSV paths for --plot");
    an->add_option("--metric", an_metric, "Report column for --plot metric")->capture_default_str();
    an->add_option("--out", an_out, "Output directory, or .svg path for --plot")->capture_default_str();

    // selftest
    auto* st = app.add_subcommand("selftest", "Run the gradient-check and oracle property suites");
    bool st_quick = false;
    st->add_flag("--quick", st_quick, "Smaller sample counts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        std::vector<std::string> sets;
        if (stage > 0) sets.push_back("stage.id=" + std::to_string(stage));

        if (*gen) {
            if (gen_train >= 0) sets.push_back("pool.train=" + std::to_string(gen_train));
            if (gen_test >= 0) sets.push_back("pool.test=" + std::to_string(gen_test));
            if (gen_cols >= 0) sets.push_back("pool.cols=" + std::to_string(gen_cols));
            if (gen_rows >= 0) sets.push_back("pool.rows=" + std::to_string(gen_rows));
            if (gen_static >= 0) sets.push_back("pool.static=" + std::to_string(gen_static));
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            check(nb_pool_build(cfg.p, gen_seed, &pool.p), "building pool");
            check(nb_pool_save(pool.p, gen_out.c_str()), "writing pool");
            std::printf("wrote %zu maps and manifest.tsv to %s (pool hash %016" PRIx64 ")\n", nb_pool_size(pool.p),
                        gen_out.c_str(), nb_pool_hash(pool.p));
        } else if (*train) {
            if (train_steps > 0) sets.push_back("train.max_steps=" + std::to_string(train_steps));
            if (train_workers > 0) sets.push_back("train.workers=" + std::to_string(train_workers));
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            load_pool(pool, pool_path);
            ProgressPrinter pp;
            pp.every = train_every > 0 ? train_every : 20;
            nb_train_summary s{};
            check(nb_train(cfg.p, pool.p, train_seed, train_init.empty() ? nullptr : train_init.c_str(),
                           train_out.c_str(), on_progress, &pp, &s),
                  "training");
            std::printf("trained %" PRIu64 " steps in %" PRIu64 " updates; %s/final.bin (hash %016" PRIx64 ")\n",
                        s.global_step, s.updates, train_out.c_str(), s.checkpoint_hash);
            if (s.failed_workers > 0) std::fprintf(stderr, "warning: %d worker(s) failed\n", s.failed_workers);
        } else if (*eval) {
            if (eval_replay.empty() && eval_seed_opt->count() == 0) {
                std::fprintf(stderr, "navbench: eval needs --seed (or --replay)\n");
                return kUsage;
            }
            if (eval_episodes > 0) sets.push_back("eval.episodes_per_map=" + std::to_string(eval_episodes));
            if (eval_workers > 0) sets.push_back("eval.workers=" + std::to_string(eval_workers));
            if (!eval_variant.empty()) sets.push_back("eval.variant=" + eval_variant);
            if (eval_greedy) sets.push_back("eval.action_mode=greedy");
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            load_pool(pool, pool_path);
            nb_eval_summary s{};
            if (!eval_replay.empty()) {
                check(nb_eval_replay(cfg.p, eval_replay.c_str(), pool.p, eval_ckpt.c_str(), eval_out.c_str(), &s),
                      "replay");
            } else {
                check(nb_eval(cfg.p, pool.p, eval_ckpt.c_str(), eval_seed,
                              eval_maps.empty() ? nullptr : eval_maps.c_str(), eval_out.c_str(), &s),
                      "evaluation");
            }
            print_eval("eval", s);
            std::printf("report: %s/report.csv\n", eval_out.c_str());
        } else if (*base) {
            if (base_episodes > 0) sets.push_back("eval.episodes_per_map=" + std::to_string(base_episodes));
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            load_pool(pool, pool_path);
            nb_eval_summary s{};
            check(nb_baseline(cfg.p, pool.p, base_seed, base_maps.empty() ? nullptr : base_maps.c_str(), base_out.c_str(),
                              &s),
                  "baseline");
            print_eval("random baseline", s);
        } else if (*abl) {
            if (abl_episodes > 0) sets.push_back("eval.episodes_per_map=" + std::to_string(abl_episodes));
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            load_pool(pool, pool_path);
            check(nb_ablate(cfg.p, pool.p, abl_ckpt.c_str(), abl_seed, abl_out.c_str()), "ablation");
            std::printf("ablation grid: %s/ablation.csv\n", abl_out.c_str());
        } else if (*bench) {
            if (bench_steps > 0) sets.push_back("train.max_steps=" + std::to_string(bench_steps));
            ConfigHandle cfg;
            build_config(cfg, common, sets);
            PoolHandle pool;
            load_pool(pool, pool_path);
            check(nb_bench(cfg.p, pool.p, bench_seed, bench_ckpts.empty() ? nullptr : bench_ckpts.c_str(),
                           bench_out.c_str()),
                  "benchmark");
            std::printf("benchmark summary: %s/bench.csv\n", bench_out.c_str());
        } else if (*an) {
            if (!an_plot.empty()) {
                check(nb_plot(an_plot.c_str(), an_inputs.c_str(), an_metric.c_str(), an_out.c_str()), "plot");
                std::printf("wrote %s\n", an_out.c_str());
            } else {
                if (an_log.empty() || an_ckpt.empty()) {
                    std::fprintf(stderr, "navbench: analyze needs --log and --checkpoint, or --plot\n");
                    return kUsage;
                }
                ConfigHandle cfg;
                build_config(cfg, common, sets);
                PoolHandle pool;
                load_pool(pool, pool_path);
                nb_saliency_summary s{};
                check(nb_analyze_episode(cfg.p, pool.p, an_ckpt.c_str(), an_log.c_str(), an_stride, an_out.c_str(),
                                         &s),
                      "analysis");
                std::printf("saliency: %d frames (%d zero-gradient), mean central-third mass %.3f, "
                            "central-majority frames %d\n",
                            s.frames, s.zero_frames, s.mean_central_mass, s.central_majority_frames);
            }
        } else if (*st) {
            int passed = 0;
            nb_buffer* report = nullptr;
            check(nb_selftest(st_quick ? 1 : 0, &passed, &report), "selftest");
            std::fputs(nb_buffer_data(report), stdout);
            nb_buffer_free(report);
            return passed ? kOk : kRuntime;
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return kOk;
}
