// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [out_dir] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "benchmark.hpp"
#include "maze.hpp"
#include "metrics.hpp"
#include "navbench/navbench.h"
#include "rng.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace navbench;

namespace {

using Clock = std::chrono::steady_clock;

// Pinned acceptance settings.
constexpr std::uint64_t kPoolSeed = 1;
constexpr int kPoolTrain = 10, kPoolTest = 2, kPoolCols = 3, kPoolRows = 3, kPoolStatic = 10;
constexpr std::uint64_t kTrainSteps = 2'000'000;
constexpr int kTrainWorkers = 4;
constexpr double kStage1MinutesLimit = 45.0;
constexpr int kStage1EvalEpisodes = 50;
constexpr int kStage3EvalEpisodes = 100;
constexpr int kStage3MinLatencyEpisodes = 50;
constexpr int kStage3BaselineEpisodes = 400;
constexpr double kBaselineLatencyBand = 0.15;
constexpr int kSquareEpisodes = 100;
constexpr double kSquareBand = 0.15;
constexpr std::uint64_t kReproSteps = 10'000;

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

// seconds_limit <= 0: no runtime bound.
void report_check(int id, const char* name, const CheckResult& r, double seconds_limit) {
    const bool fast = seconds_limit <= 0.0 || r.seconds < seconds_limit;
    char t[96];
    if (seconds_limit > 0.0)
        std::snprintf(t, sizeof t, "; %.2f s (limit %.0f s)", r.seconds, seconds_limit);
    else
        std::snprintf(t, sizeof t, "; %.2f s", r.seconds);
    report(id, name, r.passed && fast, r.detail + t);
}

std::string fmt(const char* f, double v) {
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check(nb_status s, const char* what) {
    if (s != NB_OK)
        throw std::runtime_error(std::string(what) + ": " + nb_status_name(s) + ": " + nb_last_error());
}

struct Config {
    nb_config* p = nullptr;
    explicit Config(std::vector<std::string> sets) {
        check(nb_config_new(0, &p), "config");
        sets.insert(sets.begin(), {"pool.train=" + std::to_string(kPoolTrain), "pool.test=" + std::to_string(kPoolTest),
                                   "pool.cols=" + std::to_string(kPoolCols), "pool.rows=" + std::to_string(kPoolRows),
                                   "pool.static=" + std::to_string(kPoolStatic)});
        for (const auto& s : sets) check(nb_config_set(p, s.c_str()), s.c_str());
        check(nb_config_finalize(p), "finalize");
    }
    ~Config() { nb_config_free(p); }
    Config(const Config&) = delete;
    Config& operator=(const Config&) = delete;
};

struct Pool {
    nb_pool* p = nullptr;
    explicit Pool(const Config& c) { check(nb_pool_build(c.p, kPoolSeed, &p), "pool"); }
    ~Pool() { nb_pool_free(p); }
    Pool(const Pool&) = delete;
    Pool& operator=(const Pool&) = delete;
};

void on_progress(const nb_train_progress* p, void* user) {
    auto* next = static_cast<std::uint64_t*>(user);
    if (p->global_step >= *next) {
        std::printf("  .. step %llu, %.0f s\n", static_cast<unsigned long long>(p->global_step), p->wall_time_s);
        std::fflush(stdout);
        *next += 250'000;
    }
}

double train_stage_run(const Config& c, const Pool& pool, std::uint64_t seed, const fs::path& dir) {
    const auto t0 = Clock::now();
    std::uint64_t next = 250'000;
    nb_train_summary ts{};
    check(nb_train(c.p, pool.p, seed, nullptr, dir.c_str(), on_progress, &next, &ts), "train");
    if (ts.failed_workers) throw std::runtime_error(std::to_string(ts.failed_workers) + " training workers failed");
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// The map a static-map stage trains on.
std::string stage_map(int stage) {
    const MapPool pool = build_pool(kPoolSeed, kPoolTrain, kPoolTest, kPoolCols, kPoolRows, kPoolStatic);
    return training_maps(pool, StageSpec::canonical(stage)).front();
}

std::vector<double> latency_column(const fs::path& report_csv) {
    const CsvTable t = parse_csv(slurp(report_csv));
    const std::size_t col = t.column("latency_ratio");
    std::vector<double> out;
    for (const auto& row : t.rows)
        if (!row[col].empty()) out.push_back(std::stod(row[col]));
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void criterion_square() {
    const PlanningMap pm = square_planning_map();
    const EnvConfig env;
    const ControllerFactory ctl = random_controller();
    std::vector<EpisodeLog> logs;
    for (int i = 0; i < kSquareEpisodes; ++i)
        logs.push_back(play_episode(pm.maze, pm.annotations(), env, ctl,
                                    evaluation_episode_seed(7, pm.name, static_cast<std::uint64_t>(i)), pm.name, 0));
    const ShorterPathFraction f = shorter_path_fraction(logs, pm);
    const bool pass = f.shorter + f.longer > 0 && std::abs(f.fraction - 0.5) <= kSquareBand;
    report(7, "square-map-random-shorter-path-fraction", pass,
           fmt("fraction %.3f", f.fraction) + fmt(" (episode std %.3f)", f.episode_std) + ", " +
               std::to_string(f.shorter) + " shorter / " + std::to_string(f.longer) + " longer / " +
               std::to_string(f.unresolved) + " unresolved over " + std::to_string(kSquareEpisodes) +
               " episodes; band 0.50 +- " + fmt("%.2f", kSquareBand));
}

void criterion_reproducibility(const fs::path& out) {
    const Config c({"stage.id=1", "train.workers=1", "train.max_steps=" + std::to_string(kReproSteps),
                    "eval.episodes_per_map=2"});
    const Pool pool(c);
    const fs::path a = out / "repro" / "a", b = out / "repro" / "b";
    train_stage_run(c, pool, 9, a);
    train_stage_run(c, pool, 9, b);
    const std::string ca = slurp(a / "final.bin"), cb = slurp(b / "final.bin");
    const bool same_ckpt = !ca.empty() && ca == cb;

    const std::string ckpt = (a / "final.bin").string();
    const fs::path e1 = out / "repro" / "eval", e2 = out / "repro" / "replay";
    const std::string map = stage_map(1);
    check(nb_eval(c.p, pool.p, ckpt.c_str(), 21, map.c_str(), e1.c_str(), nullptr), "eval");
    check(nb_eval_replay(c.p, (e1 / "manifest.txt").c_str(), pool.p, ckpt.c_str(), e2.c_str(), nullptr), "replay");
    int files = 0, differ = 0;
    for (const char* f : {"report.csv", "manifest.txt", "summary.json"}) {
        ++files;
        differ += slurp(e1 / f) == slurp(e2 / f) ? 0 : 1;
    }
    for (const auto& e : fs::directory_iterator(e1 / "logs")) {
        ++files;
        differ += slurp(e.path()) == slurp(e2 / "logs" / e.path().filename()) ? 0 : 1;
    }
    report(9, "reproducibility", same_ckpt && differ == 0,
           std::string("two ") + std::to_string(kReproSteps) + "-step single-worker runs: checkpoints " +
               (same_ckpt ? "byte-identical" : "DIFFER") + " (" + std::to_string(ca.size()) + " bytes); replay: " +
               std::to_string(files - differ) + "/" + std::to_string(files) + " files byte-identical");
}

// Criteria 5 and 10 share the trained stage-1 agent.
void criteria_stage1(const fs::path& out) {
    const fs::path dir = out / "stage1";
    const Config c({"stage.id=1", "train.workers=" + std::to_string(kTrainWorkers),
                    "train.max_steps=" + std::to_string(kTrainSteps),
                    "eval.episodes_per_map=" + std::to_string(kStage1EvalEpisodes)});
    const Pool pool(c);
    const std::string map = stage_map(1);
    std::printf("  stage 1: training on %s for %llu steps with %d workers\n", map.c_str(),
                static_cast<unsigned long long>(kTrainSteps), kTrainWorkers);
    std::fflush(stdout);
    const double secs = train_stage_run(c, pool, 1, dir / "train");
    const std::string ckpt = (dir / "train" / "final.bin").string();

    nb_eval_summary trained{}, random{};
    check(nb_eval(c.p, pool.p, ckpt.c_str(), 101, map.c_str(), (dir / "eval").c_str(), &trained), "eval");
    check(nb_baseline(c.p, pool.p, 101, map.c_str(), (dir / "baseline").c_str(), &random), "baseline");
    const double margin = trained.reward_mean - random.reward_mean;
    const bool reward_ok = margin >= 2.0 * std::abs(random.reward_mean);
    const bool ineff_ok = trained.dist_ineff_count > 0 && trained.dist_ineff_mean <= 1.5;
    const bool time_ok = secs <= kStage1MinutesLimit * 60.0;
    report(5, "stage1-learning", reward_ok && ineff_ok && time_ok,
           fmt("trained reward %.2f", trained.reward_mean) + fmt(" +- %.2f", trained.reward_std) +
               fmt(" vs random %.2f", random.reward_mean) + fmt(" (need trained - random >= %.2f", 2.0 * std::abs(random.reward_mean)) +
               fmt(", got %.2f)", margin) + fmt("; goal hits %.2f", trained.goal_hits_mean) +
               fmt("; dist-ineff %.3f", trained.dist_ineff_mean) + " over " + std::to_string(trained.dist_ineff_count) +
               "/" + std::to_string(trained.episodes) + " episodes with N>=2 (need <= 1.5)" +
               fmt("; training %.1f min", secs / 60.0) + fmt(" (limit %.0f)", kStage1MinutesLimit));

    // Saliency on the first evaluated episode.
    fs::path log;
    for (const auto& e : fs::directory_iterator(dir / "eval" / "logs"))
        if (log.empty() || e.path() < log) log = e.path();
    nb_saliency_summary s{};
    check(nb_analyze_episode(c.p, pool.p, ckpt.c_str(), log.c_str(), 200, (dir / "saliency").c_str(), &s), "analyze");
    const int nonzero = s.frames - s.zero_frames;
    const bool pass = s.frames > 0 && nonzero > 0 && s.mask_min >= 0.0 && s.min_frame_max == 1.0 &&
                      s.max_frame_max == 1.0;
    report(10, "saliency-contract", pass,
           std::to_string(s.frames) + " frames (" + std::to_string(s.zero_frames) + " zero-gradient); mask min " +
               fmt("%.3g", s.mask_min) + ", per-frame max in [" + fmt("%.6f", s.min_frame_max) + ", " +
               fmt("%.6f", s.max_frame_max) + "]; central-third mass mean " + fmt("%.3f", s.mean_central_mass) +
               ", central majority in " + std::to_string(s.central_majority_frames) + "/" + std::to_string(nonzero) +
               " frames (reported, not gated)");
}

void criterion_stage3(const fs::path& out) {
    const fs::path dir = out / "stage3";
    const Config c({"stage.id=3", "train.workers=" + std::to_string(kTrainWorkers),
                    "train.max_steps=" + std::to_string(kTrainSteps),
                    "eval.episodes_per_map=" + std::to_string(kStage3EvalEpisodes)});
    const Pool pool(c);
    const std::string map = stage_map(3);
    std::printf("  stage 3: training on %s for %llu steps with %d workers\n", map.c_str(),
                static_cast<unsigned long long>(kTrainSteps), kTrainWorkers);
    std::fflush(stdout);
    const double secs = train_stage_run(c, pool, 3, dir / "train");
    const std::string ckpt = (dir / "train" / "final.bin").string();
    nb_eval_summary trained{};
    check(nb_eval(c.p, pool.p, ckpt.c_str(), 303, map.c_str(), (dir / "eval").c_str(), &trained), "eval");

    const Config bc({"stage.id=3", "eval.episodes_per_map=" + std::to_string(kStage3BaselineEpisodes)});
    nb_eval_summary random{};
    check(nb_baseline(bc.p, pool.p, 303, map.c_str(), (dir / "baseline").c_str(), &random), "baseline");

    const bool enough = trained.latency_count >= kStage3MinLatencyEpisodes;
    const bool exploit = trained.latency_mean > 1.0;
    const bool baseline_ok = std::abs(random.latency_mean - 1.0) <= kBaselineLatencyBand;
    report(6, "stage3-exploitation", enough && exploit && baseline_ok,
           fmt("trained latency mean %.3f", trained.latency_mean) + " over " + std::to_string(trained.latency_count) +
               "/" + std::to_string(trained.episodes) + " episodes with N>=2 (need > 1 over >= " +
               std::to_string(kStage3MinLatencyEpisodes) + ")" +
               fmt(", median %.3f", median(latency_column(dir / "eval" / "report.csv"))) +
               fmt("; goal hits %.2f", trained.goal_hits_mean) + fmt("; random latency mean %.3f", random.latency_mean) +
               " over " + std::to_string(random.latency_count) + " episodes (need 1.0 +- " +
               fmt("%.2f", kBaselineLatencyBand) + ")" +
               fmt(", median %.3f", median(latency_column(dir / "baseline" / "report.csv"))) +
               fmt("; training %.1f min", secs / 60.0));
}

} // namespace

int main(int argc, char** argv) {
    fs::path out = "acceptance_out";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
        } else {
            out = a;
        }
    }
    fs::remove_all(out);
    fs::create_directories(out);
    auto want = [&](int id) { return only.empty() || only.count(id); };
    auto guarded = [&](std::initializer_list<int> ids, const char* name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            for (int id : ids) report(id, name, false, std::string("error: ") + e.what());
        }
    };

    if (want(1)) report_check(1, "maze-correctness", check_maze_lattice(1000, 4, 4), 5.0);
    if (want(2)) report_check(2, "bfs-equals-floyd-warshall", check_shortest_paths(50, 1), 10.0);
    if (want(3)) report_check(3, "metric-fidelity", check_metric_fidelity(0.05), 0.0);
    if (want(4)) report_check(4, "gradient-checks", check_gradients(20, 1e-4), 120.0);
    if (want(8)) report_check(8, "raycaster-fidelity", check_raycaster(1000, 1e-3, 1), 30.0);
    if (want(7)) guarded({7}, "square-map-random-shorter-path-fraction", [&] { criterion_square(); });
    if (want(9)) guarded({9}, "reproducibility", [&] { criterion_reproducibility(out); });
    if (want(5) || want(10)) guarded({5, 10}, "stage1-learning/saliency", [&] { criteria_stage1(out); });
    if (want(6)) guarded({6}, "stage3-exploitation", [&] { criterion_stage3(out); });

    std::printf("%d criteria failed\n", failures);
    return failures ? 1 : 0;
}
