#include "navbench/navbench.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "agent.hpp"
#include "analysis.hpp"
#include "benchmark.hpp"
#include "config.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "metrics.hpp"
#include "selftest.hpp"
#include "trainer.hpp"

extern char** environ;

struct nb_buffer {
    std::string bytes;
};

struct nb_config {
    navbench::RunConfig cfg;
    bool finalized = false;
};

struct nb_pool {
    navbench::MapPool pool;
};

namespace {

using namespace navbench;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

nb_status status_of(ErrorKind k) {
    switch (k) {
    case ErrorKind::InvalidArgument: return NB_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return NB_ERR_PARSE;
    case ErrorKind::Mismatch: return NB_ERR_MISMATCH;
    case ErrorKind::Io: return NB_ERR_IO;
    case ErrorKind::Contract: return NB_ERR_CONTRACT;
    case ErrorKind::Numeric: return NB_ERR_NUMERIC;
    case ErrorKind::Runtime: return NB_ERR_RUNTIME;
    }
    return NB_ERR_RUNTIME;
}

template <typename F>
nb_status guard(F&& f) {
    try {
        f();
        g_last_error.clear();
        return NB_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("json: ") + e.what();
        return NB_ERR_PARSE;
    } catch (const fs::filesystem_error& e) {
        g_last_error = e.what();
        return NB_ERR_IO;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return NB_ERR_RUNTIME;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return NB_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown exception";
        return NB_ERR_RUNTIME;
    }
}

void need(const void* p, const char* what) {
    if (!p) fail(ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

const RunConfig& ready(const nb_config* c) {
    need(c, "config");
    if (!c->finalized) fail(ErrorKind::Contract, "config used before nb_config_finalize");
    return c->cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ErrorKind::Io, "error reading '" + path + "'");
    return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "error writing '" + path.string() + "'");
}

fs::path make_dir(const char* dir) {
    need(dir, "output directory");
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) fail(ErrorKind::Io, "cannot create '" + p.string() + "': " + ec.message());
    return p;
}

std::vector<std::string> split_list(const char* s) {
    std::vector<std::string> out;
    if (!s) return out;
    std::string cur;
    for (const char* p = s;; ++p) {
        if (*p == ',' || *p == '\0') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
            if (*p == '\0') break;
        } else if (*p != ' ') {
            cur += *p;
        }
    }
    return out;
}

/// "# code_version=... config_hash=... k=v ..." provenance line for text artifacts.
std::string provenance(std::uint64_t config_hash, const std::vector<std::pair<std::string, std::string>>& extra) {
    std::string s = "# code_version=" + std::string(kCodeVersion) + " config_hash=" + hex64(config_hash);
    for (const auto& [k, v] : extra) s += " " + k + "=" + v;
    return s + "\n";
}

nlohmann::json provenance_json(std::uint64_t config_hash) {
    nlohmann::json j;
    j["code_version"] = kCodeVersion;
    j["config_hash"] = hex64(config_hash);
    return j;
}

struct LoadedCheckpoint {
    Checkpoint ckpt;
    std::uint64_t hash = 0;
};

/// Rejects checkpoints whose network or world settings differ from cfg.
LoadedCheckpoint load_checkpoint(const RunConfig& cfg, const char* path) {
    need(path, "checkpoint path");
    const std::string bytes = read_file(path);
    LoadedCheckpoint out;
    out.ckpt = decode_checkpoint(bytes);
    out.hash = fnv1a(bytes);
    if (!(out.ckpt.agent == cfg.agent))
        fail(ErrorKind::Mismatch, std::string("checkpoint '") + path +
                                      "' holds a different network shape than the config; "
                                      "pass the training config with --config or matching --set agent.* values");
    if (!out.ckpt.run_config.empty()) {
        const std::uint64_t theirs = model_hash_of(out.ckpt.run_config);
        const std::uint64_t ours = cfg.model_hash();
        if (theirs != ours)
            fail(ErrorKind::Mismatch, std::string("config hash mismatch: checkpoint '") + path +
                                          "' was trained with [env]/[agent] hash " + hex64(theirs) +
                                          ", this config has " + hex64(ours) +
                                          "; use the config recorded in the checkpoint's run directory");
    }
    return out;
}

Checkpoint make_checkpoint(const RunConfig& cfg, const MapPool& pool, std::uint64_t seed, std::uint64_t step,
                           ParameterSet params) {
    Checkpoint c;
    c.agent = cfg.agent;
    c.run_config = cfg.to_text();
    c.config_hash = cfg.hash();
    c.seeds = {{"train", seed}, {"pool", pool.pool_seed}};
    c.global_step = step;
    c.params = std::move(params);
    return c;
}

void fill_summary(const MetricsSummary& s, nb_eval_summary* out) {
    if (!out) return;
    out->episodes = s.episodes;
    out->reward_mean = s.reward.mean;
    out->reward_std = s.reward.std;
    out->goal_hits_mean = s.goal_hits.mean;
    out->latency_mean = s.latency.mean;
    out->latency_count = s.latency.count;
    out->dist_ineff_mean = s.dist_ineff_bfs.mean;
    out->dist_ineff_count = s.dist_ineff_bfs.count;
}

EvalConfig eval_config(const RunConfig& cfg, std::uint64_t eval_seed) {
    EvalConfig e;
    e.episodes_per_map = cfg.eval.episodes_per_map;
    e.eval_seed = eval_seed;
    e.variant = cfg.eval.variant;
    e.flags = cfg.eval.flags;
    e.env = cfg.env;
    e.workers = cfg.eval.workers;
    e.config_hash = cfg.hash();
    return e;
}

std::string log_name(const std::string& map_id, int episode) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%04d.jsonl", episode);
    return map_id + buf;
}

/// report.csv, summary.json, manifest.txt and logs/ for one stage run.
void write_stage_outputs(const fs::path& dir, const StageReport& r, const StageManifest& m) {
    const std::string prov =
        provenance(m.config_hash, {{"stage", std::to_string(m.stage.id)},
                                   {"variant", std::string(variant_name(m.variant))},
                                   {"eval_seed", std::to_string(m.eval_seed)},
                                   {"pool_seed", std::to_string(m.pool_seed)},
                                   {"checkpoint_hash", hex64(m.checkpoint_hash)}});
    write_file(dir / "report.csv", prov + reports_to_csv(r.reports));
    nlohmann::json extra = provenance_json(m.config_hash);
    extra["stage"] = m.stage.id;
    extra["stage_spec"] = m.stage.describe();
    extra["variant"] = variant_name(m.variant);
    extra["eval_seed"] = m.eval_seed;
    extra["pool_seed"] = m.pool_seed;
    extra["pool_hash"] = hex64(m.pool_hash);
    extra["checkpoint_hash"] = hex64(m.checkpoint_hash);
    extra["latency_trivial"] = m.stage.latency_trivial();
    extra["apples"] = m.flags.apples_present;
    extra["textures"] = m.flags.textures_random;
    write_file(dir / "summary.json", summary_to_json(r.summary, extra.dump()));
    write_file(dir / "manifest.txt", m.to_text());
    const fs::path logs = dir / "logs";
    fs::create_directories(logs);
    for (std::size_t i = 0; i < r.logs.size(); ++i)
        write_file(logs / log_name(r.reports[i].map_id, r.reports[i].episode), encode_episode_log(r.logs[i]));
}

StageManifest manifest_for(const RunConfig& cfg, const MapPool& pool, const StageReport& r, std::uint64_t eval_seed,
                           std::uint64_t ckpt_hash, ActionMode mode) {
    StageManifest m;
    m.stage = r.stage;
    m.variant = cfg.eval.variant;
    m.pool_seed = pool.pool_seed;
    m.pool_hash = pool.hash();
    m.checkpoint_hash = ckpt_hash;
    m.eval_seed = eval_seed;
    m.config_hash = cfg.hash();
    m.episodes_per_map = cfg.eval.episodes_per_map;
    m.action_mode = mode;
    m.flags = cfg.eval.flags;
    m.map_ids = r.map_ids;
    m.code_version = std::string(kCodeVersion);
    return m;
}

StageReport evaluate(const RunConfig& cfg, const MapPool& pool, const ControllerFactory& controller,
                     std::uint64_t eval_seed, std::vector<std::string> map_ids) {
    const StageSpec stage = StageSpec::canonical(cfg.stage.id);
    EvalConfig e = eval_config(cfg, eval_seed);
    e.map_ids = std::move(map_ids);
    StageReport r = run_stage(stage, pool, e, controller);
    if (e.variant == EvalVariant::Unseen && e.map_ids.empty()) {
        const int leaked = count_train_maps(r.logs, pool);
        if (leaked != 0)
            fail(ErrorKind::Runtime, "unseen evaluation instantiated " + std::to_string(leaked) + " train maps");
    }
    return r;
}

void eval_with_checkpoint(const RunConfig& cfg, const MapPool& pool, const char* checkpoint, std::uint64_t eval_seed,
                          std::vector<std::string> map_ids, const fs::path& dir, nb_eval_summary* summary) {
    const LoadedCheckpoint ck = load_checkpoint(cfg, checkpoint);
    const ControllerFactory ctl = network_controller(cfg.agent, ck.ckpt.params, cfg.eval.action_mode, cfg.env);
    const StageReport r = evaluate(cfg, pool, ctl, eval_seed, std::move(map_ids));
    write_stage_outputs(dir, r, manifest_for(cfg, pool, r, eval_seed, ck.hash, cfg.eval.action_mode));
    fill_summary(r.summary, summary);
}

struct TrainOutcome {
    std::uint64_t global_step = 0;
    std::uint64_t updates = 0;
    int failed_workers = 0;
    std::uint64_t checkpoint_hash = 0;
    fs::path final_path;
};

TrainOutcome train_into(const RunConfig& cfg, const MapPool& pool, std::uint64_t seed, const char* init_checkpoint,
                        const fs::path& dir, nb_progress_fn progress, void* user) {
    const StageSpec stage = StageSpec::canonical(cfg.stage.id);
    const std::vector<std::string> maps = training_maps(pool, stage, cfg.stage.train_subset);
    ParameterSet initial = init_checkpoint ? load_checkpoint(cfg, init_checkpoint).ckpt.params
                                           : init_params(derive_seed(seed, 0x696e6974), cfg.agent);
    TrainConfig tc = cfg.train;
    tc.seed = seed;

    write_file(dir / "config.txt", provenance(cfg.hash(), {{"seed", std::to_string(seed)}}) + cfg.to_text());
    std::ofstream csv(dir / "train.csv", std::ios::binary | std::ios::trunc);
    if (!csv) fail(ErrorKind::Io, "cannot write '" + (dir / "train.csv").string() + "'");
    csv << provenance(cfg.hash(), {{"seed", std::to_string(seed)},
                                   {"pool_seed", std::to_string(pool.pool_seed)},
                                   {"stage", std::to_string(stage.id)}})
        << train_csv_header();

    TrainCallbacks cb;
    cb.on_progress = [&](const TrainProgress& p) {
        if (p.has_episode) csv << train_csv_row(p);
        if (progress) {
            nb_train_progress np{p.global_step, p.worker, p.has_episode ? 1 : 0,
                                 p.episode.reward, p.episode.goal_hits, p.wall_time_s};
            progress(&np, user);
        }
    };
    cb.on_checkpoint = [&](std::uint64_t step, const ParameterSet& params) {
        write_file(dir / ("ckpt_" + std::to_string(step) + ".bin"),
                   encode_checkpoint(make_checkpoint(cfg, pool, seed, step, params)));
    };
    TrainResult r = train_stage(cfg.agent, tc, stage, pool, maps, cfg.eval.flags, cfg.env, std::move(initial), cb);
    csv.close();
    const std::string bytes = encode_checkpoint(make_checkpoint(cfg, pool, seed, r.global_step, std::move(r.params)));
    TrainOutcome out;
    out.final_path = dir / "final.bin";
    write_file(out.final_path, bytes);
    out.global_step = r.global_step;
    out.updates = r.updates;
    out.failed_workers = r.failed_workers;
    out.checkpoint_hash = fnv1a(bytes);
    return out;
}

std::string frame_name(const char* prefix, std::size_t t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05zu.ppm", prefix, t);
    return buf;
}

} // namespace

extern "C" {

const char* nb_last_error(void) { return g_last_error.c_str(); }
const char* nb_version(void) { return kCodeVersion.data(); }

const char* nb_status_name(nb_status s) {
    switch (s) {
    case NB_OK: return "ok";
    case NB_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NB_ERR_PARSE: return "parse error";
    case NB_ERR_MISMATCH: return "mismatch";
    case NB_ERR_IO: return "i/o error";
    case NB_ERR_CONTRACT: return "contract violation";
    case NB_ERR_NUMERIC: return "numeric error";
    case NB_ERR_RUNTIME: return "runtime error";
    }
    return "unknown status";
}

const char* nb_buffer_data(const nb_buffer* buf) { return buf ? buf->bytes.c_str() : ""; }
size_t nb_buffer_size(const nb_buffer* buf) { return buf ? buf->bytes.size() : 0; }
void nb_buffer_free(nb_buffer* buf) { delete buf; }

nb_status nb_config_new(int paper_scale, nb_config** out) {
    return guard([&] {
        need(out, "out");
        *out = new nb_config{RunConfig::defaults(paper_scale != 0), false};
    });
}

void nb_config_free(nb_config* cfg) { delete cfg; }

nb_status nb_config_load_file(nb_config* cfg, const char* path) {
    return guard([&] {
        need(cfg, "config");
        need(path, "path");
        cfg->cfg.apply_text(read_file(path));
        cfg->finalized = false;
    });
}

nb_status nb_config_apply_environment(nb_config* cfg) {
    return guard([&] {
        need(cfg, "config");
        std::vector<std::string> entries;
        for (char** e = environ; e && *e; ++e) entries.emplace_back(*e);
        cfg->cfg.apply_environment(entries);
        cfg->finalized = false;
    });
}

nb_status nb_config_set(nb_config* cfg, const char* assignment) {
    return guard([&] {
        need(cfg, "config");
        need(assignment, "assignment");
        cfg->cfg.set_dotted(assignment);
        cfg->finalized = false;
    });
}

nb_status nb_config_finalize(nb_config* cfg) {
    return guard([&] {
        need(cfg, "config");
        cfg->cfg.finalize();
        cfg->finalized = true;
    });
}

nb_status nb_config_text(const nb_config* cfg, nb_buffer** out) {
    return guard([&] {
        need(cfg, "config");
        need(out, "out");
        *out = new nb_buffer{cfg->cfg.to_text()};
    });
}

uint64_t nb_config_hash(const nb_config* cfg) { return cfg ? cfg->cfg.hash() : 0; }

nb_status nb_config_keys(nb_buffer** out) {
    return guard([&] {
        need(out, "out");
        std::string s;
        for (const auto& k : RunConfig::keys()) s += k + "\n";
        *out = new nb_buffer{std::move(s)};
    });
}

nb_status nb_pool_build(const nb_config* cfg, uint64_t pool_seed, nb_pool** out) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(out, "out");
        *out = new nb_pool{build_pool(pool_seed, c.pool.n_train, c.pool.n_test, c.pool.cols, c.pool.rows,
                                      c.pool.n_static)};
    });
}

nb_status nb_pool_load(const char* manifest_path, nb_pool** out) {
    return guard([&] {
        need(manifest_path, "manifest path");
        need(out, "out");
        *out = new nb_pool{MapPool::parse_manifest(read_file(manifest_path))};
    });
}

nb_status nb_pool_save(const nb_pool* pool, const char* dir) {
    return guard([&] {
        need(pool, "pool");
        const fs::path d = make_dir(dir);
        write_file(d / "manifest.tsv", pool->pool.manifest());
        for (const auto& e : pool->pool.entries) write_file(d / (e.id + ".map"), serialize_map(pool->pool.maze(e.id)));
    });
}

void nb_pool_free(nb_pool* pool) { delete pool; }
size_t nb_pool_size(const nb_pool* pool) { return pool ? pool->pool.entries.size() : 0; }
uint64_t nb_pool_hash(const nb_pool* pool) { return pool ? pool->pool.hash() : 0; }

nb_status nb_train(const nb_config* cfg, const nb_pool* pool, uint64_t seed, const char* init_checkpoint,
                   const char* out_dir, nb_progress_fn progress, void* user, nb_train_summary* summary) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(pool, "pool");
        const TrainOutcome r = train_into(c, pool->pool, seed, init_checkpoint, make_dir(out_dir), progress, user);
        if (summary) *summary = {r.global_step, r.updates, r.failed_workers, r.checkpoint_hash};
    });
}

nb_status nb_eval(const nb_config* cfg, const nb_pool* pool, const char* checkpoint, uint64_t eval_seed,
                  const char* map_ids, const char* out_dir, nb_eval_summary* summary) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(pool, "pool");
        const fs::path dir = make_dir(out_dir);
        eval_with_checkpoint(c, pool->pool, checkpoint, eval_seed, split_list(map_ids), dir, summary);
    });
}

nb_status nb_eval_replay(const nb_config* cfg, const char* manifest_path, const nb_pool* pool,
                         const char* checkpoint, const char* out_dir, nb_eval_summary* summary) {
    return guard([&] {
        RunConfig c = ready(cfg);
        need(pool, "pool");
        need(manifest_path, "manifest path");
        const StageManifest m = StageManifest::from_text(read_file(manifest_path));
        if (m.pool_hash != pool->pool.hash())
            fail(ErrorKind::Mismatch, "pool hash " + hex64(pool->pool.hash()) + " differs from the manifest's " +
                                          hex64(m.pool_hash) + "; load the pool the run was evaluated on");
        c.stage.id = m.stage.id;
        c.eval.variant = m.variant;
        c.eval.flags = m.flags;
        c.eval.episodes_per_map = m.episodes_per_map;
        c.eval.action_mode = m.action_mode;
        c.finalize();
        if (c.hash() != m.config_hash)
            fail(ErrorKind::Mismatch, "config hash " + hex64(c.hash()) + " differs from the manifest's " +
                                          hex64(m.config_hash) + "; replay with the config the run used");
        const fs::path dir = make_dir(out_dir);
        if (m.checkpoint_hash == 0 && !checkpoint) {
            const StageReport r = evaluate(c, pool->pool, random_controller(), m.eval_seed, m.map_ids);
            write_stage_outputs(dir, r, manifest_for(c, pool->pool, r, m.eval_seed, 0, m.action_mode));
            fill_summary(r.summary, summary);
            return;
        }
        const LoadedCheckpoint ck = load_checkpoint(c, checkpoint);
        if (ck.hash != m.checkpoint_hash)
            fail(ErrorKind::Mismatch, "checkpoint hash " + hex64(ck.hash) + " differs from the manifest's " +
                                          hex64(m.checkpoint_hash));
        const ControllerFactory ctl = network_controller(c.agent, ck.ckpt.params, m.action_mode, c.env);
        const StageReport r = evaluate(c, pool->pool, ctl, m.eval_seed, m.map_ids);
        write_stage_outputs(dir, r, manifest_for(c, pool->pool, r, m.eval_seed, ck.hash, m.action_mode));
        fill_summary(r.summary, summary);
    });
}

nb_status nb_baseline(const nb_config* cfg, const nb_pool* pool, uint64_t eval_seed, const char* map_ids,
                      const char* out_dir, nb_eval_summary* summary) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(pool, "pool");
        const fs::path dir = make_dir(out_dir);
        const StageReport r = evaluate(c, pool->pool, random_controller(), eval_seed, split_list(map_ids));
        write_stage_outputs(dir, r, manifest_for(c, pool->pool, r, eval_seed, 0, ActionMode::Sampled));
        fill_summary(r.summary, summary);
    });
}

nb_status nb_ablate(const nb_config* cfg, const nb_pool* pool, const char* checkpoint, uint64_t eval_seed,
                    const char* out_dir) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(pool, "pool");
        const fs::path dir = make_dir(out_dir);
        const LoadedCheckpoint ck = load_checkpoint(c, checkpoint);
        const ControllerFactory ctl = network_controller(c.agent, ck.ckpt.params, c.eval.action_mode, c.env);
        const StageSpec stage = StageSpec::canonical(c.stage.id);
        const std::vector<AblationCell> cells = run_ablation_grid(stage, pool->pool, eval_config(c, eval_seed), ctl);
        std::string csv = provenance(c.hash(), {{"stage", std::to_string(stage.id)},
                                                {"eval_seed", std::to_string(eval_seed)},
                                                {"checkpoint_hash", hex64(ck.hash)}});
        csv += "apples,textures,episodes,reward_mean,reward_std,goal_hits_mean,latency_mean,latency_n,"
               "dist_ineff_mean,dist_ineff_n\n";
        std::vector<Bar> bars;
        for (const auto& cell : cells) {
            const std::string name = std::string("apples") + (cell.flags.apples_present ? "1" : "0") + "_textures" +
                                     (cell.flags.textures_random ? "1" : "0");
            RunConfig cc = c;
            cc.eval.flags = cell.flags;
            const fs::path sub = dir / name;
            fs::create_directories(sub);
            write_stage_outputs(sub, cell.report,
                                manifest_for(cc, pool->pool, cell.report, eval_seed, ck.hash, c.eval.action_mode));
            const MetricsSummary& s = cell.report.summary;
            char row[256];
            std::snprintf(row, sizeof row, "%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%d,%.6f,%d\n",
                          cell.flags.apples_present ? 1 : 0, cell.flags.textures_random ? 1 : 0, s.episodes,
                          s.reward.mean, s.reward.std, s.goal_hits.mean, s.latency.mean, s.latency.count,
                          s.dist_ineff_bfs.mean, s.dist_ineff_bfs.count);
            csv += row;
            bars.push_back({name, s.reward.mean, s.reward.std});
        }
        write_file(dir / "ablation.csv", csv);
        write_file(dir / "ablation.svg", bar_chart_svg(bars, "Ablation, stage " + std::to_string(stage.id), "reward"));
    });
}

nb_status nb_bench(const nb_config* cfg, const nb_pool* pool, uint64_t seed, const char* checkpoint_dir,
                   const char* out_dir) {
    return guard([&] {
        const RunConfig& base = ready(cfg);
        need(pool, "pool");
        const fs::path dir = make_dir(out_dir);
        std::string csv = provenance(base.hash(), {{"seed", std::to_string(seed)},
                                                   {"pool_seed", std::to_string(pool->pool.pool_seed)}});
        csv += "stage,variant,episodes,reward_mean,reward_std,goal_hits_mean,latency_mean,latency_n,"
               "latency_trivial,dist_ineff_mean,dist_ineff_n\n";
        std::vector<Bar> bars;
        for (int id = 1; id <= 5; ++id) {
            RunConfig c = base;
            c.stage.id = id;
            const fs::path sdir = dir / ("stage" + std::to_string(id));
            fs::create_directories(sdir);
            fs::path ckpt;
            if (checkpoint_dir && fs::exists(fs::path(checkpoint_dir) / ("stage" + std::to_string(id) + ".bin"))) {
                ckpt = fs::path(checkpoint_dir) / ("stage" + std::to_string(id) + ".bin");
            } else {
                const fs::path tdir = sdir / "train";
                fs::create_directories(tdir);
                ckpt = train_into(c, pool->pool, derive_seed(seed, static_cast<std::uint64_t>(id)), nullptr, tdir,
                                  nullptr, nullptr)
                           .final_path;
            }
            std::vector<EvalVariant> variants{EvalVariant::Seen};
            if (id == 5) variants.push_back(EvalVariant::Unseen);
            for (EvalVariant v : variants) {
                c.eval.variant = v;
                const fs::path edir = sdir / std::string(variant_name(v));
                fs::create_directories(edir);
                nb_eval_summary s{};
                eval_with_checkpoint(c, pool->pool, ckpt.string().c_str(), derive_seed(seed, 0x6576616c),
                                     {}, edir, &s);
                const StageSpec spec = StageSpec::canonical(id);
                char row[256];
                std::snprintf(row, sizeof row, "%d,%s,%d,%.6f,%.6f,%.6f,%.6f,%d,%d,%.6f,%d\n", id,
                              std::string(variant_name(v)).c_str(), s.episodes, s.reward_mean, s.reward_std,
                              s.goal_hits_mean, s.latency_mean, s.latency_count, spec.latency_trivial() ? 1 : 0, s.dist_ineff_mean,
                              s.dist_ineff_count);
                csv += row;
                bars.push_back({"stage " + std::to_string(id) + (id == 5 ? " " + std::string(variant_name(v)) : ""),
                                s.reward_mean, s.reward_std});
            }
        }
        write_file(dir / "bench.csv", csv);
        write_file(dir / "bench.svg", bar_chart_svg(bars, "Benchmark stages", "reward"));
    });
}

nb_status nb_analyze_episode(const nb_config* cfg, const nb_pool* pool, const char* checkpoint, const char* log_path,
                             int frame_stride, const char* out_dir, nb_saliency_summary* summary) {
    return guard([&] {
        const RunConfig& c = ready(cfg);
        need(pool, "pool");
        need(log_path, "log path");
        if (frame_stride < 1) fail(ErrorKind::InvalidArgument, "frame stride must be >= 1");
        const fs::path dir = make_dir(out_dir);
        const LoadedCheckpoint ck = load_checkpoint(c, checkpoint);
        const EpisodeLog log = decode_episode_log(read_file(log_path));
        const StageSpec stage = StageSpec::canonical(c.stage.id);
        const Maze maze = pool->pool.maze(log.header.map_id);
        const MapAnnotations ann = stage_annotations(maze, stage, c.eval.flags, log.header.episode_seed);
        const EnvConfig env = stage_env(c.env, stage);
        const SaliencyResult sal = saliency(c.agent, ck.ckpt.params, c.train, maze, ann, env, log);

        nb_saliency_summary s{};
        s.frames = static_cast<int>(sal.frames.size());
        s.zero_frames = sal.zero_frames;
        s.central_majority_frames = sal.central_majority_frames;
        s.mask_min = sal.frames.empty() ? 0.0 : 1.0;
        s.min_frame_max = 1.0;
        s.max_frame_max = 0.0;
        double mass = 0.0;
        int nonzero = 0;
        std::string csv = provenance(c.hash(), {{"map", log.header.map_id},
                                                {"episode_seed", std::to_string(log.header.episode_seed)},
                                                {"checkpoint_hash", hex64(ck.hash)}});
        csv += "t,zero_gradient,central_mass,mask_max\n";
        for (std::size_t i = 0; i < sal.frames.size(); ++i) {
            const SaliencyFrame& f = sal.frames[i];
            double lo = 1.0, hi = 0.0;
            for (double v : f.mask) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            s.mask_min = std::min(s.mask_min, lo);
            if (!f.zero_gradient) {
                s.min_frame_max = std::min(s.min_frame_max, hi);
                s.max_frame_max = std::max(s.max_frame_max, hi);
                mass += f.central_mass;
                ++nonzero;
            }
            char row[128];
            std::snprintf(row, sizeof row, "%zu,%d,%.6f,%.6f\n", i + 1, f.zero_gradient ? 1 : 0, f.central_mass, hi);
            csv += row;
        }
        if (nonzero == 0) s.min_frame_max = 0.0;
        s.mean_central_mass = nonzero ? mass / nonzero : 0.0;
        write_file(dir / "saliency.csv", csv);

        nlohmann::json j = provenance_json(c.hash());
        j["map_id"] = log.header.map_id;
        j["episode_seed"] = log.header.episode_seed;
        j["checkpoint_hash"] = hex64(ck.hash);
        j["frames"] = s.frames;
        j["zero_frames"] = s.zero_frames;
        j["central_majority_frames"] = s.central_majority_frames;
        j["central_majority_fraction"] =
            nonzero ? static_cast<double>(s.central_majority_frames) / nonzero : 0.0;
        j["mean_central_mass"] = s.mean_central_mass;
        j["mask_min"] = s.mask_min;
        j["min_frame_max"] = s.min_frame_max;
        j["max_frame_max"] = s.max_frame_max;
        write_file(dir / "saliency.json", j.dump(2) + "\n");

        // Views are re-rendered by replaying the logged actions.
        const std::string comment = "code_version=" + std::string(kCodeVersion) + " config_hash=" + hex64(c.hash());
        Environment replay(maze, ann, env, log.header.episode_seed);
        for (std::size_t i = 0; i < log.records.size() && i < sal.frames.size(); ++i) {
            if (i % static_cast<std::size_t>(frame_stride) == 0) {
                const Image view = replay.observe().image;
                write_file(dir / frame_name("view", i + 1), encode_ppm(view, comment));
                write_file(dir / frame_name("mask", i + 1),
                           encode_ppm(mask_image(sal.frames[i].mask, sal.width, sal.height), comment));
                write_file(dir / frame_name("masked", i + 1), encode_ppm(apply_mask(view, sal.frames[i].mask), comment));
                write_file(dir / frame_name("topdown", i + 1),
                           encode_ppm(render_topdown(maze, ann, log.records, 0, i + 1, env.block_size()), comment));
            }
            replay.step(log.records[i].action);
        }
        write_file(dir / "topdown.ppm",
                   encode_ppm(render_topdown(maze, ann, log.records, 0, log.records.size(), env.block_size()), comment));
        if (summary) *summary = s;
    });
}

nb_status nb_plot(const char* kind, const char* paths, const char* metric, const char* out_svg) {
    return guard([&] {
        need(kind, "kind");
        need(out_svg, "output path");
        const std::vector<std::string> files = split_list(paths);
        if (files.empty()) fail(ErrorKind::InvalidArgument, "plot needs at least one input CSV");
        const std::string k = kind;
        std::string svg;
        if (k == "reward") {
            std::vector<PlotSeries> series;
            for (const auto& f : files) series.push_back(reward_series(parse_csv(read_file(f)), fs::path(f).parent_path().filename().string() + "/" + fs::path(f).stem().string()));
            svg = line_plot_svg(series, "Episode reward", "global step", "reward");
        } else if (k == "metric") {
            need(metric, "metric column");
            std::vector<Bar> bars;
            for (const auto& f : files)
                bars.push_back(metric_bar(parse_csv(read_file(f)), metric, fs::path(f).parent_path().filename().string()));
            svg = bar_chart_svg(bars, metric, metric);
        } else {
            fail(ErrorKind::InvalidArgument, "plot kind must be 'reward' or 'metric', got '" + k + "'");
        }
        write_file(out_svg, svg);
    });
}

nb_status nb_selftest(int quick, int* passed, nb_buffer** report) {
    return guard([&] {
        need(passed, "passed");
        const std::vector<CheckResult> results = run_selftest(quick != 0);
        bool ok = true;
        std::string text;
        for (const auto& r : results) {
            ok = ok && r.passed;
            char head[96];
            std::snprintf(head, sizeof head, "%s %-20s %7.2fs  ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds);
            text += head + r.detail + "\n";
        }
        *passed = ok ? 1 : 0;
        if (report) *report = new nb_buffer{std::move(text)};
    });
}

} // extern "C"
