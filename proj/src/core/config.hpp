#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "agent.hpp"
#include "benchmark.hpp"
#include "trainer.hpp"
#include "world.hpp"

namespace navbench {

struct PoolSettings {
    int n_train = 100;
    int n_test = 10;
    int cols = 4;
    int rows = 4;
    int n_static = 10;
};

struct EvalSettings {
    int episodes_per_map = 10;
    int workers = 1;
    ActionMode action_mode = ActionMode::Sampled;
    EvalVariant variant = EvalVariant::Seen;
    AblationFlags flags;
};

struct StageSettings {
    int id = 1;
    int train_subset = 0; // stage 5: 0 uses every train map
};

/// Every tunable of a run. Text form: "[section]" headers followed by
/// "key = value" lines; '#' starts a comment. Layering: defaults, then a
/// config file, then NAVBENCH_<SECTION>_<KEY> environment variables, then
/// command-line overrides.
struct RunConfig {
    EnvConfig env;
    AgentConfig agent;
    TrainConfig train;
    PoolSettings pool;
    EvalSettings eval;
    StageSettings stage;

    /// Desk-scale defaults, or the paper-scale network and frame size.
    static RunConfig defaults(bool paper_scale = false);

    /// Sets one key; unknown keys and bad values throw InvalidArgument.
    void set(std::string_view section, std::string_view key, std::string_view value);
    /// "section.key=value".
    void set_dotted(std::string_view assignment);
    void apply_text(std::string_view text);
    /// Applies NAVBENCH_* variables from `environ`-style "NAME=value" entries.
    void apply_environment(const std::vector<std::string>& entries);

    /// Canonical text: every key, fixed order.
    std::string to_text() const;
    static RunConfig from_text(std::string_view text);
    /// Keeps agent input size tied to the rendered frame, then validates
    /// every section.
    void finalize();

    std::uint64_t hash() const;
    /// Hash of the sections a trained policy depends on (env and agent).
    std::uint64_t model_hash() const;

    /// All "section.key" names, for --help.
    static std::vector<std::string> keys();
};

/// Model hash of a serialized run config (for checkpoint compatibility).
std::uint64_t model_hash_of(std::string_view run_config_text);

} // namespace navbench
