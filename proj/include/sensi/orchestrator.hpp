#pragma once

#include "sensi/cascade.hpp"
#include "sensi/cognition.hpp"
#include "sensi/control.hpp"
#include "sensi/curriculum.hpp"
#include "sensi/environment.hpp"
#include "sensi/store.hpp"

#include <filesystem>
#include <memory>

namespace sensi {

inline constexpr const char* kEngineVersion = "0.3.0";
inline constexpr const char* kTranscriptFormat = "sensi-transcript/1";
inline constexpr int kDefaultMaxTurns = 200;

enum class Mode { V1, V2 };
enum class StopCondition { CurriculumDone, Win, MaxTurns };

std::string_view to_string(Mode mode);
std::string_view to_string(StopCondition stop);

const std::vector<std::string>& default_curriculum();
const std::vector<std::string>& default_seed_facts();
inline const std::vector<int> kBaselineInteractions = {1600, 3000};

/// Run configuration (JSON). Fixture paths are resolved against `base_dir`
/// and inlined by `resolved()`, so a transcript's config echo is self-contained.
struct RunConfig {
    Mode mode = Mode::V2;
    nlohmann::json environment = {{"kind", "keyquest"}};
    nlohmann::json backends = nlohmann::json::object();
    std::optional<nlohmann::json> corruption;  // {policy, rate, seed}
    int max_turns = kDefaultMaxTurns;
    std::optional<int> threshold;
    int history_window = 10;
    StopCondition stop = StopCondition::CurriculumDone;
    std::string card_id = "default";
    std::vector<std::string> curriculum = default_curriculum();
    std::vector<std::string> seed_facts = default_seed_facts();
    std::optional<std::int64_t> clock_start;  // logical clock when set
    bool attach_images = false;
    std::filesystem::path base_dir = ".";

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    RunConfig resolved() const;
    std::string hash() const;
    bool scripted() const;  // no remote backend or environment
};

struct Pipeline {
    BackendPtr frame_diff;
    BackendPtr metric_gen;
    BackendPtr sense_score;
    BackendPtr observer;
    BackendPtr actor;
    std::shared_ptr<CorruptingDiffer> corruption;
};

std::unique_ptr<Environment> make_environment(const RunConfig& config);
Pipeline make_pipeline(const RunConfig& config, const Environment& env,
                       const std::optional<std::filesystem::path>& trace_dir = std::nullopt);
Clock make_clock(const RunConfig& config);

/// Opens (creating if needed) and initializes a store for this config.
Store open_run_store(const RunConfig& config, const std::filesystem::path& db, const std::string& game_id);

struct RunMetrics {
    int turns = 0;
    int total_interactions = 0;  // non-RESET environment steps
    int resets = 0;  // RESETs issued by the loop after GAME_OVER or WIN
    std::optional<int> curriculum_completion_turn;
    std::vector<std::pair<std::int64_t, int>> item_completion_turns;
    int levels_won = 0;
    int losing_sequences = 0;
    std::vector<std::pair<int, double>> efficiency_ratios;
    std::string stop_reason;

    nlohmann::json to_json() const;
};

/// Baseline / interactions, exact in double for the shipped baselines.
std::vector<std::pair<int, double>> efficiency_ratios(int total_interactions,
                                                      const std::vector<int>& baselines = kBaselineInteractions);

struct TurnOutcome {
    TurnRecord record;
    nlohmann::json transcript_entry;
    bool curriculum_done = false;
    bool won = false;
};

class Orchestrator {
public:
    Orchestrator(RunConfig config, Store& store, Environment& env, Pipeline pipeline, RunControl* control = nullptr,
                 const std::optional<std::filesystem::path>& trace_dir = std::nullopt);
    ~Orchestrator();

    /// Resets the environment and starts a fresh transcript.
    void start();
    /// One full pipeline turn plus the environment step, committed atomically.
    TurnOutcome execute_turn();
    /// start() plus execute_turn() until a stop condition; stage errors propagate.
    RunMetrics run();

    const nlohmann::json& transcript() const { return transcript_; }
    const RunMetrics& metrics() const { return metrics_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    nlohmann::json transcript_;
    RunMetrics metrics_;
};

struct RunResult {
    RunMetrics metrics;
    nlohmann::json transcript;
    std::string store_dump;
};

/// Builds everything from the config and runs to completion against `db`.
RunResult run_config(const RunConfig& config, const std::filesystem::path& db, RunControl* control = nullptr,
                     const std::optional<std::filesystem::path>& trace_dir = std::nullopt);

void write_manifest(const RunConfig& config, const std::filesystem::path& db);

struct Divergence {
    int turn_index = 0;
    std::string field;
    std::string expected;
    std::string actual;
};

struct ReplayReport {
    bool match = false;
    int turns_checked = 0;
    std::optional<Divergence> divergence;
    nlohmann::json to_json() const;
};

/// Re-executes a scripted run on a scratch copy of `base_store` (or a fresh
/// store) and compares it turn by turn with `transcript`.
ReplayReport replay(const nlohmann::json& transcript, const std::optional<std::filesystem::path>& base_store);

}  // namespace sensi
