#pragma once

// Deterministic backends. Fixture formats are documented in docs/fixtures.md.

#include "sensi/cognition.hpp"

#include <filesystem>
#include <map>

namespace sensi {

/// Frame-diff stage backed by programmatic_diff.
class ProgrammaticDiffer final : public Backend {
public:
    explicit ProgrammaticDiffer(std::vector<HudRegion> hud) : hud_(std::move(hud)) {}
    std::string name() const override { return "programmatic"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::vector<HudRegion> hud_;
};

/// Replays canned diff replies by turn: {"diffs": {"<turn>": <diff or raw string>}}.
class ScriptedDiffer final : public Backend {
public:
    explicit ScriptedDiffer(std::map<int, std::string> replies) : replies_(std::move(replies)) {}
    static ScriptedDiffer from_json(const nlohmann::json& j);
    std::string name() const override { return "scripted_diff"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::map<int, std::string> replies_;
};

/// {"metrics": {"<item name>": "<rubric>"}, "default": "<template with {item}>"}.
class ScriptedMetricGen final : public Backend {
public:
    ScriptedMetricGen(std::map<std::string, std::string> metrics, std::string fallback);
    static ScriptedMetricGen from_json(const nlohmann::json& j);
    std::string name() const override { return "scripted_metric"; }
    std::string invoke(const StageRequest& request) override;
    int invocations() const { return invocations_; }

private:
    std::map<std::string, std::string> metrics_;
    std::string fallback_;
    int invocations_ = 0;
};

/// phi = min(10, base + |figured_out|).
class MonotoneScorer final : public Backend {
public:
    explicit MonotoneScorer(int base = 2) : base_(base) {}
    std::string name() const override { return "monotone"; }
    std::string invoke(const StageRequest& request) override;

private:
    int base_;
};

/// Scores by turn, falling back to `fallback`: {"scores": {"<turn>": phi}, "default": phi}.
class ScheduleScorer final : public Backend {
public:
    ScheduleScorer(std::map<int, int> scores, int fallback) : scores_(std::move(scores)), fallback_(fallback) {}
    static ScheduleScorer from_json(const nlohmann::json& j);
    std::string name() const override { return "schedule"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::map<int, int> scores_;
    int fallback_;
};

class ConstantScorer final : public Backend {
public:
    explicit ConstantScorer(int score) : score_(score) {}
    std::string name() const override { return "constant"; }
    std::string invoke(const StageRequest& request) override;

private:
    int score_;
};

/// Observer lists by turn. Missing turns repeat the current lists when
/// carry_forward is set. An entry may pin the diff it expects by hash.
class TableObserver final : public Backend {
public:
    struct Entry {
        ObserverOutput lists;
        std::optional<std::string> diff_hash;
    };
    TableObserver(std::map<int, Entry> entries, bool carry_forward)
        : entries_(std::move(entries)), carry_forward_(carry_forward) {}
    static TableObserver from_json(const nlohmann::json& j);
    std::string name() const override { return "table_observer"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::map<int, Entry> entries_;
    bool carry_forward_;
};

/// Honest KeyQuest observer: states only what the diff and the last action
/// show. A statement is a guess when first seen and figured out when seen again.
class DiffReaderObserver final : public Backend {
public:
    std::string name() const override { return "diff_reader"; }
    std::string invoke(const StageRequest& request) override;

    /// Statements supported by one transition.
    static std::vector<std::string> claims_for(const FrameDiff& diff, const std::optional<ActionCommand>& action);
};

/// Plays a fixed action list (by turn, cycling when `cycle` is set). The
/// decision type is GUESS when there are more guesses than figured-outs.
class TableActor final : public Backend {
public:
    TableActor(std::vector<ActionCommand> actions, bool cycle) : actions_(std::move(actions)), cycle_(cycle) {}
    static TableActor from_json(const nlohmann::json& j);
    std::string name() const override { return "table_actor"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::vector<ActionCommand> actions_;
    bool cycle_;
};

/// Fixed action per observed frame (keyed by SHA-256 of the frame text), so
/// repeated runs replay identically.
class FramePolicyActor final : public Backend {
public:
    FramePolicyActor(std::map<std::string, ActionCommand> policy, ActionCommand fallback)
        : policy_(std::move(policy)), fallback_(fallback) {}
    static FramePolicyActor from_json(const nlohmann::json& j);
    static std::string frame_key(const Observation& obs);
    std::string name() const override { return "frame_policy"; }
    std::string invoke(const StageRequest& request) override;

private:
    std::map<std::string, ActionCommand> policy_;
    ActionCommand fallback_;
};

DecisionType exploration_decision(const EpistemicState* state);

/// Reads a JSON fixture, with errors naming the file.
nlohmann::json load_fixture(const std::filesystem::path& path);

}  // namespace sensi
