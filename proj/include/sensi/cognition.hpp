#pragma once

#include "sensi/frame_diff.hpp"
#include "sensi/prompt.hpp"
#include "sensi/store.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sensi {

inline constexpr int kRepairRetries = 2;

/// Everything a backend may look at for one invocation. Scripted backends use
/// the typed fields; remote backends only send the prompt.
struct StageRequest {
    Stage stage = Stage::Observer;
    const PromptBundle* prompt = nullptr;
    int turn_index = 0;
    int attempt = 0;
    std::string repair_hint;  // parse error of the previous attempt

    const Observation* previous = nullptr;
    const Observation* current = nullptr;
    const FrameDiff* diff = nullptr;
    const EpistemicState* state = nullptr;
    std::optional<ActionCommand> last_action;
    std::string item_name;
    std::string metric;
    std::vector<std::string> facts;
    std::vector<std::string> figured_out;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    /// Returns the raw reply text. Transport failures throw; malformed replies are the caller's problem.
    virtual std::string invoke(const StageRequest& request) = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

struct ObserverOutput {
    std::vector<std::string> guesses;
    std::vector<std::string> figured_out;
    bool operator==(const ObserverOutput&) const = default;
};

struct ActorOutput {
    DecisionType decision_type = DecisionType::Guess;
    ActionCommand action;
    bool operator==(const ActorOutput&) const = default;
};

/// Drops blanks and duplicates (first occurrence wins); an entry in both lists stays in figured_out only.
ObserverOutput normalize(ObserverOutput out);

/// Finds the JSON object in a reply that may wrap it in prose or code fences.
nlohmann::json extract_json(std::string_view reply);

// Reply parsers. Each throws ParseError or ValidationError.
FrameDiff parse_frame_diff_reply(std::string_view reply);
std::string parse_metric_reply(std::string_view reply);
SenseEvaluation parse_sense_reply(std::string_view reply);
ObserverOutput parse_observer_reply(std::string_view reply);
ActorOutput parse_actor_reply(std::string_view reply, std::optional<int> width = std::nullopt,
                              std::optional<int> height = std::nullopt);

/// Called after every backend invocation (for tracing and stage accounting).
struct StageObserver {
    virtual ~StageObserver() = default;
    virtual void on_invoke(const StageRequest& request, const std::string& reply, const std::string& error) = 0;
};

// Stage runners: invoke, parse, and retry up to kRepairRetries times with the
// parse error appended; then throw StageError carrying the last raw reply.
FrameDiff stage_frame_diff(Backend& backend, StageRequest request, StageObserver* observer = nullptr);
std::string stage_metric_gen(Backend& backend, StageRequest request, StageObserver* observer = nullptr);
SenseEvaluation stage_sense_score(Backend& backend, StageRequest request, StageObserver* observer = nullptr);
ObserverOutput stage_observer(Backend& backend, StageRequest request, StageObserver* observer = nullptr);
ActorOutput stage_actor(Backend& backend, StageRequest request, StageObserver* observer = nullptr);

/// Returns the item's stored metric, or generates and stores one. The second
/// member tells whether the backend ran.
std::pair<std::string, bool> ensure_metric(Store& store, std::int64_t item_id, Backend& backend,
                                           StageRequest request, StageObserver* observer = nullptr);

}  // namespace sensi
