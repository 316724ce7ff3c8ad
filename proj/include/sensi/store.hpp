#pragma once

#include "sensi/actions.hpp"
#include "sensi/frames.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sensi {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kDefaultThreshold = 8;

/// Milliseconds since the UNIX epoch (UTC).
using Clock = std::function<std::int64_t()>;
Clock system_clock();
/// Starts at `start` and advances 1 ms per reading; makes scripted runs byte-reproducible.
Clock logical_clock(std::int64_t start = 0);

enum class ItemState { NotReached, Learning, Completed, Fact };
std::string_view to_string(ItemState state);
std::optional<ItemState> parse_item_state(std::string_view text);

struct LearningItem {
    std::int64_t item_id = 0;
    std::string game_id;
    std::string card_id;
    std::string item_name;
    ItemState state = ItemState::NotReached;
    int threshold = kDefaultThreshold;
    std::optional<std::string> metric;
    std::optional<int> queue_position;  // absent for fact rows
    std::optional<std::int64_t> source_item_id;  // set on facts promoted at an item's completion
    std::int64_t created_at = 0;
    std::optional<std::int64_t> completed_at;
    std::optional<int> completed_turn;

    bool operator==(const LearningItem&) const = default;
};

enum class HypothesisKind { Guess, FiguredOut };

struct HypothesisEntry {
    std::int64_t entry_id = 0;
    int turn_index = 0;
    HypothesisKind kind = HypothesisKind::Guess;
    std::string text;
    std::optional<std::int64_t> source_item_id;  // set when promoted to a fact
    bool active = true;
};

enum class DecisionType { Guess, Informed };
std::string_view to_string(DecisionType d);
std::optional<DecisionType> parse_decision_type(std::string_view text);

struct SenseEvaluation {
    int score = 1;
    std::string reasoning;
    bool operator==(const SenseEvaluation&) const = default;
};

struct TurnRecord {
    int turn_index = 0;
    std::string frame_json;  // the observation acted upon
    ActionCommand action;
    std::optional<DecisionType> decision_type;
    std::string diff_text;
    int score = 0;  // after the action
    GameStatus status = GameStatus::NotFinished;  // after the action
    std::optional<int> sense_score;
    std::optional<std::string> sense_reasoning;
    std::optional<std::int64_t> active_item_id;
    std::string observer_prompt_hash;
    std::string actor_prompt_hash;
    std::vector<std::string> stages;  // pipeline steps in execution order
    std::int64_t created_at = 0;
};

nlohmann::json to_json(const TurnRecord& record);

struct LosingSequence {
    std::int64_t sequence_id = 0;
    std::vector<ActionCommand> actions;
    int terminal_turn_index = 0;
};

/// Facts, guesses, figured-outs, active item (with its metric) and the latest sense evaluation.
struct EpistemicState {
    int turn_index = 0;
    std::vector<std::string> facts;
    std::vector<std::string> guesses;
    std::vector<std::string> figured_out;
    std::optional<LearningItem> active_item;
    std::optional<SenseEvaluation> last_sense;

    bool operator==(const EpistemicState&) const = default;
};

nlohmann::json to_json(const EpistemicState& state);

namespace edit {
struct InsertFact {
    std::string text;
};
struct DeleteItem {
    std::int64_t item_id = 0;
};
/// The listed items swap among the queue positions they already hold, in list order.
struct ReorderItems {
    std::vector<std::int64_t> item_ids;
};
struct SetThreshold {
    std::int64_t item_id = 0;
    int threshold = kDefaultThreshold;
};
/// Appends unless `position` is given, in which case later items shift down.
struct InsertItem {
    std::string item_name;
    std::optional<int> position;
    std::optional<int> threshold;
    std::optional<std::string> metric;
};
}  // namespace edit

using ExternalEdit =
    std::variant<edit::InsertFact, edit::DeleteItem, edit::ReorderItems, edit::SetThreshold, edit::InsertItem>;

std::string edit_kind(const ExternalEdit& e);
nlohmann::json to_json(const ExternalEdit& e);
/// Throws ValidationError for unknown kinds or missing fields.
ExternalEdit edit_from_json(const nlohmann::json& j);

struct EditReceipt {
    std::int64_t audit_id = 0;
    std::string kind;
    std::int64_t applied_at = 0;
    std::optional<std::int64_t> item_id;
    bool changed = true;  // false when an idempotent insert found an existing row
};

struct AuditEntry {
    std::int64_t audit_id = 0;
    std::int64_t created_at = 0;
    std::string kind;
    std::string payload;
};

/// The six-table control plane (plus schema_version and audit_log) in one
/// SQLite file. A handle serializes its own use, so it may be shared between
/// threads; readers that must not wait on the writer open their own handle.
class Store {
public:
    static Store open(const std::filesystem::path& path, Clock clock = system_clock());
    static Store open_readonly(const std::filesystem::path& path);

    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;
    ~Store();

    /// Creates tables and inserts seed facts and curriculum items idempotently.
    void init(const std::string& game_id, const std::string& card_id, const std::vector<std::string>& curriculum,
              const std::vector<std::string>& seed_facts);

    /// Binds an existing store to the (game, card) pair it was initialized with.
    void bind(const std::string& game_id, const std::string& card_id);

    const std::string& game_id() const;
    const std::string& card_id() const;
    const std::filesystem::path& path() const;
    std::int64_t now() const;

    // Reads.
    std::vector<LearningItem> items() const;  // every row, facts included, by item_id
    std::vector<LearningItem> queue() const;  // non-fact rows by queue position
    std::optional<LearningItem> item(std::int64_t item_id) const;
    std::vector<std::string> facts() const;
    std::vector<HypothesisEntry> hypotheses(HypothesisKind kind, bool active_only) const;
    EpistemicState snapshot(int turn_index) const;
    std::vector<TurnRecord> turns(int since = 0) const;  // turn_index > since
    std::optional<TurnRecord> turn(int turn_index) const;
    int last_turn_index() const;
    std::vector<LosingSequence> losing_sequences() const;
    std::vector<AuditEntry> audit_log() const;
    std::vector<std::pair<std::string, std::string>> inputs(int turn_index) const;

    // Writes.
    void record_turn(const TurnRecord& record);
    /// Replacement semantics: previous active entries of both kinds become inactive.
    void append_hypotheses(int turn_index, const std::vector<std::string>& guesses,
                           const std::vector<std::string>& figured_out);
    std::int64_t log_losing_sequence(const std::vector<ActionCommand>& actions, int terminal_turn_index);
    void set_input(int turn_index, const std::string& key, const std::string& value);
    EditReceipt apply_external_edit(const ExternalEdit& e);

    // Curriculum primitives (driven by the curriculum module).
    void set_item_state(std::int64_t item_id, ItemState state);
    void store_metric(std::int64_t item_id, const std::string& metric);
    void mark_completed(std::int64_t item_id, int turn_index);
    /// Turns every active figured-out entry into a fact row; returns how many entries were promoted.
    int promote_figured_outs(std::int64_t completed_item_id, int turn_index);
    void append_audit(const std::string& kind, const nlohmann::json& payload);

    /// RAII transaction; rolls back unless committed. Holds the handle's lock.
    class Transaction {
    public:
        explicit Transaction(Store& store);
        Transaction(const Transaction&) = delete;
        Transaction& operator=(const Transaction&) = delete;
        ~Transaction();
        void commit();

    private:
        Store& store_;
        bool done_ = false;
    };

    /// Deterministic text dump of every table, used for reproducibility checks.
    std::string dump() const;
    /// Rows of one table as JSON objects (for `inspect`).
    nlohmann::json table_json(const std::string& table) const;
    static const std::vector<std::string>& table_names();
    /// items_to_learn (curriculum rows) and facts, both views over knowledge_items.
    static const std::vector<std::string>& view_names();
    static std::string_view ddl();

    /// Copies the database file (after a checkpoint) to `target`.
    void copy_to(const std::filesystem::path& target) const;

private:
    struct Impl;
    explicit Store(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

}  // namespace sensi
