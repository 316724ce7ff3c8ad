#include "sensi/store.hpp"

#include "sensi/errors.hpp"
#include "sensi/schema_sql.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <sstream>

namespace sensi {

using nlohmann::json;

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

Clock logical_clock(std::int64_t start) {
    auto counter = std::make_shared<std::atomic<std::int64_t>>(start);
    return [counter] { return counter->fetch_add(1); };
}

std::string_view to_string(ItemState state) {
    switch (state) {
    case ItemState::NotReached: return "not_reached";
    case ItemState::Learning: return "learning";
    case ItemState::Completed: return "completed";
    case ItemState::Fact: return "fact";
    }
    return "not_reached";
}

std::optional<ItemState> parse_item_state(std::string_view text) {
    for (auto s : {ItemState::NotReached, ItemState::Learning, ItemState::Completed, ItemState::Fact})
        if (to_string(s) == text) return s;
    return std::nullopt;
}

std::string_view to_string(DecisionType d) { return d == DecisionType::Guess ? "GUESS" : "INFORMED"; }

std::optional<DecisionType> parse_decision_type(std::string_view text) {
    if (text == "GUESS") return DecisionType::Guess;
    if (text == "INFORMED") return DecisionType::Informed;
    return std::nullopt;
}

json to_json(const TurnRecord& r) {
    json j = {{"turn_index", r.turn_index},
              {"frame", json::parse(r.frame_json)},
              {"action", to_json(r.action)},
              {"decision_type", r.decision_type ? json(to_string(*r.decision_type)) : json(nullptr)},
              {"diff", r.diff_text},
              {"score", r.score},
              {"status", to_string(r.status)},
              {"sense_score", r.sense_score ? json(*r.sense_score) : json(nullptr)},
              {"sense_reasoning", r.sense_reasoning ? json(*r.sense_reasoning) : json(nullptr)},
              {"active_item_id", r.active_item_id ? json(*r.active_item_id) : json(nullptr)},
              {"observer_prompt_hash", r.observer_prompt_hash},
              {"actor_prompt_hash", r.actor_prompt_hash},
              {"stages", r.stages},
              {"created_at", r.created_at}};
    return j;
}

namespace {

json item_to_json(const LearningItem& it) {
    return {{"item_id", it.item_id},
            {"item_name", it.item_name},
            {"state", to_string(it.state)},
            {"threshold", it.threshold},
            {"metric", it.metric ? json(*it.metric) : json(nullptr)},
            {"queue_position", it.queue_position ? json(*it.queue_position) : json(nullptr)}};
}

}  // namespace

json to_json(const EpistemicState& s) {
    json j = {{"turn_index", s.turn_index}, {"facts", s.facts}, {"guesses", s.guesses}, {"figured_out", s.figured_out}};
    j["active_item"] = s.active_item ? item_to_json(*s.active_item) : json(nullptr);
    j["last_sense"] = s.last_sense ? json{{"score", s.last_sense->score}, {"reasoning", s.last_sense->reasoning}}
                                   : json(nullptr);
    return j;
}

// ---- external edits ------------------------------------------------------

std::string edit_kind(const ExternalEdit& e) {
    struct {
        std::string operator()(const edit::InsertFact&) const { return "insert_fact"; }
        std::string operator()(const edit::DeleteItem&) const { return "delete_item"; }
        std::string operator()(const edit::ReorderItems&) const { return "reorder_items"; }
        std::string operator()(const edit::SetThreshold&) const { return "set_threshold"; }
        std::string operator()(const edit::InsertItem&) const { return "insert_item"; }
    } v;
    return std::visit(v, e);
}

json to_json(const ExternalEdit& e) {
    json j = {{"kind", edit_kind(e)}};
    if (auto* f = std::get_if<edit::InsertFact>(&e)) j["text"] = f->text;
    if (auto* d = std::get_if<edit::DeleteItem>(&e)) j["item_id"] = d->item_id;
    if (auto* r = std::get_if<edit::ReorderItems>(&e)) j["item_ids"] = r->item_ids;
    if (auto* t = std::get_if<edit::SetThreshold>(&e)) {
        j["item_id"] = t->item_id;
        j["threshold"] = t->threshold;
    }
    if (auto* i = std::get_if<edit::InsertItem>(&e)) {
        j["item_name"] = i->item_name;
        if (i->position) j["position"] = *i->position;
        if (i->threshold) j["threshold"] = *i->threshold;
        if (i->metric) j["metric"] = *i->metric;
    }
    return j;
}

namespace {

template <typename T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) throw ValidationError(std::string("edit is missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("edit field '") + name + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> opt_field(const json& j, const char* name) {
    if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
    return field<T>(j, name);
}

}  // namespace

ExternalEdit edit_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("edit must be a JSON object");
    auto kind = field<std::string>(j, "kind");
    if (kind == "insert_fact") return edit::InsertFact{field<std::string>(j, "text")};
    if (kind == "delete_item") return edit::DeleteItem{field<std::int64_t>(j, "item_id")};
    if (kind == "reorder_items") return edit::ReorderItems{field<std::vector<std::int64_t>>(j, "item_ids")};
    if (kind == "set_threshold")
        return edit::SetThreshold{field<std::int64_t>(j, "item_id"), field<int>(j, "threshold")};
    if (kind == "insert_item")
        return edit::InsertItem{field<std::string>(j, "item_name"), opt_field<int>(j, "position"),
                                opt_field<int>(j, "threshold"), opt_field<std::string>(j, "metric")};
    throw ValidationError("unknown edit kind '" + kind + "'");
}

// ---- sqlite plumbing -----------------------------------------------------

namespace {

class Stmt {
public:
    Stmt(sqlite3* db, std::string_view sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK)
            throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db) + " in: " + std::string(sql));
    }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;
    ~Stmt() { sqlite3_finalize(stmt_); }

    Stmt& bind(int i, std::int64_t v) {
        check(sqlite3_bind_int64(stmt_, i, v));
        return *this;
    }
    Stmt& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
    Stmt& bind(int i, const std::string& v) {
        check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Stmt& bind(int i, const char* v) { return bind(i, std::string(v)); }
    Stmt& bind(int i, std::string_view v) { return bind(i, std::string(v)); }
    Stmt& bind_null(int i) {
        check(sqlite3_bind_null(stmt_, i));
        return *this;
    }
    template <typename T>
    Stmt& bind(int i, const std::optional<T>& v) {
        return v ? bind(i, *v) : bind_null(i);
    }

    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw StoreError(std::string("sqlite: ") + sqlite3_errmsg(db_));
    }
    void run() {
        while (step()) {
        }
    }
    void reset() {
        sqlite3_reset(stmt_);
        sqlite3_clear_bindings(stmt_);
    }

    int columns() const { return sqlite3_column_count(stmt_); }
    std::string name(int c) const { return sqlite3_column_name(stmt_, c); }
    bool null(int c) const { return sqlite3_column_type(stmt_, c) == SQLITE_NULL; }
    std::int64_t i64(int c) const { return sqlite3_column_int64(stmt_, c); }
    int i32(int c) const { return sqlite3_column_int(stmt_, c); }
    std::string text(int c) const {
        auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, c));
        return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, c))) : std::string();
    }
    std::optional<std::int64_t> opt_i64(int c) const { return null(c) ? std::nullopt : std::optional(i64(c)); }
    std::optional<int> opt_i32(int c) const { return null(c) ? std::nullopt : std::optional(i32(c)); }
    std::optional<std::string> opt_text(int c) const { return null(c) ? std::nullopt : std::optional(text(c)); }

    json value(int c) const {
        switch (sqlite3_column_type(stmt_, c)) {
        case SQLITE_NULL: return nullptr;
        case SQLITE_INTEGER: return i64(c);
        case SQLITE_FLOAT: return sqlite3_column_double(stmt_, c);
        default: return text(c);
        }
    }

private:
    void check(int rc) {
        if (rc != SQLITE_OK) throw StoreError(std::string("bind failed: ") + sqlite3_errmsg(db_));
    }

    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw StoreError("sqlite: " + msg);
    }
}

constexpr const char* kItemColumns =
    "item_id, game_id, card_id, item_name, state, threshold, metric, queue_position, source_item_id, created_at, "
    "completed_at, completed_turn";

LearningItem read_item(const Stmt& s) {
    LearningItem it;
    it.item_id = s.i64(0);
    it.game_id = s.text(1);
    it.card_id = s.text(2);
    it.item_name = s.text(3);
    auto state = parse_item_state(s.text(4));
    if (!state) throw StoreError("corrupt item state '" + s.text(4) + "'");
    it.state = *state;
    it.threshold = s.i32(5);
    it.metric = s.opt_text(6);
    it.queue_position = s.opt_i32(7);
    it.source_item_id = s.opt_i64(8);
    it.created_at = s.i64(9);
    it.completed_at = s.opt_i64(10);
    it.completed_turn = s.opt_i32(11);
    return it;
}

constexpr const char* kTurnColumns =
    "turn_index, frame, action_id, coord_x, coord_y, decision_type, diff_text, score, status, sense_score, "
    "sense_reasoning, active_item_id, observer_prompt_hash, actor_prompt_hash, stages, created_at";

TurnRecord read_turn(const Stmt& s) {
    TurnRecord r;
    r.turn_index = s.i32(0);
    r.frame_json = s.text(1);
    auto id = parse_action_id(s.text(2));
    if (!id) throw StoreError("corrupt action id '" + s.text(2) + "'");
    r.action.id = *id;
    if (!s.null(3)) r.action.coords = Coords{s.i32(3), s.i32(4)};
    if (!s.null(5)) r.decision_type = parse_decision_type(s.text(5));
    r.diff_text = s.text(6);
    r.score = s.i32(7);
    auto status = parse_game_status(s.text(8));
    if (!status) throw StoreError("corrupt status '" + s.text(8) + "'");
    r.status = *status;
    r.sense_score = s.opt_i32(9);
    r.sense_reasoning = s.opt_text(10);
    r.active_item_id = s.opt_i64(11);
    r.observer_prompt_hash = s.text(12);
    r.actor_prompt_hash = s.text(13);
    r.stages = json::parse(s.text(14)).get<std::vector<std::string>>();
    r.created_at = s.i64(15);
    return r;
}

const char* hypothesis_table(HypothesisKind kind) {
    return kind == HypothesisKind::Guess ? "guesses" : "figured_outs";
}

}  // namespace

struct Store::Impl {
    sqlite3* db = nullptr;
    std::filesystem::path path;
    Clock clock;
    std::string game_id;
    std::string card_id;
    bool readonly = false;
    mutable std::recursive_mutex mu;
    int tx_depth = 0;

    ~Impl() {
        if (db) sqlite3_close_v2(db);
    }

    void require_bound() const {
        if (game_id.empty()) throw StoreError("store is not bound to a game; call init() or bind()");
    }
    void require_writable() const {
        if (readonly) throw StoreError("store was opened read-only");
    }

    std::optional<LearningItem> find_item(std::int64_t id) const {
        Stmt s(db, std::string("SELECT ") + kItemColumns + " FROM knowledge_items WHERE item_id = ?");
        s.bind(1, id);
        if (!s.step()) return std::nullopt;
        return read_item(s);
    }

    LearningItem require_item(std::int64_t id) const {
        auto it = find_item(id);
        if (!it) throw NotFoundError("item " + std::to_string(id) + " not found");
        return *it;
    }

    std::optional<std::int64_t> item_id_by_name(const std::string& name) const {
        Stmt s(db, "SELECT item_id FROM knowledge_items WHERE game_id = ? AND card_id = ? AND item_name = ?");
        s.bind(1, game_id).bind(2, card_id).bind(3, name);
        if (!s.step()) return std::nullopt;
        return s.i64(0);
    }

    int next_queue_position() const {
        Stmt s(db, "SELECT COALESCE(MAX(queue_position), 0) + 1 FROM knowledge_items WHERE game_id = ? AND card_id = ?");
        s.bind(1, game_id).bind(2, card_id);
        s.step();
        return s.i32(0);
    }

    // Returns (item_id, inserted).
    std::pair<std::int64_t, bool> insert_fact(const std::string& text, std::optional<std::int64_t> source) {
        if (auto existing = item_id_by_name(text)) return {*existing, false};
        Stmt s(db,
               "INSERT INTO knowledge_items (game_id, card_id, item_name, state, threshold, source_item_id, created_at) "
               "VALUES (?, ?, ?, 'fact', ?, ?, ?)");
        s.bind(1, game_id).bind(2, card_id).bind(3, text).bind(4, kDefaultThreshold).bind(5, source).bind(6, clock());
        s.run();
        return {sqlite3_last_insert_rowid(db), true};
    }

    std::pair<std::int64_t, bool> insert_item(const std::string& name, std::optional<int> position, int threshold,
                                              const std::optional<std::string>& metric) {
        if (auto existing = item_id_by_name(name)) return {*existing, false};
        int pos = next_queue_position();
        if (position && *position < pos) {
            pos = std::max(1, *position);
            // Two-phase shift keeps the UNIQUE(queue_position) constraint satisfied throughout.
            Stmt a(db,
                   "UPDATE knowledge_items SET queue_position = -(queue_position + 1) "
                   "WHERE game_id = ? AND card_id = ? AND queue_position >= ?");
            a.bind(1, game_id).bind(2, card_id).bind(3, pos);
            a.run();
            Stmt b(db,
                   "UPDATE knowledge_items SET queue_position = -queue_position "
                   "WHERE game_id = ? AND card_id = ? AND queue_position < 0");
            b.bind(1, game_id).bind(2, card_id);
            b.run();
        }
        Stmt s(db,
               "INSERT INTO knowledge_items (game_id, card_id, item_name, state, threshold, metric, queue_position, "
               "created_at) VALUES (?, ?, ?, 'not_reached', ?, ?, ?, ?)");
        s.bind(1, game_id).bind(2, card_id).bind(3, name).bind(4, threshold).bind(5, metric).bind(6, pos).bind(7,
                                                                                                            clock());
        s.run();
        return {sqlite3_last_insert_rowid(db), true};
    }

    std::int64_t append_audit(const std::string& kind, const json& payload) {
        auto at = clock();
        Stmt s(db, "INSERT INTO audit_log (created_at, kind, payload) VALUES (?, ?, ?)");
        s.bind(1, at).bind(2, kind).bind(3, payload.dump());
        s.run();
        return sqlite3_last_insert_rowid(db);
    }
};

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

namespace {

sqlite3* open_db(const std::filesystem::path& path, int flags) {
    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(path.string().c_str(), &db, flags | SQLITE_OPEN_FULLMUTEX, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
        if (db) sqlite3_close_v2(db);
        throw StoreError("cannot open store " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db, 5000);
    sqlite3_extended_result_codes(db, 1);
    return db;
}

void auto_bind(sqlite3* db, std::string& game_id, std::string& card_id) {
    Stmt t(db, "SELECT COUNT(*) FROM sqlite_master WHERE type = 'table' AND name = 'knowledge_items'");
    t.step();
    if (t.i32(0) == 0) return;
    Stmt s(db, "SELECT DISTINCT game_id, card_id FROM knowledge_items LIMIT 2");
    std::vector<std::pair<std::string, std::string>> pairs;
    while (s.step()) pairs.emplace_back(s.text(0), s.text(1));
    if (pairs.size() == 1) {
        game_id = pairs[0].first;
        card_id = pairs[0].second;
    }
}

}  // namespace

Store Store::open(const std::filesystem::path& path, Clock clock) {
    auto impl = std::make_unique<Impl>();
    impl->path = path;
    impl->clock = clock ? std::move(clock) : system_clock();
    impl->db = open_db(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    exec(impl->db, "PRAGMA journal_mode = WAL");
    exec(impl->db, "PRAGMA synchronous = NORMAL");
    auto_bind(impl->db, impl->game_id, impl->card_id);
    return Store(std::move(impl));
}

Store Store::open_readonly(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw StoreError("store not found: " + path.string());
    auto impl = std::make_unique<Impl>();
    impl->path = path;
    impl->clock = system_clock();
    impl->readonly = true;
    impl->db = open_db(path, SQLITE_OPEN_READONLY);
    auto_bind(impl->db, impl->game_id, impl->card_id);
    return Store(std::move(impl));
}

std::string_view Store::ddl() { return detail::kSchemaSql; }

const std::vector<std::string>& Store::table_names() {
    static const std::vector<std::string> names = {"schema_version", "knowledge_items", "inputs",
                                                   "game",           "guesses",        "figured_outs",
                                                   "losing_action_seqs", "audit_log"};
    return names;
}

const std::vector<std::string>& Store::view_names() {
    static const std::vector<std::string> names = {"items_to_learn", "facts"};
    return names;
}

void Store::init(const std::string& game_id, const std::string& card_id, const std::vector<std::string>& curriculum,
                 const std::vector<std::string>& seed_facts) {
    if (game_id.empty() || card_id.empty()) throw ValidationError("game_id and card_id must be non-empty");
    impl_->require_writable();
    Transaction tx(*this);
    exec(impl_->db, detail::kSchemaSql);
    {
        Stmt s(impl_->db, "SELECT version FROM schema_version");
        if (s.step()) {
            if (s.i32(0) != kSchemaVersion)
                throw StoreError("schema version " + std::to_string(s.i32(0)) + " is not supported (expected " +
                                 std::to_string(kSchemaVersion) + ")");
        } else {
            Stmt ins(impl_->db, "INSERT INTO schema_version (version) VALUES (?)");
            ins.bind(1, kSchemaVersion).run();
        }
    }
    impl_->game_id = game_id;
    impl_->card_id = card_id;
    for (const auto& fact : seed_facts) {
        if (fact.empty()) throw ValidationError("seed facts must be non-empty");
        impl_->insert_fact(fact, std::nullopt);
    }
    for (const auto& name : curriculum) {
        if (name.empty()) throw ValidationError("curriculum item names must be non-empty");
        impl_->insert_item(name, std::nullopt, kDefaultThreshold, std::nullopt);
    }
    tx.commit();
}

void Store::bind(const std::string& game_id, const std::string& card_id) {
    std::lock_guard lock(impl_->mu);
    impl_->game_id = game_id;
    impl_->card_id = card_id;
}

const std::string& Store::game_id() const { return impl_->game_id; }
const std::string& Store::card_id() const { return impl_->card_id; }
const std::filesystem::path& Store::path() const { return impl_->path; }
std::int64_t Store::now() const { return impl_->clock(); }

// ---- transactions --------------------------------------------------------

Store::Transaction::Transaction(Store& store) : store_(store) {
    store_.impl_->mu.lock();
    if (store_.impl_->tx_depth++ == 0) {
        try {
            exec(store_.impl_->db, "BEGIN IMMEDIATE");
        } catch (...) {
            --store_.impl_->tx_depth;
            store_.impl_->mu.unlock();
            throw;
        }
    }
}

void Store::Transaction::commit() {
    if (done_) return;
    if (store_.impl_->tx_depth == 1) exec(store_.impl_->db, "COMMIT");
    done_ = true;
}

Store::Transaction::~Transaction() {
    auto& impl = *store_.impl_;
    if (!done_ && impl.tx_depth == 1) sqlite3_exec(impl.db, "ROLLBACK", nullptr, nullptr, nullptr);
    --impl.tx_depth;
    impl.mu.unlock();
}

// ---- reads ---------------------------------------------------------------

std::vector<LearningItem> Store::items() const {
    std::lock_guard lock(impl_->mu);
    impl_->require_bound();
    Stmt s(impl_->db, std::string("SELECT ") + kItemColumns +
                          " FROM knowledge_items WHERE game_id = ? AND card_id = ? ORDER BY item_id");
    s.bind(1, impl_->game_id).bind(2, impl_->card_id);
    std::vector<LearningItem> out;
    while (s.step()) out.push_back(read_item(s));
    return out;
}

std::vector<LearningItem> Store::queue() const {
    std::lock_guard lock(impl_->mu);
    impl_->require_bound();
    Stmt s(impl_->db, std::string("SELECT ") + kItemColumns +
                          " FROM knowledge_items WHERE game_id = ? AND card_id = ? AND state != 'fact' "
                          "ORDER BY queue_position, item_id");
    s.bind(1, impl_->game_id).bind(2, impl_->card_id);
    std::vector<LearningItem> out;
    while (s.step()) out.push_back(read_item(s));
    return out;
}

std::optional<LearningItem> Store::item(std::int64_t item_id) const {
    std::lock_guard lock(impl_->mu);
    return impl_->find_item(item_id);
}

std::vector<std::string> Store::facts() const {
    std::lock_guard lock(impl_->mu);
    impl_->require_bound();
    Stmt s(impl_->db,
           "SELECT item_name FROM knowledge_items WHERE game_id = ? AND card_id = ? AND state = 'fact' "
           "ORDER BY item_id");
    s.bind(1, impl_->game_id).bind(2, impl_->card_id);
    std::vector<std::string> out;
    while (s.step()) out.push_back(s.text(0));
    return out;
}

std::vector<HypothesisEntry> Store::hypotheses(HypothesisKind kind, bool active_only) const {
    std::lock_guard lock(impl_->mu);
    std::string sql = std::string("SELECT entry_id, turn_index, text, active, source_item_id FROM ") +
                      hypothesis_table(kind) + (active_only ? " WHERE active = 1" : "") + " ORDER BY entry_id";
    Stmt s(impl_->db, sql);
    std::vector<HypothesisEntry> out;
    while (s.step()) {
        HypothesisEntry e;
        e.entry_id = s.i64(0);
        e.turn_index = s.i32(1);
        e.kind = kind;
        e.text = s.text(2);
        e.active = s.i32(3) != 0;
        e.source_item_id = s.opt_i64(4);
        out.push_back(std::move(e));
    }
    return out;
}

EpistemicState Store::snapshot(int turn_index) const {
    std::lock_guard lock(impl_->mu);
    EpistemicState st;
    st.turn_index = turn_index;
    st.facts = facts();
    for (auto& e : hypotheses(HypothesisKind::Guess, true)) st.guesses.push_back(std::move(e.text));
    for (auto& e : hypotheses(HypothesisKind::FiguredOut, true)) st.figured_out.push_back(std::move(e.text));
    for (auto& it : queue()) {
        if (it.state == ItemState::Learning || it.state == ItemState::NotReached) {
            st.active_item = std::move(it);
            break;
        }
    }
    Stmt s(impl_->db,
           "SELECT sense_score, sense_reasoning FROM game WHERE sense_score IS NOT NULL "
           "ORDER BY turn_index DESC LIMIT 1");
    if (s.step()) st.last_sense = SenseEvaluation{s.i32(0), s.text(1)};
    return st;
}

std::vector<TurnRecord> Store::turns(int since) const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, std::string("SELECT ") + kTurnColumns + " FROM game WHERE turn_index > ? ORDER BY turn_index");
    s.bind(1, since);
    std::vector<TurnRecord> out;
    while (s.step()) out.push_back(read_turn(s));
    return out;
}

std::optional<TurnRecord> Store::turn(int turn_index) const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, std::string("SELECT ") + kTurnColumns + " FROM game WHERE turn_index = ?");
    s.bind(1, turn_index);
    if (!s.step()) return std::nullopt;
    return read_turn(s);
}

int Store::last_turn_index() const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "SELECT COALESCE(MAX(turn_index), 0) FROM game");
    s.step();
    return s.i32(0);
}

std::vector<LosingSequence> Store::losing_sequences() const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "SELECT sequence_id, actions, terminal_turn_index FROM losing_action_seqs ORDER BY sequence_id");
    std::vector<LosingSequence> out;
    while (s.step()) {
        LosingSequence seq;
        seq.sequence_id = s.i64(0);
        for (const auto& a : json::parse(s.text(1))) seq.actions.push_back(action_from_json(a));
        seq.terminal_turn_index = s.i32(2);
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<AuditEntry> Store::audit_log() const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "SELECT audit_id, created_at, kind, payload FROM audit_log ORDER BY audit_id");
    std::vector<AuditEntry> out;
    while (s.step()) out.push_back({s.i64(0), s.i64(1), s.text(2), s.text(3)});
    return out;
}

std::vector<std::pair<std::string, std::string>> Store::inputs(int turn_index) const {
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "SELECT key, value FROM inputs WHERE turn_index = ? ORDER BY key");
    s.bind(1, turn_index);
    std::vector<std::pair<std::string, std::string>> out;
    while (s.step()) out.emplace_back(s.text(0), s.text(1));
    return out;
}

// ---- writes --------------------------------------------------------------

void Store::record_turn(const TurnRecord& r) {
    impl_->require_writable();
    r.action.validate();
    if (!r.action.is_reset() && !r.decision_type)
        throw ValidationError("turn " + std::to_string(r.turn_index) + ": non-RESET turns need a decision type");
    if (r.sense_score && (*r.sense_score < 1 || *r.sense_score > 10))
        throw ValidationError("sense score " + std::to_string(*r.sense_score) + " outside [1, 10]");
    Transaction tx(*this);
    int expected = last_turn_index() + 1;
    if (r.turn_index != expected)
        throw StoreError("out-of-order turn index " + std::to_string(r.turn_index) + " (expected " +
                         std::to_string(expected) + ")");
    Stmt s(impl_->db, std::string("INSERT INTO game (") + kTurnColumns +
                          ") VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
    s.bind(1, r.turn_index).bind(2, r.frame_json).bind(3, to_string(r.action.id));
    if (r.action.coords)
        s.bind(4, r.action.coords->x).bind(5, r.action.coords->y);
    else
        s.bind_null(4).bind_null(5);
    if (r.decision_type)
        s.bind(6, to_string(*r.decision_type));
    else
        s.bind_null(6);
    s.bind(7, r.diff_text).bind(8, r.score).bind(9, to_string(r.status));
    s.bind(10, r.sense_score).bind(11, r.sense_reasoning).bind(12, r.active_item_id);
    s.bind(13, r.observer_prompt_hash).bind(14, r.actor_prompt_hash).bind(15, json(r.stages).dump());
    s.bind(16, r.created_at ? r.created_at : impl_->clock());
    s.run();
    tx.commit();
}

void Store::append_hypotheses(int turn_index, const std::vector<std::string>& guesses,
                              const std::vector<std::string>& figured_out) {
    impl_->require_writable();
    Transaction tx(*this);
    for (auto kind : {HypothesisKind::Guess, HypothesisKind::FiguredOut}) {
        const char* table = hypothesis_table(kind);
        exec(impl_->db, (std::string("UPDATE ") + table + " SET active = 0 WHERE active = 1").c_str());
        const auto& texts = kind == HypothesisKind::Guess ? guesses : figured_out;
        Stmt s(impl_->db, std::string("INSERT INTO ") + table + " (turn_index, text, active) VALUES (?, ?, 1)");
        for (const auto& t : texts) {
            s.bind(1, turn_index).bind(2, t);
            s.run();
            s.reset();
        }
    }
    tx.commit();
}

std::int64_t Store::log_losing_sequence(const std::vector<ActionCommand>& actions, int terminal_turn_index) {
    impl_->require_writable();
    Transaction tx(*this);
    auto t = turn(terminal_turn_index);
    if (!t) throw NotFoundError("turn " + std::to_string(terminal_turn_index) + " not found");
    if (t->status != GameStatus::GameOver)
        throw StoreError("turn " + std::to_string(terminal_turn_index) + " ended in " +
                         std::string(to_string(t->status)) + ", not GAME_OVER");
    json list = json::array();
    for (const auto& a : actions) list.push_back(to_json(a));
    Stmt s(impl_->db, "INSERT INTO losing_action_seqs (actions, terminal_turn_index) VALUES (?, ?)");
    s.bind(1, list.dump()).bind(2, terminal_turn_index);
    s.run();
    auto id = sqlite3_last_insert_rowid(impl_->db);
    tx.commit();
    return id;
}

void Store::set_input(int turn_index, const std::string& key, const std::string& value) {
    impl_->require_writable();
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "INSERT OR REPLACE INTO inputs (turn_index, key, value) VALUES (?, ?, ?)");
    s.bind(1, turn_index).bind(2, key).bind(3, value);
    s.run();
}

EditReceipt Store::apply_external_edit(const ExternalEdit& e) {
    impl_->require_writable();
    impl_->require_bound();
    Transaction tx(*this);
    auto& impl = *impl_;
    EditReceipt receipt;
    receipt.kind = edit_kind(e);

    if (auto* f = std::get_if<edit::InsertFact>(&e)) {
        if (f->text.empty()) throw ValidationError("fact text must be non-empty");
        auto [id, inserted] = impl.insert_fact(f->text, std::nullopt);
        receipt.item_id = id;
        receipt.changed = inserted;
    } else if (auto* d = std::get_if<edit::DeleteItem>(&e)) {
        impl.require_item(d->item_id);
        Stmt s(impl.db, "DELETE FROM knowledge_items WHERE item_id = ?");
        s.bind(1, d->item_id).run();
        receipt.item_id = d->item_id;
    } else if (auto* r = std::get_if<edit::ReorderItems>(&e)) {
        std::set<std::int64_t> seen;
        std::vector<int> positions;
        for (auto id : r->item_ids) {
            if (!seen.insert(id).second) throw ValidationError("reorder lists item " + std::to_string(id) + " twice");
            auto it = impl.require_item(id);
            if (!it.queue_position) throw ValidationError("item " + std::to_string(id) + " is a fact, not queued");
            positions.push_back(*it.queue_position);
        }
        std::sort(positions.begin(), positions.end());
        for (auto id : r->item_ids) {
            Stmt s(impl.db, "UPDATE knowledge_items SET queue_position = -queue_position WHERE item_id = ?");
            s.bind(1, id).run();
        }
        for (std::size_t i = 0; i < r->item_ids.size(); ++i) {
            Stmt s(impl.db, "UPDATE knowledge_items SET queue_position = ? WHERE item_id = ?");
            s.bind(1, positions[i]).bind(2, r->item_ids[i]).run();
        }
    } else if (auto* t = std::get_if<edit::SetThreshold>(&e)) {
        if (t->threshold < 1 || t->threshold > 10)
            throw ValidationError("threshold " + std::to_string(t->threshold) + " outside [1, 10]");
        impl.require_item(t->item_id);
        Stmt s(impl.db, "UPDATE knowledge_items SET threshold = ? WHERE item_id = ?");
        s.bind(1, t->threshold).bind(2, t->item_id).run();
        receipt.item_id = t->item_id;
    } else if (auto* i = std::get_if<edit::InsertItem>(&e)) {
        if (i->item_name.empty()) throw ValidationError("item name must be non-empty");
        int threshold = i->threshold.value_or(kDefaultThreshold);
        if (threshold < 1 || threshold > 10)
            throw ValidationError("threshold " + std::to_string(threshold) + " outside [1, 10]");
        if (i->position && *i->position < 1) throw ValidationError("queue positions start at 1");
        auto [id, inserted] = impl.insert_item(i->item_name, i->position, threshold, i->metric);
        receipt.item_id = id;
        receipt.changed = inserted;
    }

    json payload = to_json(e);
    payload["changed"] = receipt.changed;
    if (receipt.item_id) payload["item_id"] = *receipt.item_id;
    receipt.audit_id = impl.append_audit(receipt.kind, payload);
    Stmt s(impl.db, "SELECT created_at FROM audit_log WHERE audit_id = ?");
    s.bind(1, receipt.audit_id);
    s.step();
    receipt.applied_at = s.i64(0);
    tx.commit();
    return receipt;
}

void Store::set_item_state(std::int64_t item_id, ItemState state) {
    impl_->require_writable();
    std::lock_guard lock(impl_->mu);
    impl_->require_item(item_id);
    Stmt s(impl_->db, "UPDATE knowledge_items SET state = ? WHERE item_id = ?");
    s.bind(1, to_string(state)).bind(2, item_id).run();
}

void Store::store_metric(std::int64_t item_id, const std::string& metric) {
    impl_->require_writable();
    if (metric.empty()) throw ValidationError("metric must be non-empty");
    std::lock_guard lock(impl_->mu);
    impl_->require_item(item_id);
    Stmt s(impl_->db, "UPDATE knowledge_items SET metric = ? WHERE item_id = ?");
    s.bind(1, metric).bind(2, item_id).run();
}

void Store::mark_completed(std::int64_t item_id, int turn_index) {
    impl_->require_writable();
    std::lock_guard lock(impl_->mu);
    auto it = impl_->require_item(item_id);
    if (it.state != ItemState::Learning)
        throw StoreError("item " + std::to_string(item_id) + " is " + std::string(to_string(it.state)) +
                         ", not learning");
    Stmt s(impl_->db,
           "UPDATE knowledge_items SET state = 'completed', completed_at = ?, completed_turn = ? WHERE item_id = ?");
    s.bind(1, impl_->clock()).bind(2, turn_index).bind(3, item_id).run();
}

int Store::promote_figured_outs(std::int64_t completed_item_id, int turn_index) {
    impl_->require_writable();
    Transaction tx(*this);
    impl_->require_item(completed_item_id);
    auto entries = hypotheses(HypothesisKind::FiguredOut, true);
    json promoted = json::array();
    for (const auto& e : entries) {
        impl_->insert_fact(e.text, completed_item_id);
        Stmt s(impl_->db, "UPDATE figured_outs SET active = 0, source_item_id = ? WHERE entry_id = ?");
        s.bind(1, completed_item_id).bind(2, e.entry_id).run();
        promoted.push_back(e.text);
    }
    impl_->append_audit("promotion", {{"item_id", completed_item_id},
                                      {"turn_index", turn_index},
                                      {"figured_out_turn", turn_index - 1},
                                      {"facts", promoted}});
    tx.commit();
    return static_cast<int>(entries.size());
}

void Store::append_audit(const std::string& kind, const json& payload) {
    impl_->require_writable();
    std::lock_guard lock(impl_->mu);
    impl_->append_audit(kind, payload);
}

// ---- dumps ---------------------------------------------------------------

std::string Store::dump() const {
    std::lock_guard lock(impl_->mu);
    std::ostringstream out;
    for (const auto& table : table_names()) {
        out << "== " << table << "\n";
        Stmt s(impl_->db, "SELECT * FROM " + table + " ORDER BY rowid");
        while (s.step()) {
            json row = json::object();
            for (int c = 0; c < s.columns(); ++c) row[s.name(c)] = s.value(c);
            out << row.dump() << "\n";
        }
    }
    return out.str();
}

json Store::table_json(const std::string& table) const {
    const auto& names = table_names();
    const auto& views = view_names();
    const bool is_view = std::find(views.begin(), views.end(), table) != views.end();
    if (!is_view && std::find(names.begin(), names.end(), table) == names.end())
        throw ValidationError("unknown table '" + table + "'");
    std::lock_guard lock(impl_->mu);
    Stmt s(impl_->db, "SELECT * FROM " + table + (is_view ? " ORDER BY item_id" : " ORDER BY rowid"));
    json rows = json::array();
    while (s.step()) {
        json row = json::object();
        for (int c = 0; c < s.columns(); ++c) row[s.name(c)] = s.value(c);
        rows.push_back(std::move(row));
    }
    return rows;
}

void Store::copy_to(const std::filesystem::path& target) const {
    std::lock_guard lock(impl_->mu);
    sqlite3* dest = open_db(target, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    sqlite3_backup* backup = sqlite3_backup_init(dest, "main", impl_->db, "main");
    if (!backup) {
        std::string msg = sqlite3_errmsg(dest);
        sqlite3_close_v2(dest);
        throw StoreError("backup failed: " + msg);
    }
    sqlite3_backup_step(backup, -1);
    sqlite3_backup_finish(backup);
    int rc = sqlite3_errcode(dest);
    sqlite3_close_v2(dest);
    if (rc != SQLITE_OK) throw StoreError("backup to " + target.string() + " failed");
}

}  // namespace sensi
