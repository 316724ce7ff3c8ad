#include "sensi/orchestrator.hpp"

#include "sensi/chat_backend.hpp"
#include "sensi/codec.hpp"
#include "sensi/errors.hpp"
#include "sensi/keyquest.hpp"
#include "sensi/remote_env.hpp"
#include "sensi/scripted.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

namespace sensi {

using nlohmann::json;

std::string_view to_string(Mode mode) { return mode == Mode::V1 ? "v1" : "v2"; }

std::string_view to_string(StopCondition stop) {
    switch (stop) {
    case StopCondition::CurriculumDone: return "curriculum_done";
    case StopCondition::Win: return "win";
    case StopCondition::MaxTurns: return "max_turns";
    }
    return "max_turns";
}

const std::vector<std::string>& default_curriculum() {
    static const std::vector<std::string> items = {
        "figure out what every action does",
        "figure out how actions change the energy supply",
        "figure out how to win",
    };
    return items;
}

const std::vector<std::string>& default_seed_facts() {
    static const std::vector<std::string> facts = {
        "RESET begins a game",
        "the actions are ACTION1 to ACTION7 and RESET",
    };
    return facts;
}

// ---- configuration -------------------------------------------------------

namespace {

const std::set<std::string> kConfigKeys = {"mode",  "environment", "backends",   "corruption", "max_turns",
                                           "threshold", "history_window", "stop", "card_id", "curriculum",
                                           "seed_facts", "clock_start", "attach_images"};
const std::set<std::string> kStageKeys = {"frame_diff", "metric_gen", "sense_score", "observer", "actor"};

template <typename T>
T get(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

json inline_fixture(json spec, const std::filesystem::path& base_dir, const char* what) {
    if (spec.is_object() && spec.contains("file")) {
        std::filesystem::path p = spec["file"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        spec["data"] = load_fixture(p);
        spec.erase("file");
    } else if (spec.is_object() && spec.contains("data") && !spec["data"].is_object()) {
        throw ConfigError(std::string(what) + ": 'data' must be an object");
    }
    return spec;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kConfigKeys.count(k)) throw ConfigError("unknown config field '" + k + "'");
    RunConfig c;
    c.base_dir = base_dir;
    auto mode = get<std::string>(j, "mode", "v2");
    if (mode == "v1")
        c.mode = Mode::V1;
    else if (mode != "v2")
        throw ConfigError("mode must be v1 or v2, got '" + mode + "'");
    if (j.contains("environment")) c.environment = j["environment"];
    if (!c.environment.is_object() || !c.environment.contains("kind"))
        throw ConfigError("environment needs a 'kind' (keyquest or remote)");
    if (j.contains("backends")) {
        c.backends = j["backends"];
        if (!c.backends.is_object()) throw ConfigError("backends must be an object keyed by stage");
        for (const auto& [k, v] : c.backends.items())
            if (!kStageKeys.count(k)) throw ConfigError("unknown stage '" + k + "' in backends");
    }
    if (j.contains("corruption") && !j["corruption"].is_null()) c.corruption = j["corruption"];
    c.max_turns = get<int>(j, "max_turns", kDefaultMaxTurns);
    if (c.max_turns < 1) throw ConfigError("max_turns must be >= 1");
    if (j.contains("threshold") && !j["threshold"].is_null()) {
        c.threshold = get<int>(j, "threshold", kDefaultThreshold);
        if (*c.threshold < 1 || *c.threshold > 10) throw ConfigError("threshold must be within [1, 10]");
    }
    c.history_window = get<int>(j, "history_window", 10);
    if (c.history_window < 0) throw ConfigError("history_window must be >= 0");
    auto stop = get<std::string>(j, "stop", c.mode == Mode::V1 ? "win" : "curriculum_done");
    if (stop == "curriculum_done")
        c.stop = StopCondition::CurriculumDone;
    else if (stop == "win")
        c.stop = StopCondition::Win;
    else if (stop == "max_turns")
        c.stop = StopCondition::MaxTurns;
    else
        throw ConfigError("stop must be curriculum_done, win or max_turns");
    if (c.mode == Mode::V1 && c.stop == StopCondition::CurriculumDone)
        throw ConfigError("v1 runs have no curriculum; stop on win or max_turns");
    c.card_id = get<std::string>(j, "card_id", c.card_id);
    c.curriculum = get<std::vector<std::string>>(j, "curriculum", c.curriculum);
    c.seed_facts = get<std::vector<std::string>>(j, "seed_facts", c.seed_facts);
    if (j.contains("clock_start") && !j["clock_start"].is_null())
        c.clock_start = get<std::int64_t>(j, "clock_start", 0);
    c.attach_images = get<bool>(j, "attach_images", false);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

json RunConfig::to_json() const {
    json j = {{"mode", sensi::to_string(mode)},
              {"environment", environment},
              {"backends", backends},
              {"max_turns", max_turns},
              {"history_window", history_window},
              {"stop", sensi::to_string(stop)},
              {"card_id", card_id},
              {"curriculum", curriculum},
              {"seed_facts", seed_facts},
              {"attach_images", attach_images}};
    if (corruption) j["corruption"] = *corruption;
    if (threshold) j["threshold"] = *threshold;
    if (clock_start) j["clock_start"] = *clock_start;
    return j;
}

RunConfig RunConfig::resolved() const {
    RunConfig c = *this;
    for (auto& [stage, spec] : c.backends.items()) spec = inline_fixture(spec, base_dir, stage.c_str());
    if (c.environment.contains("config") && c.environment["config"].is_string()) {
        std::filesystem::path p = c.environment["config"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        c.environment["config"] = load_fixture(p);
    }
    return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

bool RunConfig::scripted() const {
    if (environment.value("kind", "") == "remote") return false;
    for (const auto& [stage, spec] : backends.items())
        if (spec.value("kind", "") == "remote") return false;
    return true;
}

// ---- construction --------------------------------------------------------

std::unique_ptr<Environment> make_environment(const RunConfig& config) {
    auto kind = config.environment.value("kind", "");
    if (kind == "keyquest") {
        auto game = keyquest::GameConfig::reference();
        if (config.environment.contains("config")) {
            const auto& gc = config.environment["config"];
            if (gc.is_string()) {
                std::filesystem::path p = gc.get<std::string>();
                game = keyquest::GameConfig::load(p.is_relative() ? config.base_dir / p : p);
            } else {
                game = keyquest::GameConfig::from_json(gc);
            }
        }
        return std::make_unique<keyquest::KeyQuestEnv>(std::move(game));
    }
    if (kind == "remote") return std::make_unique<RemoteEnv>(RemoteEnvConfig::from_json(config.environment));
    throw ConfigError("unknown environment kind '" + kind + "'");
}

namespace {

json fixture_data(const json& spec, const std::filesystem::path& base_dir, const char* stage) {
    auto resolved = inline_fixture(spec, base_dir, stage);
    if (!resolved.contains("data")) throw ConfigError(std::string(stage) + " backend needs 'file' or 'data'");
    return resolved["data"];
}

BackendPtr make_backend(Stage stage, const json& spec, const RunConfig& config, const Environment& env,
                        const std::optional<std::filesystem::path>& trace_dir) {
    auto kind = spec.value("kind", "");
    const char* name = to_string(stage).data();
    if (kind == "remote") {
        auto chat = ChatConfig::from_json(spec);
        if (trace_dir) chat.trace_dir = *trace_dir / "remote";
        return std::make_shared<ChatBackend>(std::move(chat));
    }
    try {
        switch (stage) {
        case Stage::FrameDiff:
            if (kind == "programmatic") return std::make_shared<ProgrammaticDiffer>(env.hud_regions());
            if (kind == "scripted")
                return std::make_shared<ScriptedDiffer>(ScriptedDiffer::from_json(fixture_data(spec, config.base_dir, name)));
            break;
        case Stage::MetricGen:
            if (kind == "scripted") {
                json data = spec.contains("file") || spec.contains("data") ? fixture_data(spec, config.base_dir, name)
                                                                         : json::object();
                return std::make_shared<ScriptedMetricGen>(ScriptedMetricGen::from_json(data));
            }
            break;
        case Stage::SenseScore:
            if (kind == "monotone") return std::make_shared<MonotoneScorer>(spec.value("base", 2));
            if (kind == "constant") return std::make_shared<ConstantScorer>(spec.value("score", 1));
            if (kind == "schedule")
                return std::make_shared<ScheduleScorer>(ScheduleScorer::from_json(fixture_data(spec, config.base_dir, name)));
            break;
        case Stage::Observer:
            if (kind == "diff_reader") return std::make_shared<DiffReaderObserver>();
            if (kind == "table")
                return std::make_shared<TableObserver>(TableObserver::from_json(fixture_data(spec, config.base_dir, name)));
            break;
        case Stage::Actor:
            if (kind == "table")
                return std::make_shared<TableActor>(TableActor::from_json(fixture_data(spec, config.base_dir, name)));
            if (kind == "frame_policy")
                return std::make_shared<FramePolicyActor>(
                    FramePolicyActor::from_json(fixture_data(spec, config.base_dir, name)));
            break;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string(name) + " fixture is malformed: " + e.what());
    }
    throw ConfigError("unknown " + std::string(name) + " backend kind '" + kind + "'");
}

json stage_spec(const RunConfig& config, Stage stage) {
    auto key = std::string(to_string(stage));
    if (config.backends.contains(key)) return config.backends[key];
    switch (stage) {
    case Stage::FrameDiff: return {{"kind", "programmatic"}};
    case Stage::MetricGen: return {{"kind", "scripted"}};
    case Stage::SenseScore: return {{"kind", "monotone"}};
    case Stage::Observer: return {{"kind", "diff_reader"}};
    case Stage::Actor: return {{"kind", "table"}, {"data", {{"actions", {"ACTION1", "ACTION2", "ACTION3", "ACTION4"}}}}};
    }
    return json::object();
}

}  // namespace

Pipeline make_pipeline(const RunConfig& config, const Environment& env,
                       const std::optional<std::filesystem::path>& trace_dir) {
    Pipeline p;
    p.frame_diff = make_backend(Stage::FrameDiff, stage_spec(config, Stage::FrameDiff), config, env, trace_dir);
    p.metric_gen = make_backend(Stage::MetricGen, stage_spec(config, Stage::MetricGen), config, env, trace_dir);
    p.sense_score = make_backend(Stage::SenseScore, stage_spec(config, Stage::SenseScore), config, env, trace_dir);
    p.observer = make_backend(Stage::Observer, stage_spec(config, Stage::Observer), config, env, trace_dir);
    p.actor = make_backend(Stage::Actor, stage_spec(config, Stage::Actor), config, env, trace_dir);
    if (config.corruption) {
        const auto& c = *config.corruption;
        auto policy = parse_corruption_policy(c.value("policy", ""));
        if (!policy) throw ConfigError("unknown corruption policy '" + c.value("policy", "") + "'");
        double rate = c.value("rate", 0.0);
        try {
            p.corruption = std::make_shared<CorruptingDiffer>(p.frame_diff, *policy, rate, c.value("seed", 0ULL));
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
        p.frame_diff = p.corruption;
    }
    return p;
}

Clock make_clock(const RunConfig& config) {
    return config.clock_start ? logical_clock(*config.clock_start) : system_clock();
}

Store open_run_store(const RunConfig& config, const std::filesystem::path& db, const std::string& game_id) {
    auto store = Store::open(db, make_clock(config));
    store.init(game_id, config.card_id, config.curriculum, config.seed_facts);
    if (config.threshold) {
        for (const auto& item : store.queue())
            if (item.threshold != *config.threshold)
                store.apply_external_edit(edit::SetThreshold{item.item_id, *config.threshold});
    }
    return store;
}

// ---- metrics -------------------------------------------------------------

std::vector<std::pair<int, double>> efficiency_ratios(int total_interactions, const std::vector<int>& baselines) {
    std::vector<std::pair<int, double>> out;
    if (total_interactions <= 0) return out;
    for (int b : baselines) out.emplace_back(b, static_cast<double>(b) / static_cast<double>(total_interactions));
    return out;
}

json RunMetrics::to_json() const {
    json items = json::array();
    for (const auto& [id, turn] : item_completion_turns) items.push_back({{"item_id", id}, {"turn", turn}});
    json ratios = json::array();
    for (const auto& [b, r] : efficiency_ratios) ratios.push_back({{"baseline", b}, {"ratio", r}});
    return {{"turns", turns},
            {"total_interactions", total_interactions},
            {"resets", resets},
            {"curriculum_completion_turn", curriculum_completion_turn ? json(*curriculum_completion_turn) : json()},
            {"item_completion_turns", items},
            {"levels_won", levels_won},
            {"losing_sequences", losing_sequences},
            {"efficiency_ratios", ratios},
            {"stop_reason", stop_reason}};
}

// ---- orchestrator --------------------------------------------------------

namespace {

class TraceWriter final : public StageObserver {
public:
    explicit TraceWriter(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
        if (dir_) std::filesystem::create_directories(*dir_);
    }

    void on_invoke(const StageRequest& request, const std::string& reply, const std::string& error) override {
        if (!dir_) return;
        char name[64];
        std::snprintf(name, sizeof name, "t%04d_%s_a%d", request.turn_index,
                      std::string(to_string(request.stage)).c_str(), request.attempt);
        auto base = *dir_ / name;
        std::ofstream(base.string() + ".prompt.txt")
            << (request.prompt ? request.prompt->system + "\n\n" + request.prompt->user_text() : std::string());
        std::ofstream(base.string() + ".reply.txt") << reply;
        if (!error.empty()) std::ofstream(base.string() + ".error.txt") << error;
    }

private:
    std::optional<std::filesystem::path> dir_;
};

FrameDiff empty_diff() {
    FrameDiff d;
    canonicalize(d);
    return d;
}

json action_json(const ActionCommand& a) { return sensi::to_json(a); }

}  // namespace

struct Orchestrator::Impl {
    RunConfig config;
    Store& store;
    Environment& env;
    Pipeline pipeline;
    RunControl* control;
    TraceWriter trace;

    bool started = false;
    Observation current;
    Observation previous;
    std::optional<FrameDiff> ground_truth;  // transition previous -> current
    std::optional<ActionCommand> last_action;
    std::vector<ActionCommand> episode;
    bool curriculum_done = false;
    std::size_t corruption_seen = 0;

    Impl(RunConfig c, Store& s, Environment& e, Pipeline p, RunControl* ctl, std::optional<std::filesystem::path> trace_dir)
        : config(std::move(c)), store(s), env(e), pipeline(std::move(p)), control(ctl), trace(std::move(trace_dir)) {}

    void begin_episode(Observation obs) {
        current = obs;
        previous = obs;
        ground_truth = env.has_ground_truth() ? std::optional(empty_diff()) : std::nullopt;
        last_action.reset();
        episode.clear();
    }
};

Orchestrator::Orchestrator(RunConfig config, Store& store, Environment& env, Pipeline pipeline, RunControl* control,
                           const std::optional<std::filesystem::path>& trace_dir)
    : impl_(std::make_unique<Impl>(std::move(config), store, env, std::move(pipeline), control, trace_dir)) {}

Orchestrator::~Orchestrator() = default;

void Orchestrator::start() {
    auto& s = *impl_;
    auto resolved = s.config.resolved();
    transcript_ = json{{"format", kTranscriptFormat},
                       {"engine_version", kEngineVersion},
                       {"config", resolved.to_json()},
                       {"config_hash", resolved.hash()},
                       {"game_id", s.env.game_id()},
                       {"initial_store_hash", sha256_hex(s.store.dump())},
                       {"turns", json::array()},
                       {"env_steps", json::array()},
                       {"corruptions", json::array()}};
    metrics_ = RunMetrics{};
    auto obs = s.env.reset();
    transcript_["env_steps"].push_back({{"turn", 0}, {"action", action_json(ActionCommand::reset())}, {"counted", false},
                                        {"score", obs.score}, {"status", to_string(obs.status)}});
    s.begin_episode(obs);
    s.curriculum_done = false;
    s.started = true;
    if (s.control) s.control->set_next_turn(s.store.last_turn_index() + 1);
}

TurnOutcome Orchestrator::execute_turn() {
    auto& s = *impl_;
    if (!s.started) start();
    const bool v2 = s.config.mode == Mode::V2;
    const int t = s.store.last_turn_index() + 1;

    // Edits queued through the control plane apply at this boundary, before the turn's pipeline.
    json edits = json::array();
    if (s.control) {
        for (auto& p : s.control->edits().drain()) {
            json e = {{"ticket", p.ticket}, {"edit", to_json(p.edit)}};
            try {
                auto r = s.store.apply_external_edit(p.edit);
                e["audit_id"] = r.audit_id;
                e["changed"] = r.changed;
            } catch (const Error& err) {
                e["error"] = err.what();
            }
            edits.push_back(std::move(e));
        }
    }

    TurnOutcome out;
    std::vector<std::string> stages;
    TurnRecord rec;
    rec.turn_index = t;
    rec.frame_json = to_json(s.current).dump();
    json entry = {{"turn", t}, {"observation", sha256_hex(rec.frame_json)}, {"edits", edits}};

    Store::Transaction tx(s.store);

    std::optional<FrameDiff> diff;
    std::optional<std::int64_t> scored_item;
    if (v2) {
        StageRequest dreq;
        dreq.turn_index = t;
        dreq.previous = &s.previous;
        dreq.current = &s.current;
        PromptInputs din;
        din.previous = &s.previous;
        din.observation = &s.current;
        din.attach_images = s.config.attach_images;
        auto dprompt = assemble_prompt(Stage::FrameDiff, din);
        dreq.prompt = &dprompt;
        diff = stage_frame_diff(*s.pipeline.frame_diff, dreq, &s.trace);
        stages.push_back("frame_diff");

        auto decision = select_active(s.store);
        stages.push_back("select_active");
        if (decision.active_item) {
            auto item = *decision.active_item;
            if (decision.metric_required) {
                StageRequest mreq;
                mreq.turn_index = t;
                PromptInputs min;
                min.item_name = item.item_name;
                auto mprompt = assemble_prompt(Stage::MetricGen, min);
                mreq.prompt = &mprompt;
                auto [metric, generated] = ensure_metric(s.store, item.item_id, *s.pipeline.metric_gen, mreq, &s.trace);
                item.metric = metric;
                if (generated) stages.push_back("metric_gen");
            }
            auto before = s.store.snapshot(t);
            StageRequest sreq;
            sreq.turn_index = t;
            sreq.state = &before;
            sreq.item_name = item.item_name;
            sreq.metric = item.metric.value_or("");
            sreq.facts = before.facts;
            sreq.figured_out = before.figured_out;
            PromptInputs sin;
            sin.state = &before;
            sin.item_name = sreq.item_name;
            sin.metric = sreq.metric;
            sin.figured_out = before.figured_out;
            auto sprompt = assemble_prompt(Stage::SenseScore, sin);
            sreq.prompt = &sprompt;
            auto sense = stage_sense_score(*s.pipeline.sense_score, sreq, &s.trace);
            stages.push_back("sense_score");
            rec.sense_score = sense.score;
            rec.sense_reasoning = sense.reasoning;
            scored_item = item.item_id;

            auto transition = evaluate_transition(s.store, item.item_id, sense.score, t);
            stages.push_back("transition");
            if (transition.just_completed) {
                stages.push_back("promote");
                entry["completed_item"] = *transition.just_completed;
                entry["promoted"] = transition.promoted_fact_count;
                metrics_.item_completion_turns.emplace_back(*transition.just_completed, t);
            }
            if (transition.curriculum_done && !s.curriculum_done) {
                s.curriculum_done = true;
                metrics_.curriculum_completion_turn = t;
            }
        } else {
            s.curriculum_done = true;
        }
    }
    rec.active_item_id = scored_item;

    // Observer sees the post-promotion state.
    auto snap = s.store.snapshot(t);
    auto history = s.store.turns(std::max(0, t - 1 - s.config.history_window));
    PromptInputs oin;
    oin.state = &snap;
    oin.observation = &s.current;
    oin.diff = diff ? &*diff : nullptr;
    oin.history = history;
    oin.history_window = s.config.history_window;
    oin.v1 = !v2;
    oin.attach_images = s.config.attach_images;
    auto oprompt = assemble_prompt(Stage::Observer, oin);
    StageRequest oreq;
    oreq.turn_index = t;
    oreq.prompt = &oprompt;
    oreq.previous = &s.previous;
    oreq.current = &s.current;
    oreq.diff = oin.diff;
    oreq.state = &snap;
    oreq.last_action = s.last_action;
    auto lists = stage_observer(*s.pipeline.observer, oreq, &s.trace);
    stages.push_back("observer");
    s.store.append_hypotheses(t, lists.guesses, lists.figured_out);
    stages.push_back("store_hypotheses");

    auto asnap = s.store.snapshot(t);
    PromptInputs ain = oin;
    ain.state = &asnap;
    ain.exploit = v2 && s.curriculum_done;
    auto aprompt = assemble_prompt(Stage::Actor, ain);
    StageRequest areq = oreq;
    areq.prompt = &aprompt;
    areq.state = &asnap;
    auto act = stage_actor(*s.pipeline.actor, areq, &s.trace);
    stages.push_back("actor");

    auto obs = s.env.step(act.action);
    stages.push_back("env_step");
    bool counted = !act.action.is_reset();
    if (counted) ++metrics_.total_interactions;
    transcript_["env_steps"].push_back({{"turn", t}, {"action", action_json(act.action)}, {"counted", counted},
                                        {"score", obs.score}, {"status", to_string(obs.status)}});
    std::optional<FrameDiff> truth;
    if (s.env.has_ground_truth()) truth = act.action.is_reset() ? empty_diff() : *s.env.ground_truth_diff();
    if (obs.score > s.current.score && !act.action.is_reset()) metrics_.levels_won += obs.score - s.current.score;

    rec.action = act.action;
    rec.decision_type = act.decision_type;
    rec.diff_text = diff ? serialize_diff(*diff) : std::string();
    rec.score = obs.score;
    rec.status = obs.status;
    rec.observer_prompt_hash = oprompt.hash();
    rec.actor_prompt_hash = aprompt.hash();
    rec.stages = stages;
    rec.created_at = s.store.now();
    s.store.record_turn(rec);
    s.store.set_input(t, "score", std::to_string(obs.score));
    s.store.set_input(t, "status", std::string(to_string(obs.status)));

    bool auto_reset = false;
    if (act.action.is_reset()) {
        s.episode.clear();
    } else {
        s.episode.push_back(act.action);
    }
    if (obs.status == GameStatus::GameOver) {
        s.store.log_losing_sequence(s.episode, t);
        ++metrics_.losing_sequences;
    }
    const bool won = obs.status == GameStatus::Win;
    const bool terminal = obs.status == GameStatus::GameOver || (won && s.config.stop != StopCondition::Win);
    tx.commit();

    entry["pipeline_diff"] = diff ? json(serialize_diff(*diff)) : json();
    entry["ground_truth_diff"] = s.ground_truth ? json(serialize_diff(*s.ground_truth)) : json();
    entry["active_item_id"] = scored_item ? json(*scored_item) : json();
    entry["sense_score"] = rec.sense_score ? json(*rec.sense_score) : json();
    entry["observer_prompt_hash"] = rec.observer_prompt_hash;
    entry["actor_prompt_hash"] = rec.actor_prompt_hash;
    entry["guesses"] = lists.guesses;
    entry["figured_out"] = lists.figured_out;
    entry["decision_type"] = to_string(act.decision_type);
    entry["action"] = action_json(act.action);
    entry["stages"] = stages;
    entry["result"] = {{"score", obs.score}, {"status", to_string(obs.status)}};

    if (s.pipeline.corruption) {
        const auto& log = s.pipeline.corruption->log();
        for (; s.corruption_seen < log.size(); ++s.corruption_seen) {
            const auto& ev = log[s.corruption_seen];
            transcript_["corruptions"].push_back(
                {{"turn", ev.turn_index}, {"policy", to_string(ev.policy)}, {"changed", ev.changed}});
        }
    }

    if (act.action.is_reset()) {
        s.begin_episode(obs);
    } else {
        s.previous = s.current;
        s.current = obs;
        s.ground_truth = truth;
        s.last_action = act.action;
    }
    if (terminal) {
        auto fresh = s.env.reset();
        ++metrics_.resets;
        auto_reset = true;
        transcript_["env_steps"].push_back({{"turn", t}, {"action", action_json(ActionCommand::reset())},
                                            {"counted", false}, {"score", fresh.score},
                                            {"status", to_string(fresh.status)}});
        s.begin_episode(fresh);
    }
    entry["auto_reset"] = auto_reset;
    transcript_["turns"].push_back(entry);
    metrics_.turns += 1;

    if (s.control) {
        s.control->set_next_turn(t + 1);
        json event = {{"type", "turn"},
                      {"turn", t},
                      {"action", action_json(act.action)},
                      {"decision_type", to_string(act.decision_type)},
                      {"summary", diff ? diff->summary : std::string()},
                      {"phi", entry["sense_score"]},
                      {"reasoning", rec.sense_reasoning ? json(*rec.sense_reasoning) : json()},
                      {"score", obs.score},
                      {"status", to_string(obs.status)},
                      {"auto_reset", auto_reset},
                      {"edits", edits}};
        if (entry.contains("completed_item")) event["completed_item"] = entry["completed_item"];
        s.control->events().publish(std::move(event));
    }

    out.record = std::move(rec);
    out.transcript_entry = entry;
    out.curriculum_done = s.curriculum_done;
    out.won = won;
    return out;
}

RunMetrics Orchestrator::run() {
    auto& s = *impl_;
    start();
    if (s.control) s.control->set_live(true);
    std::string reason = "max_turns";
    try {
        for (int i = 0; i < s.config.max_turns; ++i) {
            if (s.control && !s.control->wait_until_runnable()) {
                reason = "stopped";
                break;
            }
            auto outcome = execute_turn();
            if (s.config.mode == Mode::V2 && s.config.stop == StopCondition::CurriculumDone && outcome.curriculum_done) {
                reason = "curriculum_done";
                break;
            }
            if (s.config.stop == StopCondition::Win && outcome.won) {
                reason = "win";
                break;
            }
            if (s.control && s.control->stop_requested()) {
                reason = "stopped";
                break;
            }
        }
    } catch (...) {
        if (s.control) s.control->set_live(false);
        throw;
    }
    if (s.control) s.control->set_live(false);
    metrics_.stop_reason = reason;
    metrics_.efficiency_ratios = efficiency_ratios(metrics_.total_interactions);
    transcript_["losing_sequences"] = json::array();
    for (const auto& seq : s.store.losing_sequences()) {
        json actions = json::array();
        for (const auto& a : seq.actions) actions.push_back(action_json(a));
        transcript_["losing_sequences"].push_back({{"terminal_turn", seq.terminal_turn_index}, {"actions", actions}});
    }
    transcript_["metrics"] = metrics_.to_json();
    return metrics_;
}

// ---- whole runs ----------------------------------------------------------

RunResult run_config(const RunConfig& config, const std::filesystem::path& db, RunControl* control,
                     const std::optional<std::filesystem::path>& trace_dir) {
    auto env = make_environment(config);
    auto pipeline = make_pipeline(config, *env, trace_dir);
    auto store = open_run_store(config, db, env->game_id());
    Orchestrator orch(config, store, *env, std::move(pipeline), control, trace_dir);
    RunResult result;
    result.metrics = orch.run();
    result.transcript = orch.transcript();
    result.store_dump = store.dump();
    return result;
}

void write_manifest(const RunConfig& config, const std::filesystem::path& db) {
    auto resolved = config.resolved();
    json manifest = {{"engine_version", kEngineVersion},
                     {"schema_version", kSchemaVersion},
                     {"transcript_format", kTranscriptFormat},
                     {"config", resolved.to_json()},
                     {"config_hash", resolved.hash()},
                     {"clock_start", config.clock_start ? json(*config.clock_start) : json()},
                     {"corruption_seed", config.corruption ? config.corruption->value("seed", json()) : json()},
                     {"compiler", __VERSION__}};
    std::ofstream(db.string() + ".manifest.json") << manifest.dump(2) << "\n";
}

// ---- replay --------------------------------------------------------------

json ReplayReport::to_json() const {
    json j = {{"match", match}, {"turns_checked", turns_checked}};
    if (divergence)
        j["divergence"] = {{"turn", divergence->turn_index},
                           {"field", divergence->field},
                           {"expected", divergence->expected},
                           {"actual", divergence->actual}};
    return j;
}

namespace {

std::filesystem::path scratch_path() {
    static std::mt19937_64 rng{std::random_device{}()};
    auto dir = std::filesystem::temp_directory_path() / ("sensi-replay-" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir;
}

std::string text_of(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

ReplayReport replay(const json& transcript, const std::optional<std::filesystem::path>& base_store) {
    if (transcript.value("format", "") != kTranscriptFormat)
        throw ConfigError("not a transcript (format '" + transcript.value("format", "") + "')");
    if (!transcript.contains("config") || !transcript.contains("turns"))
        throw ConfigError("transcript lacks config or turns");
    auto config = RunConfig::from_json(transcript["config"]);
    if (config.hash() != transcript.value("config_hash", ""))
        throw ConfigError("transcript config does not match its recorded hash");
    if (!config.scripted()) throw ConfigError("replay needs scripted backends and a simulated environment");

    auto dir = scratch_path();
    auto db = dir / "replay.db";
    ReplayReport report;
    try {
        if (base_store) Store::open_readonly(*base_store).copy_to(db);
        auto env = make_environment(config);
        if (env->game_id() != transcript.value("game_id", env->game_id()))
            throw ConfigError("transcript game '" + transcript.value("game_id", "") + "' does not match the config");
        auto pipeline = make_pipeline(config, *env);
        auto store = open_run_store(config, db, env->game_id());
        RunControl control;
        Orchestrator orch(config, store, *env, std::move(pipeline), &control);
        orch.start();
        static const char* fields[] = {"edits_applied",      "pipeline_diff", "sense_score", "completed_item",
                                       "observer_prompt_hash", "guesses",       "figured_out", "actor_prompt_hash",
                                       "decision_type",      "action",        "result",      "stages",
                                       "auto_reset"};
        for (const auto& expected : transcript["turns"]) {
            int turn = expected.value("turn", 0);
            for (const auto& e : expected.value("edits", json::array()))
                control.edits().push(edit_from_json(e["edit"]), turn);
            auto actual = orch.execute_turn().transcript_entry;
            for (const char* f : fields) {
                json want, got;
                if (std::string(f) == "edits_applied") {
                    want = expected.value("edits", json::array()).size();
                    got = actual.value("edits", json::array()).size();
                } else {
                    want = expected.value(f, json());
                    got = actual.value(f, json());
                }
                if (want != got) {
                    report.divergence = Divergence{turn, f, text_of(want), text_of(got)};
                    break;
                }
            }
            if (report.divergence) break;
            ++report.turns_checked;
        }
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
        throw;
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    report.match = !report.divergence;
    return report;
}

}  // namespace sensi
