#include "sensi/scripted.hpp"

#include "sensi/claims.hpp"
#include "sensi/codec.hpp"
#include "sensi/errors.hpp"
#include "sensi/keyquest.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>

namespace sensi {

using nlohmann::json;

json load_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read fixture " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("fixture " + path.string() + " is not valid JSON: " + e.what());
    }
}

namespace {

std::map<int, json> by_turn(const json& j, const char* key) {
    std::map<int, json> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_object()) throw ConfigError(std::string("fixture field '") + key + "' must be an object keyed by turn");
    for (const auto& [k, v] : j[key].items()) {
        try {
            std::size_t used = 0;
            int turn = std::stoi(k, &used);
            if (used != k.size() || turn < 1) throw std::invalid_argument(k);
            out.emplace(turn, v);
        } catch (const std::exception&) {
            throw ConfigError(std::string("fixture key '") + k + "' in '" + key + "' is not a turn number");
        }
    }
    return out;
}

ActionCommand action_spec(const json& j) {
    try {
        if (j.is_string()) {
            auto id = parse_action_id(j.get<std::string>());
            if (!id) throw ConfigError("unknown action '" + j.get<std::string>() + "'");
            return {*id, std::nullopt};
        }
        auto cmd = action_from_json(j);
        cmd.validate();
        return cmd;
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("bad action in fixture: ") + e.what());
    }
}

std::string reply(const json& j) { return j.dump(); }

}  // namespace

// ---- differs -------------------------------------------------------------

std::string ProgrammaticDiffer::invoke(const StageRequest& request) {
    if (!request.previous || !request.current) throw ValidationError("programmatic differ needs two observations");
    return serialize_diff(programmatic_diff(*request.previous, *request.current, hud_));
}

ScriptedDiffer ScriptedDiffer::from_json(const json& j) {
    std::map<int, std::string> replies;
    for (auto& [turn, v] : by_turn(j, "diffs")) replies[turn] = v.is_string() ? v.get<std::string>() : v.dump();
    return ScriptedDiffer(std::move(replies));
}

std::string ScriptedDiffer::invoke(const StageRequest& request) {
    auto it = replies_.find(request.turn_index);
    if (it == replies_.end())
        throw StageError("frame_diff", "scripted diff fixture has no entry for turn " + std::to_string(request.turn_index));
    return it->second;
}

// ---- metric generation ---------------------------------------------------

ScriptedMetricGen::ScriptedMetricGen(std::map<std::string, std::string> metrics, std::string fallback)
    : metrics_(std::move(metrics)), fallback_(std::move(fallback)) {}

ScriptedMetricGen ScriptedMetricGen::from_json(const json& j) {
    std::map<std::string, std::string> metrics;
    if (j.contains("metrics")) metrics = j["metrics"].get<std::map<std::string, std::string>>();
    return ScriptedMetricGen(std::move(metrics),
                             j.value("default", std::string("Score 1-10 by how completely the notes cover: {item}.")));
}

std::string ScriptedMetricGen::invoke(const StageRequest& request) {
    ++invocations_;
    auto it = metrics_.find(request.item_name);
    std::string metric = it != metrics_.end() ? it->second : fallback_;
    if (auto pos = metric.find("{item}"); pos != std::string::npos) metric.replace(pos, 6, request.item_name);
    return reply({{"learning_metric", metric}});
}

// ---- sense scorers -------------------------------------------------------

std::string MonotoneScorer::invoke(const StageRequest& request) {
    int n = static_cast<int>(request.figured_out.size());
    int phi = std::min(10, base_ + n);
    return reply({{"sense_score", phi},
                  {"reasoning", std::to_string(n) + " confirmed observation(s) bear on '" + request.item_name + "'"}});
}

ScheduleScorer ScheduleScorer::from_json(const json& j) {
    std::map<int, int> scores;
    for (auto& [turn, v] : by_turn(j, "scores")) scores[turn] = v.get<int>();
    return ScheduleScorer(std::move(scores), j.value("default", 1));
}

std::string ScheduleScorer::invoke(const StageRequest& request) {
    auto it = scores_.find(request.turn_index);
    int phi = it != scores_.end() ? it->second : fallback_;
    return reply({{"sense_score", phi}, {"reasoning", "scheduled score for turn " + std::to_string(request.turn_index)}});
}

std::string ConstantScorer::invoke(const StageRequest&) {
    return reply({{"sense_score", score_}, {"reasoning", "fixed score"}});
}

// ---- observers -----------------------------------------------------------

TableObserver TableObserver::from_json(const json& j) {
    std::map<int, Entry> entries;
    for (auto& [turn, v] : by_turn(j, "turns")) {
        Entry e;
        e.lists.guesses = v.value("guesses", std::vector<std::string>{});
        e.lists.figured_out = v.value("figured_out", std::vector<std::string>{});
        if (v.contains("diff_hash")) e.diff_hash = v["diff_hash"].get<std::string>();
        entries.emplace(turn, std::move(e));
    }
    return TableObserver(std::move(entries), j.value("carry_forward", true));
}

std::string TableObserver::invoke(const StageRequest& request) {
    auto it = entries_.find(request.turn_index);
    if (it == entries_.end()) {
        if (!carry_forward_ || !request.state)
            throw StageError("observer", "observer fixture has no entry for turn " + std::to_string(request.turn_index));
        return reply({{"guesses", request.state->guesses}, {"figured_out", request.state->figured_out}});
    }
    if (it->second.diff_hash) {
        std::string actual = request.diff ? sha256_hex(serialize_diff(*request.diff)) : std::string();
        if (actual != *it->second.diff_hash)
            throw StageError("observer", "turn " + std::to_string(request.turn_index) +
                                             ": diff does not match the fixture (hash " + actual + ")");
    }
    return reply({{"guesses", it->second.lists.guesses}, {"figured_out", it->second.lists.figured_out}});
}

std::vector<std::string> DiffReaderObserver::claims_for(const FrameDiff& diff,
                                                        const std::optional<ActionCommand>& action) {
    using namespace keyquest;
    static const std::regex counts_re(R"((\d+) -> (\d+) non-background)");
    std::vector<std::string> out;
    if (!action || action->is_reset()) return out;

    const MovedObject* top = nullptr;
    bool bottom_moved = false;
    for (const auto& m : diff.moved) {
        if (m.color == kPlayerTopColor && m.cell_count == 1) top = &m;
        if (m.color == kPlayerBottomColor && m.cell_count == 1) bottom_moved = true;
    }
    int id = static_cast<int>(action->id);
    if (top && id >= 1 && id <= 4) {
        auto dir = direction_word(top->d_row(), top->d_col());
        if (!dir.empty()) out.push_back(claim::moves(action->id, dir));
        if (bottom_moved) out.push_back(claim::kPlayerIdentity);
    }
    if (!top && id >= 5 && diff.added.empty() && diff.removed.empty()) out.push_back(claim::no_effect(action->id));

    auto removed_color = [&](int color) {
        return std::any_of(diff.removed.begin(), diff.removed.end(), [&](const DiffObject& o) { return o.color == color; });
    };
    bool energy_up = false;
    for (const auto& u : diff.ui_changes) {
        std::smatch m;
        std::string desc = u.description;
        if (desc.find("decorative") != std::string::npos) {
            if (u.region_name == "energy") out.push_back(claim::kDecorativeBar);
            continue;
        }
        if (!std::regex_search(desc, m, counts_re)) continue;
        int before = std::stoi(m[1]);
        int after = std::stoi(m[2]);
        if (u.region_name == "energy") {
            if (after == before - 1) out.push_back(claim::kEnergyCost);
            energy_up = after > before;
        }
        if (u.region_name == "inventory") {
            if (after > before && !top) out.push_back(claim::kBumpGenerator);
            if (after < before) out.push_back(claim::kKeyConsumed);
        }
    }
    bool door_removed = std::any_of(diff.removed.begin(), diff.removed.end(), [](const DiffObject& o) {
        return std::find(std::begin(kKeyColors), std::end(kKeyColors), o.color) != std::end(kKeyColors);
    });
    if (door_removed && !top) out.push_back(claim::kDoorVanishes);
    if (removed_color(kStarColor)) out.push_back(claim::kStarsCollectible);
    if (removed_color(kEnergyDotColor) && energy_up) out.push_back(claim::kDotRefills);
    return out;
}

std::string DiffReaderObserver::invoke(const StageRequest& request) {
    std::vector<std::string> prev_guesses, prev_known;
    std::set<std::string> facts;
    if (request.state) {
        prev_guesses = request.state->guesses;
        prev_known = request.state->figured_out;
        facts.insert(request.state->facts.begin(), request.state->facts.end());
    }
    std::vector<std::string> seen;
    if (request.diff) seen = claims_for(*request.diff, request.last_action);

    ObserverOutput out;
    auto contains = [](const std::vector<std::string>& v, const std::string& s) {
        return std::find(v.begin(), v.end(), s) != v.end();
    };
    for (const auto& k : prev_known)
        if (!facts.count(k)) out.figured_out.push_back(k);
    for (const auto& c : seen) {
        if (facts.count(c) || contains(out.figured_out, c)) continue;
        if (contains(prev_guesses, c))
            out.figured_out.push_back(c);
        else
            out.guesses.push_back(c);
    }
    for (const auto& g : prev_guesses)
        if (!facts.count(g) && !contains(out.figured_out, g)) out.guesses.push_back(g);
    out = normalize(std::move(out));
    return reply({{"guesses", out.guesses}, {"figured_out", out.figured_out}});
}

// ---- actors --------------------------------------------------------------

DecisionType exploration_decision(const EpistemicState* state) {
    if (!state) return DecisionType::Guess;
    return state->guesses.size() > state->figured_out.size() ? DecisionType::Guess : DecisionType::Informed;
}

namespace {

std::string actor_reply(DecisionType d, const ActionCommand& cmd) {
    return reply({{"decision_type", to_string(d)}, {"action", to_json(cmd)}});
}

}  // namespace

TableActor TableActor::from_json(const json& j) {
    if (!j.contains("actions") || !j["actions"].is_array() || j["actions"].empty())
        throw ConfigError("actor fixture needs a non-empty 'actions' list");
    std::vector<ActionCommand> actions;
    for (const auto& a : j["actions"]) actions.push_back(action_spec(a));
    return TableActor(std::move(actions), j.value("cycle", true));
}

std::string TableActor::invoke(const StageRequest& request) {
    auto idx = static_cast<std::size_t>(std::max(0, request.turn_index - 1));
    if (idx >= actions_.size()) {
        if (!cycle_)
            throw StageError("actor", "actor fixture has no action for turn " + std::to_string(request.turn_index));
        idx %= actions_.size();
    }
    return actor_reply(exploration_decision(request.state), actions_[idx]);
}

FramePolicyActor FramePolicyActor::from_json(const json& j) {
    std::map<std::string, ActionCommand> policy;
    if (j.contains("policy"))
        for (const auto& [k, v] : j["policy"].items()) policy.emplace(k, action_spec(v));
    return FramePolicyActor(std::move(policy), action_spec(j.value("default", json("ACTION1"))));
}

std::string FramePolicyActor::frame_key(const Observation& obs) { return sha256_hex(frame_to_text(obs.frame)); }

std::string FramePolicyActor::invoke(const StageRequest& request) {
    ActionCommand cmd = fallback_;
    if (request.current) {
        auto it = policy_.find(frame_key(*request.current));
        if (it != policy_.end()) cmd = it->second;
    }
    return actor_reply(exploration_decision(request.state), cmd);
}

}  // namespace sensi
