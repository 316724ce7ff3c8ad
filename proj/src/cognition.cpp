#include "sensi/cognition.hpp"

#include "sensi/errors.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace sensi {

using nlohmann::json;

ObserverOutput normalize(ObserverOutput out) {
    auto dedup = [](const std::vector<std::string>& in, const std::set<std::string>& exclude) {
        std::vector<std::string> res;
        std::set<std::string> seen;
        for (const auto& s : in) {
            if (s.empty() || exclude.count(s) || !seen.insert(s).second) continue;
            res.push_back(s);
        }
        return res;
    };
    ObserverOutput r;
    r.figured_out = dedup(out.figured_out, {});
    r.guesses = dedup(out.guesses, std::set<std::string>(r.figured_out.begin(), r.figured_out.end()));
    return r;
}

json extract_json(std::string_view reply) {
    auto open = reply.find_first_of("{[");
    if (open == std::string_view::npos) throw ParseError("reply contains no JSON object", 0);
    char closer = reply[open] == '{' ? '}' : ']';
    auto close = reply.find_last_of(closer);
    if (close == std::string_view::npos || close < open) throw ParseError("unterminated JSON in reply", open);
    try {
        return json::parse(reply.substr(open, close - open + 1));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), open + e.byte);
    }
}

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("reply is missing '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_array()) throw ValidationError(std::string("'") + key + "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw ValidationError(std::string("'") + key + "' must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

FrameDiff parse_frame_diff_reply(std::string_view reply) {
    auto j = extract_json(reply);
    return diff_from_json(j);
}

std::string parse_metric_reply(std::string_view reply) {
    std::string metric;
    try {
        auto j = extract_json(reply);
        if (j.is_object() && j.contains("learning_metric") && j["learning_metric"].is_string())
            metric = j["learning_metric"].get<std::string>();
        else
            metric = trim(reply);
    } catch (const ParseError&) {
        metric = trim(reply);
    }
    metric = trim(metric);
    if (metric.empty()) throw ValidationError("empty metric");
    return metric;
}

SenseEvaluation parse_sense_reply(std::string_view reply) {
    auto j = extract_json(reply);
    if (!j.is_object() || !j.contains("sense_score")) throw ValidationError("reply is missing 'sense_score'");
    const auto& s = j["sense_score"];
    if (!s.is_number_integer()) throw ValidationError("sense_score must be an integer, got " + s.dump());
    auto score = s.get<long long>();
    if (score < 1 || score > 10) throw ValidationError("sense_score " + std::to_string(score) + " outside [1, 10]");
    if (!j.contains("reasoning") || !j["reasoning"].is_string() || trim(j["reasoning"].get<std::string>()).empty())
        throw ValidationError("reasoning must be a non-empty string");
    return {static_cast<int>(score), j["reasoning"].get<std::string>()};
}

ObserverOutput parse_observer_reply(std::string_view reply) {
    auto j = extract_json(reply);
    if (!j.is_object()) throw ValidationError("observer reply must be a JSON object");
    return normalize({string_list(j, "guesses"), string_list(j, "figured_out")});
}

ActorOutput parse_actor_reply(std::string_view reply, std::optional<int> width, std::optional<int> height) {
    auto j = extract_json(reply);
    if (!j.is_object()) throw ValidationError("actor reply must be a JSON object");
    if (!j.contains("decision_type") || !j["decision_type"].is_string())
        throw ValidationError("reply is missing 'decision_type'");
    auto label = j["decision_type"].get<std::string>();
    std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) { return std::toupper(c); });
    auto d = parse_decision_type(label);
    if (!d) throw ValidationError("decision_type must be GUESS or INFORMED");
    if (!j.contains("action")) throw ValidationError("reply is missing 'action'");
    json action = j["action"];
    if (action.is_string()) {
        action = json{{"action_id", action}};
        if (j.contains("coords")) action["coords"] = j["coords"];
    }
    ActionCommand cmd = action_from_json(action);
    cmd.validate(width, height);
    return {*d, cmd};
}

namespace {

template <typename Parse>
auto run_stage(Backend& backend, StageRequest request, StageObserver* observer, Parse parse) {
    std::string reply;
    std::string error;
    for (int attempt = 0; attempt <= kRepairRetries; ++attempt) {
        request.attempt = attempt;
        request.repair_hint = error;
        reply = backend.invoke(request);
        try {
            auto value = parse(reply);
            if (observer) observer->on_invoke(request, reply, {});
            return value;
        } catch (const ParseError& e) {
            error = e.what();
        } catch (const ValidationError& e) {
            error = e.what();
        }
        if (observer) observer->on_invoke(request, reply, error);
    }
    throw StageError(std::string(to_string(request.stage)),
                     "no valid reply after " + std::to_string(kRepairRetries + 1) + " attempts: " + error, reply);
}

}  // namespace

FrameDiff stage_frame_diff(Backend& backend, StageRequest request, StageObserver* observer) {
    request.stage = Stage::FrameDiff;
    if (!request.previous || !request.current) throw ValidationError("frame diff needs two observations");
    if (!request.previous->frame.same_shape(request.current->frame))
        throw ValidationError("frame shapes differ: " + request.previous->frame.shape_string() + " vs " +
                              request.current->frame.shape_string());
    return run_stage(backend, std::move(request), observer, [](const std::string& r) {
        auto d = parse_frame_diff_reply(r);
        canonicalize(d);
        return d;
    });
}

std::string stage_metric_gen(Backend& backend, StageRequest request, StageObserver* observer) {
    request.stage = Stage::MetricGen;
    return run_stage(backend, std::move(request), observer, [](const std::string& r) { return parse_metric_reply(r); });
}

SenseEvaluation stage_sense_score(Backend& backend, StageRequest request, StageObserver* observer) {
    request.stage = Stage::SenseScore;
    if (request.metric.empty()) throw ValidationError("sense scoring needs a metric");
    return run_stage(backend, std::move(request), observer, [](const std::string& r) { return parse_sense_reply(r); });
}

ObserverOutput stage_observer(Backend& backend, StageRequest request, StageObserver* observer) {
    request.stage = Stage::Observer;
    return run_stage(backend, std::move(request), observer,
                     [](const std::string& r) { return parse_observer_reply(r); });
}

ActorOutput stage_actor(Backend& backend, StageRequest request, StageObserver* observer) {
    request.stage = Stage::Actor;
    std::optional<int> w, h;
    if (request.current) {
        w = request.current->frame.width();
        h = request.current->frame.height();
    }
    return run_stage(backend, std::move(request), observer,
                     [w, h](const std::string& r) { return parse_actor_reply(r, w, h); });
}

std::pair<std::string, bool> ensure_metric(Store& store, std::int64_t item_id, Backend& backend,
                                           StageRequest request, StageObserver* observer) {
    auto item = store.item(item_id);
    if (!item) throw NotFoundError("item " + std::to_string(item_id) + " not found");
    if (item->metric) return {*item->metric, false};
    request.item_name = item->item_name;
    auto metric = stage_metric_gen(backend, std::move(request), observer);
    store.store_metric(item_id, metric);
    return {metric, true};
}

}  // namespace sensi
