#include "sensi/cascade.hpp"

#include "sensi/errors.hpp"

#include <map>
#include <set>

namespace sensi {

using nlohmann::json;
using keyquest::Truth;

std::string_view to_string(CorruptionPolicy policy) {
    switch (policy) {
    case CorruptionPolicy::FlipHorizontalDirection: return "flip_horizontal";
    case CorruptionPolicy::RelabelUiAsDecoration: return "relabel_ui";
    case CorruptionPolicy::DropMoves: return "drop_moves";
    }
    return "flip_horizontal";
}

std::optional<CorruptionPolicy> parse_corruption_policy(std::string_view text) {
    if (text == "flip_horizontal") return CorruptionPolicy::FlipHorizontalDirection;
    if (text == "relabel_ui") return CorruptionPolicy::RelabelUiAsDecoration;
    if (text == "drop_moves") return CorruptionPolicy::DropMoves;
    return std::nullopt;
}

FrameDiff corrupt(const FrameDiff& diff, CorruptionPolicy policy) {
    FrameDiff out = diff;
    switch (policy) {
    case CorruptionPolicy::FlipHorizontalDirection:
        for (auto& m : out.moved) {
            int dc = m.d_col();
            int left = m.prev_bbox.left - dc;
            if (dc == 0 || left < 0) continue;
            int width = m.new_bbox.right - m.new_bbox.left;
            m.new_bbox.left = left;
            m.new_bbox.right = left + width;
        }
        break;
    case CorruptionPolicy::RelabelUiAsDecoration:
        for (auto& u : out.ui_changes) u.description = kDecorationLabel;
        break;
    case CorruptionPolicy::DropMoves:
        out.moved.clear();
        break;
    }
    canonicalize(out);
    return out;
}

CorruptingDiffer::CorruptingDiffer(BackendPtr inner, CorruptionPolicy policy, double rate, std::uint64_t seed)
    : inner_(std::move(inner)), policy_(policy), rate_(rate), rng_(seed) {
    if (!inner_) throw ValidationError("corrupting differ needs an inner backend");
    if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("corruption rate must be within [0, 1]");
}

std::string CorruptingDiffer::name() const { return "corrupt(" + inner_->name() + ")"; }

std::string CorruptingDiffer::invoke(const StageRequest& request) {
    auto reply = inner_->invoke(request);
    const double u = uniform_(rng_);
    if (u >= rate_) return reply;
    CorruptionEvent ev{request.turn_index, policy_, false};
    try {
        auto clean = parse_frame_diff_reply(reply);
        auto bad = corrupt(clean, policy_);
        ev.changed = !same_content(clean, bad) || clean.summary != bad.summary;
        reply = serialize_diff(bad);
    } catch (const Error&) {
        // Unparseable replies pass through; the stage runner's repair loop handles them.
    }
    log_.push_back(ev);
    return reply;
}

std::string_view to_string(CascadeVerdict verdict) {
    switch (verdict) {
    case CascadeVerdict::Detected: return "detected";
    case CascadeVerdict::NotDetected: return "not_detected";
    case CascadeVerdict::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

json CascadeReport::to_json() const {
    json spurious = json::array();
    for (const auto& s : spurious_validations)
        spurious.push_back(
            {{"turn", s.turn_index}, {"phi", s.phi}, {"item_id", s.item_id}, {"contradicted", s.contradicted}});
    json tags = json::array();
    for (const auto& p : provenance)
        tags.push_back({{"kind", p.kind},
                        {"text", p.text},
                        {"origin_turn", p.origin_turn ? json(*p.origin_turn) : json()},
                        {"source_diff_turn", p.source_diff_turn ? json(*p.source_diff_turn) : json()},
                        {"corrupted_source", p.corrupted_source},
                        {"truth", keyquest::to_string(p.truth)}});
    return {{"verdict", sensi::to_string(verdict)},
            {"detected", verdict == CascadeVerdict::Detected},
            {"corrupted_diff_turns", corrupted_diff_turns},
            {"contaminated_figured_out", contaminated_figured_out},
            {"contaminated_facts", contaminated_facts},
            {"contaminated_fact_texts", contaminated_fact_texts},
            {"spurious_validations", spurious},
            {"provenance", tags}};
}

CascadeReport audit_run(const json& transcript, const Store& store) {
    CascadeReport report;
    if (!transcript.contains("turns") || !transcript["turns"].is_array())
        throw ValidationError("transcript has no turns");

    std::set<int> corrupted;
    bool indeterminate = false;
    for (const auto& t : transcript["turns"]) {
        const auto& truth = t.value("ground_truth_diff", json());
        const auto& seen = t.value("pipeline_diff", json());
        if (!truth.is_string()) {
            indeterminate = true;
            continue;
        }
        if (!seen.is_string()) continue;  // v1 turns have no diff
        if (!same_content(parse_diff(seen.get<std::string>()), parse_diff(truth.get<std::string>())))
            corrupted.insert(t.value("turn", 0));
    }
    for (const auto& c : transcript.value("corruptions", json::array()))
        if (c.value("changed", false)) corrupted.insert(c.value("turn", 0));
    report.corrupted_diff_turns.assign(corrupted.begin(), corrupted.end());

    std::map<std::string, int> origin;
    std::map<int, std::vector<std::string>> figured_by_turn;
    std::set<std::string> figured_texts, guess_texts;
    for (auto kind : {HypothesisKind::Guess, HypothesisKind::FiguredOut}) {
        for (const auto& h : store.hypotheses(kind, false)) {
            auto [it, fresh] = origin.emplace(h.text, h.turn_index);
            if (!fresh) it->second = std::min(it->second, h.turn_index);
            if (kind == HypothesisKind::FiguredOut) {
                figured_by_turn[h.turn_index].push_back(h.text);
                figured_texts.insert(h.text);
            } else {
                guess_texts.insert(h.text);
            }
        }
    }

    auto tag = [&](const std::string& kind, const std::string& text) {
        ProvenanceTag p;
        p.kind = kind;
        p.text = text;
        p.truth = keyquest::check_claim(text);
        if (auto it = origin.find(text); it != origin.end()) {
            p.origin_turn = it->second;
            p.source_diff_turn = it->second;
            p.corrupted_source = corrupted.count(it->second) > 0;
        }
        return p;
    };
    auto contaminated = [](const ProvenanceTag& p) { return p.truth == Truth::Contradicted && p.corrupted_source; };

    for (const auto& text : guess_texts) report.provenance.push_back(tag("guess", text));
    for (const auto& text : figured_texts) {
        auto p = tag("figured_out", text);
        if (contaminated(p)) ++report.contaminated_figured_out;
        report.provenance.push_back(std::move(p));
    }
    std::map<std::int64_t, int> contaminated_by_item;
    for (const auto& item : store.items()) {
        if (item.state != ItemState::Fact) continue;
        auto p = tag("fact", item.item_name);
        if (contaminated(p)) {
            ++report.contaminated_facts;
            report.contaminated_fact_texts.push_back(item.item_name);
            if (item.source_item_id) ++contaminated_by_item[*item.source_item_id];
        }
        report.provenance.push_back(std::move(p));
    }

    bool detected = false;
    for (const auto& t : transcript["turns"]) {
        if (!t.value("sense_score", json()).is_number() || !t.value("active_item_id", json()).is_number()) continue;
        const int turn = t["turn"].get<int>();
        const int phi = t["sense_score"].get<int>();
        const auto item_id = t["active_item_id"].get<std::int64_t>();
        auto item = store.item(item_id);
        if (!item || phi < item->threshold) continue;
        SpuriousValidation sv{turn, phi, item_id, {}};
        for (const auto& text : figured_by_turn[turn - 1])
            if (keyquest::check_claim(text) == Truth::Contradicted) sv.contradicted.push_back(text);
        if (sv.contradicted.empty()) continue;
        if (item->completed_turn == turn && contaminated_by_item[item_id] > 0) detected = true;
        report.spurious_validations.push_back(std::move(sv));
    }

    if (indeterminate)
        report.verdict = CascadeVerdict::Indeterminate;
    else
        report.verdict = detected ? CascadeVerdict::Detected : CascadeVerdict::NotDetected;
    return report;
}

}  // namespace sensi
