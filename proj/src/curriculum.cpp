#include "sensi/curriculum.hpp"

#include "sensi/errors.hpp"

#include <algorithm>

namespace sensi {

CurriculumDecision select_active(Store& store) {
    Store::Transaction tx(store);
    CurriculumDecision d;
    auto queue = store.queue();
    std::optional<LearningItem> chosen;
    for (const auto& it : queue) {
        if (it.state == ItemState::Learning || it.state == ItemState::NotReached) {
            chosen = it;
            break;
        }
    }
    if (!chosen) {
        d.curriculum_done = true;
        tx.commit();
        return d;
    }
    // A reorder or positioned insert can put a waiting item ahead of the learning one.
    for (const auto& it : queue) {
        if (it.state == ItemState::Learning && it.item_id != chosen->item_id)
            store.set_item_state(it.item_id, ItemState::NotReached);
    }
    if (chosen->state == ItemState::NotReached) {
        store.set_item_state(chosen->item_id, ItemState::Learning);
        chosen->state = ItemState::Learning;
    }
    d.metric_required = !chosen->metric.has_value();
    d.active_item = std::move(chosen);
    tx.commit();
    return d;
}

CurriculumDecision evaluate_transition(Store& store, std::int64_t item_id, int phi, int turn_index) {
    if (phi < 1 || phi > 10) throw ValidationError("sense score " + std::to_string(phi) + " outside [1, 10]");
    Store::Transaction tx(store);
    auto item = store.item(item_id);
    if (!item) throw NotFoundError("item " + std::to_string(item_id) + " not found");
    if (item->state != ItemState::Learning)
        throw StoreError("item " + std::to_string(item_id) + " is " + std::string(to_string(item->state)) +
                         ", not learning");
    CurriculumDecision d;
    if (phi >= item->threshold) {
        store.mark_completed(item_id, turn_index);
        d.promoted_fact_count = store.promote_figured_outs(item_id, turn_index);
        d.just_completed = item_id;
        item = store.item(item_id);
    }
    d.active_item = item;
    auto queue = store.queue();
    d.curriculum_done = std::none_of(queue.begin(), queue.end(), [](const LearningItem& it) {
        return it.state == ItemState::Learning || it.state == ItemState::NotReached;
    });
    tx.commit();
    return d;
}

std::vector<TimelinePoint> curriculum_timeline(const Store& store) {
    std::vector<TimelinePoint> out;
    for (const auto& t : store.turns()) {
        if (!t.sense_score) continue;
        TimelinePoint p{t.turn_index, t.active_item_id, *t.sense_score, ItemState::Learning};
        if (t.active_item_id) {
            auto item = store.item(*t.active_item_id);
            if (item && item->completed_turn == t.turn_index) p.state = ItemState::Completed;
        }
        out.push_back(p);
    }
    return out;
}

nlohmann::json to_json(const std::vector<TimelinePoint>& timeline) {
    auto rows = nlohmann::json::array();
    for (const auto& p : timeline) {
        rows.push_back({{"turn", p.turn_index},
                        {"item_id", p.item_id ? nlohmann::json(*p.item_id) : nlohmann::json(nullptr)},
                        {"phi", p.phi},
                        {"state", to_string(p.state)}});
    }
    return rows;
}

}  // namespace sensi
