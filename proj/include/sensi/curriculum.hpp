#pragma once

#include "sensi/store.hpp"

#include <optional>
#include <vector>

namespace sensi {

struct CurriculumDecision {
    std::optional<LearningItem> active_item;
    std::optional<std::int64_t> just_completed;
    int promoted_fact_count = 0;
    bool curriculum_done = false;
    bool metric_required = false;  // the active item has no metric yet
};

/// Picks the lowest-positioned item that is still learning or not_reached and
/// makes it the (single) learning item.
CurriculumDecision select_active(Store& store);

/// Completes `item_id` and promotes the stored figured-out list when phi >= its threshold.
CurriculumDecision evaluate_transition(Store& store, std::int64_t item_id, int phi, int turn_index);

struct TimelinePoint {
    int turn_index = 0;
    std::optional<std::int64_t> item_id;
    int phi = 0;
    ItemState state = ItemState::Learning;  // completed on the completion turn

    bool operator==(const TimelinePoint&) const = default;
};

std::vector<TimelinePoint> curriculum_timeline(const Store& store);
nlohmann::json to_json(const std::vector<TimelinePoint>& timeline);

}  // namespace sensi
