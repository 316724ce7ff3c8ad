#pragma once

#include "sensi/curriculum.hpp"

#include <string>
#include <vector>

namespace sensi {

/// "turn,item_id,phi" rows; turns without an active item leave item_id empty.
std::string timeline_csv(const std::vector<TimelinePoint>& timeline);

/// Sense score against turn with the threshold line and a marker at every completion.
std::string timeline_svg(const std::vector<TimelinePoint>& timeline, int threshold = kDefaultThreshold);

}  // namespace sensi
