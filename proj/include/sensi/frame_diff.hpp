#pragma once

#include "sensi/frames.hpp"

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sensi {

struct Cell {
    int layer = 0;
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

struct BBox {
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;
    auto operator<=>(const BBox&) const = default;
};

/// A 4-connected same-color component. `cells` is kept sorted.
struct DiffObject {
    int color = 0;
    std::vector<Cell> cells;
    BBox bbox;
    int cell_count = 0;

    static DiffObject from_cells(int color, std::vector<Cell> cells);
    bool operator==(const DiffObject&) const = default;
};

struct MovedObject {
    BBox prev_bbox;
    BBox new_bbox;
    int color = 0;
    int cell_count = 0;

    int d_row() const { return new_bbox.top - prev_bbox.top; }
    int d_col() const { return new_bbox.left - prev_bbox.left; }
    bool operator==(const MovedObject&) const = default;
};

struct RegionChange {
    std::string region_name;
    std::string description;
    bool operator==(const RegionChange&) const = default;
};

struct FrameDiff {
    std::vector<DiffObject> added;
    std::vector<DiffObject> removed;
    std::vector<MovedObject> moved;
    std::vector<RegionChange> ui_changes;
    std::string summary;

    bool is_empty() const { return added.empty() && removed.empty() && moved.empty() && ui_changes.empty(); }
    bool operator==(const FrameDiff&) const = default;
};

/// Equality of the structured lists, ignoring the free-text summary.
bool same_content(const FrameDiff& a, const FrameDiff& b);

/// Named rectangle (inclusive bounds) whose cells are reported as UI changes.
struct HudRegion {
    std::string name;
    int top = 0;
    int left = 0;
    int bottom = 0;
    int right = 0;

    bool contains(int row, int col) const { return row >= top && row <= bottom && col >= left && col <= right; }
};

inline constexpr int kBackgroundColor = 0;

/// Deterministic differ: components outside the HUD, matched across frames
/// by (color, size, shape); HUD cells become ui_changes.
FrameDiff programmatic_diff(const Observation& prev, const Observation& curr, std::span<const HudRegion> hud_regions,
                            int background = kBackgroundColor);

// Building blocks, shared with the simulator's authoritative differ.

std::vector<DiffObject> extract_objects(const Frame& frame, std::span<const HudRegion> hud_regions,
                                        int background = kBackgroundColor);

struct ObjectDelta {
    std::vector<DiffObject> added;
    std::vector<DiffObject> removed;
    std::vector<MovedObject> moved;
};

/// Pairs objects present in only one frame. Identical objects are unchanged;
/// same color/size/shape pairs become moves (smallest displacement first,
/// then row-major bbox position); the rest are added or removed.
ObjectDelta match_objects(std::span<const DiffObject> prev, std::span<const DiffObject> curr);

std::string region_change_description(int changed_cells, int before_non_background, int after_non_background);

/// "left", "up", "down-right by (2,3)", ...
std::string direction_phrase(int d_row, int d_col);

/// Deterministic summary template over the diff's lists.
std::string summarize(const FrameDiff& diff);

/// Sorts lists into canonical order and refreshes the summary.
void canonicalize(FrameDiff& diff);

/// Throws ValidationError on semantic violations (non-positive counts, loose bboxes, ...).
void validate(const FrameDiff& diff);

/// Canonical UTF-8 JSON, fixed key order, no whitespace.
std::string serialize_diff(const FrameDiff& diff);
nlohmann::ordered_json diff_to_json(const FrameDiff& diff);

/// Throws ParseError for malformed text, ValidationError for schema or invariant breaches.
FrameDiff parse_diff(std::string_view text);
FrameDiff diff_from_json(const nlohmann::json& j);

}  // namespace sensi
