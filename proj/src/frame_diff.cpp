#include "sensi/frame_diff.hpp"

#include "sensi/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <set>
#include <tuple>

namespace sensi {

namespace {

bool in_hud(std::span<const HudRegion> hud, int row, int col) {
    return std::any_of(hud.begin(), hud.end(), [&](const HudRegion& r) { return r.contains(row, col); });
}

std::vector<Cell> normal_form(const DiffObject& obj) {
    std::vector<Cell> shape;
    shape.reserve(obj.cells.size());
    for (const Cell& c : obj.cells) shape.push_back({c.layer, c.row - obj.bbox.top, c.col - obj.bbox.left});
    return shape;
}

int min_layer(const DiffObject& obj) { return obj.cells.empty() ? 0 : obj.cells.front().layer; }

bool object_less(const DiffObject& a, const DiffObject& b) {
    return std::tie(a.bbox.top, a.bbox.left, a.color, a.cells) < std::tie(b.bbox.top, b.bbox.left, b.color, b.cells);
}

bool moved_less(const MovedObject& a, const MovedObject& b) {
    return std::tie(a.prev_bbox, a.new_bbox, a.color) < std::tie(b.prev_bbox, b.new_bbox, b.color);
}

std::string plural(std::size_t n, const char* word) {
    return std::to_string(n) + " " + word + (n == 1 ? "" : "s");
}

}  // namespace

DiffObject DiffObject::from_cells(int color, std::vector<Cell> cells) {
    DiffObject obj;
    obj.color = color;
    std::sort(cells.begin(), cells.end());
    obj.cells = std::move(cells);
    obj.cell_count = static_cast<int>(obj.cells.size());
    if (!obj.cells.empty()) {
        obj.bbox = {std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::min(),
                    std::numeric_limits<int>::min()};
        for (const Cell& c : obj.cells) {
            obj.bbox.top = std::min(obj.bbox.top, c.row);
            obj.bbox.left = std::min(obj.bbox.left, c.col);
            obj.bbox.bottom = std::max(obj.bbox.bottom, c.row);
            obj.bbox.right = std::max(obj.bbox.right, c.col);
        }
    }
    return obj;
}

bool same_content(const FrameDiff& a, const FrameDiff& b) {
    return a.added == b.added && a.removed == b.removed && a.moved == b.moved && a.ui_changes == b.ui_changes;
}

std::vector<DiffObject> extract_objects(const Frame& frame, std::span<const HudRegion> hud_regions, int background) {
    std::vector<DiffObject> objects;
    std::vector<char> seen(frame.cells().size(), 0);
    auto flat = [&](int l, int r, int c) { return (static_cast<std::size_t>(l) * frame.height() + r) * frame.width() + c; };
    std::vector<Cell> stack;
    for (int l = 0; l < frame.layers(); ++l) {
        for (int r = 0; r < frame.height(); ++r) {
            for (int c = 0; c < frame.width(); ++c) {
                const int color = frame.at(l, r, c);
                if (color == background || seen[flat(l, r, c)] || in_hud(hud_regions, r, c)) continue;
                std::vector<Cell> cells;
                stack.assign(1, {l, r, c});
                seen[flat(l, r, c)] = 1;
                while (!stack.empty()) {
                    const Cell cur = stack.back();
                    stack.pop_back();
                    cells.push_back(cur);
                    constexpr int kDr[] = {-1, 1, 0, 0};
                    constexpr int kDc[] = {0, 0, -1, 1};
                    for (int k = 0; k < 4; ++k) {
                        const int nr = cur.row + kDr[k];
                        const int nc = cur.col + kDc[k];
                        if (!frame.in_bounds(nr, nc) || seen[flat(l, nr, nc)]) continue;
                        if (frame.at(l, nr, nc) != color || in_hud(hud_regions, nr, nc)) continue;
                        seen[flat(l, nr, nc)] = 1;
                        stack.push_back({l, nr, nc});
                    }
                }
                objects.push_back(DiffObject::from_cells(color, std::move(cells)));
            }
        }
    }
    std::sort(objects.begin(), objects.end(), object_less);
    return objects;
}

ObjectDelta match_objects(std::span<const DiffObject> prev, std::span<const DiffObject> curr) {
    std::set<std::pair<int, std::vector<Cell>>> prev_keys, curr_keys;
    for (const auto& o : prev) prev_keys.emplace(o.color, o.cells);
    for (const auto& o : curr) curr_keys.emplace(o.color, o.cells);

    std::vector<const DiffObject*> gone, fresh;
    for (const auto& o : prev) {
        if (!curr_keys.count({o.color, o.cells})) gone.push_back(&o);
    }
    for (const auto& o : curr) {
        if (!prev_keys.count({o.color, o.cells})) fresh.push_back(&o);
    }

    using Pos = std::tuple<int, int, int>;
    struct Candidate {
        int distance;
        Pos lo, hi;
        std::size_t gone_idx, fresh_idx;
    };
    std::vector<std::vector<Cell>> gone_shapes, fresh_shapes;
    for (const auto* o : gone) gone_shapes.push_back(normal_form(*o));
    for (const auto* o : fresh) fresh_shapes.push_back(normal_form(*o));

    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < gone.size(); ++i) {
        for (std::size_t j = 0; j < fresh.size(); ++j) {
            const auto& p = *gone[i];
            const auto& c = *fresh[j];
            if (p.color != c.color || p.cell_count != c.cell_count || gone_shapes[i] != fresh_shapes[j]) continue;
            const int distance = std::abs(c.bbox.top - p.bbox.top) + std::abs(c.bbox.left - p.bbox.left);
            const Pos pp{p.bbox.top, p.bbox.left, min_layer(p)};
            const Pos cp{c.bbox.top, c.bbox.left, min_layer(c)};
            candidates.push_back({distance, std::min(pp, cp), std::max(pp, cp), i, j});
        }
    }
    // The key is symmetric in (prev, curr) so diff(a,b) and diff(b,a) pair the same objects.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.distance, a.lo, a.hi, a.gone_idx, a.fresh_idx) <
               std::tie(b.distance, b.lo, b.hi, b.gone_idx, b.fresh_idx);
    });

    ObjectDelta delta;
    std::vector<char> gone_used(gone.size(), 0), fresh_used(fresh.size(), 0);
    for (const auto& cand : candidates) {
        if (gone_used[cand.gone_idx] || fresh_used[cand.fresh_idx]) continue;
        gone_used[cand.gone_idx] = fresh_used[cand.fresh_idx] = 1;
        const auto& p = *gone[cand.gone_idx];
        const auto& c = *fresh[cand.fresh_idx];
        delta.moved.push_back({p.bbox, c.bbox, p.color, p.cell_count});
    }
    for (std::size_t i = 0; i < gone.size(); ++i) {
        if (!gone_used[i]) delta.removed.push_back(*gone[i]);
    }
    for (std::size_t j = 0; j < fresh.size(); ++j) {
        if (!fresh_used[j]) delta.added.push_back(*fresh[j]);
    }
    std::sort(delta.added.begin(), delta.added.end(), object_less);
    std::sort(delta.removed.begin(), delta.removed.end(), object_less);
    std::sort(delta.moved.begin(), delta.moved.end(), moved_less);
    return delta;
}

std::string region_change_description(int changed_cells, int before_non_background, int after_non_background) {
    return plural(static_cast<std::size_t>(changed_cells), "cell") + " changed, " +
           std::to_string(before_non_background) + " -> " + std::to_string(after_non_background) +
           " non-background cells";
}

std::string direction_phrase(int d_row, int d_col) {
    std::string word;
    if (d_row < 0) word = "up";
    if (d_row > 0) word = "down";
    if (d_col != 0) word += std::string(word.empty() ? "" : "-") + (d_col < 0 ? "left" : "right");
    if (word.empty()) return "in place";
    if ((d_row != 0 && d_col != 0) || std::abs(d_row) > 1 || std::abs(d_col) > 1) {
        word += " by (" + std::to_string(d_row) + "," + std::to_string(d_col) + ")";
    }
    return word;
}

std::string summarize(const FrameDiff& diff) {
    if (diff.is_empty()) return "no change";
    std::vector<std::string> parts;
    for (const auto& m : diff.moved) parts.push_back("object shifted " + direction_phrase(m.d_row(), m.d_col()));
    if (!diff.added.empty()) parts.push_back(plural(diff.added.size(), "object") + " added");
    if (!diff.removed.empty()) parts.push_back(plural(diff.removed.size(), "object") + " removed");
    for (const auto& u : diff.ui_changes) parts.push_back(u.region_name + " changed");
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "; " : "") + parts[i];
    return out;
}

void canonicalize(FrameDiff& diff) {
    std::sort(diff.added.begin(), diff.added.end(), object_less);
    std::sort(diff.removed.begin(), diff.removed.end(), object_less);
    std::sort(diff.moved.begin(), diff.moved.end(), moved_less);
    diff.summary = summarize(diff);
}

FrameDiff programmatic_diff(const Observation& prev, const Observation& curr, std::span<const HudRegion> hud_regions,
                            int background) {
    if (!prev.frame.same_shape(curr.frame)) {
        throw ValidationError("frame dimension mismatch: previous " + prev.frame.shape_string() + " vs current " +
                              curr.frame.shape_string());
    }
    const auto before = extract_objects(prev.frame, hud_regions, background);
    const auto after = extract_objects(curr.frame, hud_regions, background);
    ObjectDelta delta = match_objects(before, after);

    FrameDiff diff;
    diff.added = std::move(delta.added);
    diff.removed = std::move(delta.removed);
    diff.moved = std::move(delta.moved);
    const Frame& a = prev.frame;
    const Frame& b = curr.frame;
    for (const auto& region : hud_regions) {
        int changed = 0, before_count = 0, after_count = 0;
        for (int l = 0; l < a.layers(); ++l) {
            for (int r = std::max(region.top, 0); r <= std::min(region.bottom, a.height() - 1); ++r) {
                for (int c = std::max(region.left, 0); c <= std::min(region.right, a.width() - 1); ++c) {
                    changed += a.at(l, r, c) != b.at(l, r, c);
                    before_count += a.at(l, r, c) != background;
                    after_count += b.at(l, r, c) != background;
                }
            }
        }
        if (changed > 0) {
            diff.ui_changes.push_back({region.name, region_change_description(changed, before_count, after_count)});
        }
    }
    diff.summary = summarize(diff);
    return diff;
}

void validate(const FrameDiff& diff) {
    auto check_object = [](const DiffObject& o, const char* list) {
        const std::string where = std::string(list) + " object";
        if (o.color < 0 || o.color > kMaxColor) throw ValidationError(where + " has color outside [0,15]");
        if (o.cell_count < 1) throw ValidationError(where + " has cell_count " + std::to_string(o.cell_count));
        if (static_cast<int>(o.cells.size()) != o.cell_count) {
            throw ValidationError(where + " cell_count " + std::to_string(o.cell_count) + " != " +
                                  std::to_string(o.cells.size()) + " cells");
        }
        std::set<Cell> unique(o.cells.begin(), o.cells.end());
        if (unique.size() != o.cells.size()) throw ValidationError(where + " repeats a cell");
        for (const Cell& c : o.cells) {
            if (c.layer < 0 || c.row < 0 || c.col < 0) throw ValidationError(where + " has a negative coordinate");
        }
        if (DiffObject::from_cells(o.color, o.cells).bbox != o.bbox) {
            throw ValidationError(where + " bbox does not tightly bound its cells");
        }
    };
    auto check_bbox = [](const BBox& b, const char* what) {
        if (b.top < 0 || b.left < 0 || b.bottom < b.top || b.right < b.left) {
            throw ValidationError(std::string("moved object has invalid ") + what);
        }
    };
    for (const auto& o : diff.added) check_object(o, "added");
    for (const auto& o : diff.removed) check_object(o, "removed");
    std::set<std::pair<int, BBox>> added_keys;
    for (const auto& o : diff.added) added_keys.emplace(o.color, o.bbox);
    for (const auto& m : diff.moved) {
        if (m.color < 0 || m.color > kMaxColor) throw ValidationError("moved object has color outside [0,15]");
        if (m.cell_count < 1) throw ValidationError("moved object has cell_count " + std::to_string(m.cell_count));
        check_bbox(m.prev_bbox, "prev_bbox");
        check_bbox(m.new_bbox, "new_bbox");
        if (m.prev_bbox.bottom - m.prev_bbox.top != m.new_bbox.bottom - m.new_bbox.top ||
            m.prev_bbox.right - m.prev_bbox.left != m.new_bbox.right - m.new_bbox.left) {
            throw ValidationError("moved object changes bbox size");
        }
        if (added_keys.count({m.color, m.new_bbox})) throw ValidationError("object appears in both added and moved");
    }
    for (const auto& u : diff.ui_changes) {
        if (u.region_name.empty()) throw ValidationError("ui change without region_name");
    }
}

nlohmann::ordered_json diff_to_json(const FrameDiff& diff) {
    auto bbox_json = [](const BBox& b) { return nlohmann::ordered_json::array({b.top, b.left, b.bottom, b.right}); };
    auto object_json = [&](const DiffObject& o) {
        nlohmann::ordered_json j;
        j["color"] = o.color;
        j["cell_count"] = o.cell_count;
        j["bbox"] = bbox_json(o.bbox);
        auto cells = nlohmann::ordered_json::array();
        for (const Cell& c : o.cells) cells.push_back({c.layer, c.row, c.col});
        j["cells"] = std::move(cells);
        return j;
    };
    nlohmann::ordered_json j;
    j["added"] = nlohmann::ordered_json::array();
    for (const auto& o : diff.added) j["added"].push_back(object_json(o));
    j["removed"] = nlohmann::ordered_json::array();
    for (const auto& o : diff.removed) j["removed"].push_back(object_json(o));
    j["moved"] = nlohmann::ordered_json::array();
    for (const auto& m : diff.moved) {
        nlohmann::ordered_json mj;
        mj["color"] = m.color;
        mj["cell_count"] = m.cell_count;
        mj["prev_bbox"] = bbox_json(m.prev_bbox);
        mj["new_bbox"] = bbox_json(m.new_bbox);
        j["moved"].push_back(std::move(mj));
    }
    j["ui_changes"] = nlohmann::ordered_json::array();
    for (const auto& u : diff.ui_changes) {
        nlohmann::ordered_json uj;
        uj["region_name"] = u.region_name;
        uj["description"] = u.description;
        j["ui_changes"].push_back(std::move(uj));
    }
    j["summary"] = diff.summary;
    return j;
}

std::string serialize_diff(const FrameDiff& diff) { return diff_to_json(diff).dump(); }

namespace {

int get_int(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(where + " missing required field '" + key + "'");
    if (!j[key].is_number_integer()) throw ValidationError(where + " field '" + key + "' must be an integer");
    return j[key].get<int>();
}

BBox get_bbox(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(where + " missing required field '" + key + "'");
    const auto& b = j[key];
    if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const auto& v) { return v.is_number_integer(); })) {
        throw ValidationError(where + " field '" + key + "' must be [top, left, bottom, right]");
    }
    return {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
}

const nlohmann::json& get_list(const nlohmann::json& j, const char* key) {
    static const nlohmann::json kEmpty = nlohmann::json::array();
    if (!j.contains(key)) return kEmpty;
    if (!j[key].is_array()) throw ValidationError(std::string("field '") + key + "' must be a list");
    return j[key];
}

DiffObject object_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    DiffObject o;
    o.color = get_int(j, "color", where);
    o.cell_count = get_int(j, "cell_count", where);
    o.bbox = get_bbox(j, "bbox", where);
    if (!j.contains("cells") || !j["cells"].is_array()) throw ValidationError(where + " missing list field 'cells'");
    for (const auto& c : j["cells"]) {
        if (!c.is_array() || c.size() != 3 ||
            !std::all_of(c.begin(), c.end(), [](const auto& v) { return v.is_number_integer(); })) {
            throw ValidationError(where + " cells must be [layer, row, col] triples");
        }
        o.cells.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
    }
    std::sort(o.cells.begin(), o.cells.end());
    return o;
}

}  // namespace

FrameDiff diff_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("diff must be a JSON object");
    if (!j.contains("summary")) throw ValidationError("diff missing required field 'summary'");
    if (!j["summary"].is_string()) throw ValidationError("diff field 'summary' must be a string");
    FrameDiff diff;
    const auto& added = get_list(j, "added");
    for (std::size_t i = 0; i < added.size(); ++i) {
        diff.added.push_back(object_from_json(added[i], "added[" + std::to_string(i) + "]"));
    }
    const auto& removed = get_list(j, "removed");
    for (std::size_t i = 0; i < removed.size(); ++i) {
        diff.removed.push_back(object_from_json(removed[i], "removed[" + std::to_string(i) + "]"));
    }
    const auto& moved = get_list(j, "moved");
    for (std::size_t i = 0; i < moved.size(); ++i) {
        const std::string where = "moved[" + std::to_string(i) + "]";
        if (!moved[i].is_object()) throw ValidationError(where + " must be an object");
        MovedObject m;
        m.color = get_int(moved[i], "color", where);
        m.cell_count = get_int(moved[i], "cell_count", where);
        m.prev_bbox = get_bbox(moved[i], "prev_bbox", where);
        m.new_bbox = get_bbox(moved[i], "new_bbox", where);
        diff.moved.push_back(m);
    }
    const auto& ui = get_list(j, "ui_changes");
    for (std::size_t i = 0; i < ui.size(); ++i) {
        const std::string where = "ui_changes[" + std::to_string(i) + "]";
        if (!ui[i].is_object() || !ui[i].contains("region_name") || !ui[i]["region_name"].is_string() ||
            !ui[i].contains("description") || !ui[i]["description"].is_string()) {
            throw ValidationError(where + " needs string fields region_name and description");
        }
        diff.ui_changes.push_back({ui[i]["region_name"].get<std::string>(), ui[i]["description"].get<std::string>()});
    }
    diff.summary = j["summary"].get<std::string>();
    validate(diff);
    return diff;
}

FrameDiff parse_diff(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed diff JSON: ") + e.what(), e.byte);
    }
    return diff_from_json(j);
}

}  // namespace sensi
