#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace sensi {

enum class ActionId { Reset, Action1, Action2, Action3, Action4, Action5, Action6, Action7 };

std::string_view to_string(ActionId id);
/// Accepts "RESET" and "ACTION1".."ACTION7" (case-insensitive).
std::optional<ActionId> parse_action_id(std::string_view text);

struct Coords {
    int x = 0;
    int y = 0;
    bool operator==(const Coords&) const = default;
};

struct ActionCommand {
    ActionId id = ActionId::Reset;
    std::optional<Coords> coords;  // present exactly for ACTION6

    static ActionCommand reset() { return {}; }
    static ActionCommand simple(ActionId id) { return {id, std::nullopt}; }
    static ActionCommand click(int x, int y) { return {ActionId::Action6, Coords{x, y}}; }

    bool is_reset() const { return id == ActionId::Reset; }

    /// Throws ValidationError when coords are missing for ACTION6, present
    /// for anything else, or (when bounds are given) outside the frame.
    void validate(std::optional<int> width = std::nullopt, std::optional<int> height = std::nullopt) const;

    std::string label() const;

    bool operator==(const ActionCommand&) const = default;
};

nlohmann::json to_json(const ActionCommand& cmd);
/// Wire form `{action_id, coords?}`; coords are `{x, y}`.
ActionCommand action_from_json(const nlohmann::json& j);

}  // namespace sensi
