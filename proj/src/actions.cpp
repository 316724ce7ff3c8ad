#include "sensi/actions.hpp"

#include "sensi/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace sensi {

namespace {

constexpr std::array<std::string_view, 8> kActionNames = {
    "RESET", "ACTION1", "ACTION2", "ACTION3", "ACTION4", "ACTION5", "ACTION6", "ACTION7",
};

}  // namespace

std::string_view to_string(ActionId id) { return kActionNames[static_cast<std::size_t>(id)]; }

std::optional<ActionId> parse_action_id(std::string_view text) {
    std::string upper(text);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (std::size_t i = 0; i < kActionNames.size(); ++i) {
        if (upper == kActionNames[i]) return static_cast<ActionId>(i);
    }
    return std::nullopt;
}

void ActionCommand::validate(std::optional<int> width, std::optional<int> height) const {
    if (id == ActionId::Action6) {
        if (!coords) throw ValidationError("ACTION6 requires coords");
        if (width && height && (coords->x < 0 || coords->x >= *width || coords->y < 0 || coords->y >= *height)) {
            throw ValidationError("ACTION6 coords (" + std::to_string(coords->x) + "," + std::to_string(coords->y) +
                                  ") outside " + std::to_string(*width) + "x" + std::to_string(*height) + " frame");
        }
    } else if (coords) {
        throw ValidationError(std::string(to_string(id)) + " does not take coords");
    }
}

std::string ActionCommand::label() const {
    std::string out(to_string(id));
    if (coords) out += "(" + std::to_string(coords->x) + "," + std::to_string(coords->y) + ")";
    return out;
}

nlohmann::json to_json(const ActionCommand& cmd) {
    nlohmann::json j = {{"action_id", std::string(to_string(cmd.id))}};
    if (cmd.coords) j["coords"] = {{"x", cmd.coords->x}, {"y", cmd.coords->y}};
    return j;
}

ActionCommand action_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("action_id") || !j["action_id"].is_string()) {
        throw ValidationError("action must be an object with a string action_id");
    }
    auto id = parse_action_id(j["action_id"].get<std::string>());
    if (!id) throw ValidationError("unknown action_id '" + j["action_id"].get<std::string>() + "'");
    ActionCommand cmd{*id, std::nullopt};
    if (j.contains("coords") && !j["coords"].is_null()) {
        const auto& c = j["coords"];
        if (!c.is_object() || !c.contains("x") || !c.contains("y") || !c["x"].is_number_integer() ||
            !c["y"].is_number_integer()) {
            throw ValidationError("coords must be {x: int, y: int}");
        }
        cmd.coords = Coords{c["x"].get<int>(), c["y"].get<int>()};
    }
    cmd.validate();
    return cmd;
}

}  // namespace sensi
