#include "sensi/claims.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace sensi::keyquest {

std::string_view to_string(Truth truth) {
    switch (truth) {
    case Truth::Consistent: return "consistent";
    case Truth::Contradicted: return "contradicted";
    case Truth::Unverifiable: return "unverifiable";
    }
    return "unverifiable";
}

namespace claim {

std::string moves(ActionId id, std::string_view direction, int cells) {
    std::string amount = cells == 1 ? "one cell" : std::to_string(cells) + " cells";
    return std::string(to_string(id)) + " moves the player " + amount + " " + std::string(direction);
}

std::string no_effect(ActionId id) { return std::string(to_string(id)) + " does nothing except use energy"; }

}  // namespace claim

const std::vector<std::string>& reference_claims() {
    static const std::vector<std::string> claims = {
        claim::kResetStarts,
        claim::kPlayerIdentity,
        claim::moves(ActionId::Action1, "up"),
        claim::moves(ActionId::Action2, "down"),
        claim::moves(ActionId::Action3, "left"),
        claim::moves(ActionId::Action4, "right"),
        claim::kEnergyCost,
        claim::kGeneratorMatches,
        claim::kBumpGenerator,
        claim::kKeyConsumed,
        claim::kDoorVanishes,
        claim::kDotRefills,
        claim::kEnergyOut,
        claim::kStarsCollectible,
        claim::kAllStarsLevel,
    };
    return claims;
}

std::string_view direction_word(int d_row, int d_col) {
    if (d_row == -1 && d_col == 0) return "up";
    if (d_row == 1 && d_col == 0) return "down";
    if (d_row == 0 && d_col == -1) return "left";
    if (d_row == 0 && d_col == 1) return "right";
    return {};
}

namespace {

std::string normalize(std::string_view text) {
    std::string s;
    for (char c : text) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) s.pop_back();
    auto b = s.find_first_not_of(' ');
    return b == std::string::npos ? std::string() : s.substr(b);
}

int amount(const std::string& word) { return word == "one" ? 1 : std::stoi(word); }

std::string_view true_direction(int action) {
    switch (action) {
    case 1: return "up";
    case 2: return "down";
    case 3: return "left";
    case 4: return "right";
    default: return {};
    }
}

}  // namespace

Truth check_claim(std::string_view text) {
    static const std::regex move_re(R"(^action([1-7]) moves the player (one|\d+) (?:cell|cells|pixel|pixels) (up|down|left|right)$)");
    static const std::regex noop_re(R"(^action([1-7]) (?:does nothing|has no effect)(?: except use energy)?$)");
    static const std::regex cost_re(R"(^every action uses (one|\d+) energy pips?(?: from the top bar)?$)");
    static const std::regex player_re(R"(^the player is the (\w+) block with a (\w+) top$)");

    auto s = normalize(text);
    std::smatch m;
    if (std::regex_match(s, m, move_re)) {
        int action = std::stoi(m[1]);
        auto dir = true_direction(action);
        return !dir.empty() && amount(m[2]) == 1 && m[3].str() == dir ? Truth::Consistent : Truth::Contradicted;
    }
    if (std::regex_match(s, m, noop_re)) return std::stoi(m[1]) >= 5 ? Truth::Consistent : Truth::Contradicted;
    if (std::regex_match(s, m, cost_re)) return amount(m[1]) == 1 ? Truth::Consistent : Truth::Contradicted;
    if (std::regex_match(s, m, player_re))
        return m[1] == "blue" && m[2] == "red" ? Truth::Consistent : Truth::Contradicted;
    if (s.find("decorative") != std::string::npos) return Truth::Contradicted;
    for (const char* t : {claim::kResetStarts, claim::kGeneratorMatches, claim::kBumpGenerator, claim::kKeyConsumed,
                          claim::kDoorVanishes, claim::kDotRefills, claim::kEnergyOut, claim::kStarsCollectible,
                          claim::kAllStarsLevel}) {
        if (s == normalize(t)) return Truth::Consistent;
    }
    return Truth::Unverifiable;
}

}  // namespace sensi::keyquest
