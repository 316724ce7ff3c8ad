#pragma once

// A small grammar of statements about KeyQuest and their truth value.
// Statements outside the grammar are unverifiable.

#include "sensi/actions.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace sensi::keyquest {

enum class Truth { Consistent, Contradicted, Unverifiable };
std::string_view to_string(Truth truth);

namespace claim {
inline constexpr const char* kResetStarts = "RESET starts a new game";
inline constexpr const char* kPlayerIdentity = "The player is the blue block with a red top";
inline constexpr const char* kEnergyCost = "Every action uses one energy pip from the top bar";
inline constexpr const char* kGeneratorMatches = "A key generator makes keys that match a door";
inline constexpr const char* kBumpGenerator = "Bumping into a key generator adds a key of its color to the inventory";
inline constexpr const char* kKeyConsumed = "Opening a door uses up the matching key";
inline constexpr const char* kDoorVanishes = "An opened door vanishes";
inline constexpr const char* kDotRefills = "Picking up an energy dot refills energy";
inline constexpr const char* kEnergyOut = "The game is over when energy runs out";
inline constexpr const char* kStarsCollectible = "Stars can be collected";
inline constexpr const char* kAllStarsLevel = "Collecting every star finishes the level";
inline constexpr const char* kDecorativeBar = "The top bar is a decorative border pattern";

/// "ACTION3 moves the player one cell left"; `cells` > 1 uses digits.
std::string moves(ActionId id, std::string_view direction, int cells = 1);
/// "ACTION5 does nothing except use energy"
std::string no_effect(ActionId id);
}  // namespace claim

/// The fifteen statements the reference game is built to make true, in order.
const std::vector<std::string>& reference_claims();

/// "up", "down", "left", "right" for unit axis moves, empty otherwise.
std::string_view direction_word(int d_row, int d_col);

Truth check_claim(std::string_view text);

}  // namespace sensi::keyquest
