#pragma once

// KeyQuest: a small deterministic key-and-door puzzle used as the reference
// environment. Rules:
//   - the player is a two-cell platform (red top over blue bottom)
//   - ACTION1..4 move it one cell up/down/left/right; walls block
//   - every non-RESET action costs one energy pip, shown in the top HUD rows
//   - bumping a key generator puts a key of its color in the inventory row
//   - bumping a door while holding its key consumes the key and opens the door
//   - energy dots add a bonus, stars are collected by walking onto them
//   - collecting every star completes the level (+1 score); the last level wins
//   - energy reaching zero is game over
//   - ACTION5..7 are no-ops apart from their energy cost

#include "sensi/environment.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sensi::keyquest {

inline constexpr int kWallColor = 5;
inline constexpr int kPlayerTopColor = 2;
inline constexpr int kPlayerBottomColor = 1;
inline constexpr int kStarColor = 4;
inline constexpr int kEnergyDotColor = 7;
inline constexpr int kPipColor = 8;
inline constexpr int kHudRows = 2;

/// Map letters a/b/c (generators) and A/B/C (doors) map to these key colors.
inline constexpr int kKeyColors[] = {3, 6, 9};

struct Pos {
    int row = 0;
    int col = 0;
    auto operator<=>(const Pos&) const = default;
};

struct KeyGenerator {
    Pos pos;
    int color = 0;
};

struct Door {
    std::vector<Pos> cells;
    int color = 0;
};

/// Playfield map legend: '#' wall, '.' floor, 'P' player top (the cell below
/// must be floor), '*' star, 'o' energy dot, a/b/c generators, A/B/C doors.
/// Positions are absolute frame coordinates.
struct LevelSpec {
    std::vector<std::string> map;

    std::vector<Pos> walls;
    Pos player_start;
    std::vector<KeyGenerator> key_generators;
    std::vector<Door> doors;
    std::vector<Pos> stars;
    std::vector<Pos> energy_dots;
    std::vector<std::vector<Pos>> wall_components;
};

struct GameConfig {
    std::string game_id = "keyquest";
    int height = 16;
    int width = 16;
    int initial_energy = 22;
    int energy_dot_bonus = 5;
    std::uint64_t rng_seed = 0;  // reserved
    std::vector<LevelSpec> levels;

    int playfield_top() const { return kHudRows; }
    int inventory_row() const { return height - 1; }
    int energy_capacity() const { return kHudRows * width; }
    std::vector<HudRegion> hud_regions() const;

    /// Parses every level map and checks the invariants. Throws ConfigError.
    void finalize();

    static GameConfig reference();
    static GameConfig from_json(const nlohmann::json& j);
    static GameConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

struct State {
    GameStatus status = GameStatus::NotPlayed;
    int level = 0;
    int score = 0;
    int energy = 0;
    Pos player;  // top cell
    std::vector<int> inventory;
    std::vector<bool> stars_left;
    std::vector<bool> dots_left;
    std::vector<bool> doors_closed;

    /// Compact canonical encoding, used as a hash key by exhaustive searches.
    std::string key() const;
    bool operator==(const State&) const = default;
};

/// What happened during one transition.
struct StepEvents {
    bool moved = false;
    bool blocked_by_wall = false;
    std::vector<int> keys_generated;
    std::vector<int> doors_opened;  // door indices in the pre-step level
    std::vector<int> keys_consumed;
    int stars_collected = 0;
    int dots_collected = 0;
    int energy_bonus = 0;
    bool level_completed = false;
};

State initial_state(const GameConfig& config);
/// Pure transition for non-RESET actions from a NOT_FINISHED state.
State advance(const GameConfig& config, const State& state, const ActionCommand& cmd, StepEvents* events = nullptr);
Frame render_state(const GameConfig& config, const State& state);
std::vector<Pos> player_cells(const State& state);

/// Diff computed from entity state (never from pixels).
FrameDiff entity_diff(const GameConfig& config, const State& before, const State& after);

class KeyQuestEnv final : public Environment {
public:
    explicit KeyQuestEnv(GameConfig config = GameConfig::reference());

    Observation reset() override;
    Observation step(const ActionCommand& cmd) override;
    std::optional<FrameDiff> ground_truth_diff() const override;
    bool has_ground_truth() const override { return true; }
    std::vector<HudRegion> hud_regions() const override { return config_.hud_regions(); }
    std::string game_id() const override { return config_.game_id; }

    const State& state() const { return state_; }
    const GameConfig& config() const { return config_; }
    const StepEvents& last_events() const { return last_events_; }
    Observation observation() const;

private:
    GameConfig config_;
    State state_;
    int turn_ = 0;
    bool stepped_ = false;
    State prev_state_;
    StepEvents last_events_;
};

}  // namespace sensi::keyquest
