#include "explorer.hpp"
#include "temp_dir.hpp"

#include "sensi/errors.hpp"
#include "sensi/keyquest.hpp"

#include <doctest.h>

#include <set>

using namespace sensi;
using namespace sensi::keyquest;
using sensi::testing::explore;

namespace {

const GameConfig& game() {
    static const GameConfig config = GameConfig::reference();
    return config;
}

nlohmann::json open_room(int energy) {
    std::vector<std::string> map(13, "#..........#");
    map.front() = map.back() = "############";
    map[1] = "#.P........#";
    map[9] = "#........*.#";
    return {{"game_id", "room"}, {"height", 16}, {"width", 12}, {"initial_energy", energy}, {"levels", {{{"map", map}}}}};
}

int pips(const Frame& f) {
    int n = 0;
    for (int r = 0; r < kHudRows; ++r)
        for (int c = 0; c < f.width(); ++c) n += f.at(0, r, c) == kPipColor;
    return n;
}

}  // namespace

TEST_CASE("reset shows the player at its start, game running") {
    KeyQuestEnv env;
    auto obs = env.reset();
    CHECK(obs.status == GameStatus::NotFinished);
    CHECK(obs.score == 0);
    CHECK(obs.turn_index == 0);
    const auto start = game().levels[0].player_start;
    CHECK(obs.frame.at(0, start.row, start.col) == kPlayerTopColor);
    CHECK(obs.frame.at(0, start.row + 1, start.col) == kPlayerBottomColor);
    CHECK_NOTHROW(obs.validate());
}

TEST_CASE("reset is deterministic") {
    KeyQuestEnv a, b;
    auto first = a.reset();
    a.step(ActionCommand::simple(ActionId::Action2));
    CHECK(a.reset() == first);
    CHECK(b.reset() == first);
}

TEST_CASE("the HUD shows one pip per energy unit") {
    for (int energy : {1, 7, 20, 24}) {
        KeyQuestEnv env(GameConfig::from_json(open_room(energy)));
        CHECK(pips(env.reset().frame) == energy);
    }
}

TEST_CASE("ACTION2 on open floor moves down one cell and costs one energy") {
    KeyQuestEnv env(GameConfig::from_json(open_room(20)));
    env.reset();
    const auto before = env.state();
    env.step(ActionCommand::simple(ActionId::Action2));
    CHECK(env.state().player == Pos{before.player.row + 1, before.player.col});
    CHECK(env.state().energy == before.energy - 1);
}

TEST_CASE("walking into a wall leaves the player in place and still costs energy") {
    KeyQuestEnv env(GameConfig::from_json(open_room(20)));
    env.reset();
    const auto before = env.state();
    env.step(ActionCommand::simple(ActionId::Action1));  // wall row sits right above the start
    CHECK(env.state().player == before.player);
    CHECK(env.state().energy == before.energy - 1);
    CHECK(env.last_events().blocked_by_wall);
}

TEST_CASE("the player never overlaps a wall in any reachable state") {
    explore(game(), [&](const State&, const ActionCommand&, const State& after, const StepEvents&) {
        const auto& lv = game().levels[after.level];
        for (auto p : player_cells(after))
            CHECK(std::find(lv.walls.begin(), lv.walls.end(), p) == lv.walls.end());
    });
}

TEST_CASE("the last unit of energy ends the game") {
    KeyQuestEnv env(GameConfig::from_json(open_room(1)));
    env.reset();
    auto obs = env.step(ActionCommand::simple(ActionId::Action4));
    CHECK(env.state().energy == 0);
    CHECK(obs.status == GameStatus::GameOver);
    CHECK_THROWS_AS(env.step(ActionCommand::simple(ActionId::Action4)), EnvStateError);
    CHECK(env.step(ActionCommand::reset()).status == GameStatus::NotFinished);
}

TEST_CASE("misuse of the environment") {
    KeyQuestEnv env;
    CHECK_THROWS_AS(env.step(ActionCommand::simple(ActionId::Action1)), EnvStateError);
    env.reset();
    CHECK_THROWS_AS(env.ground_truth_diff(), EnvStateError);
    CHECK_THROWS_AS(env.step(ActionCommand::click(99, 0)), ValidationError);
}

TEST_CASE("a no-op action changes only the energy HUD") {
    KeyQuestEnv env;
    auto before = env.reset();
    auto after = env.step(ActionCommand::simple(ActionId::Action7));
    auto truth = *env.ground_truth_diff();
    CHECK(truth.added.empty());
    CHECK(truth.removed.empty());
    CHECK(truth.moved.empty());
    REQUIRE(truth.ui_changes.size() == 1);
    CHECK(same_content(truth, programmatic_diff(before, after, env.hud_regions())));
}

TEST_CASE("a left move is the player's two cells moving (0,-1)") {
    KeyQuestEnv env;
    env.reset();
    env.step(ActionCommand::simple(ActionId::Action3));
    auto truth = *env.ground_truth_diff();
    REQUIRE(truth.moved.size() == 2);
    for (const auto& m : truth.moved) {
        CHECK(m.d_row() == 0);
        CHECK(m.d_col() == -1);
    }
}

TEST_CASE("ground truth agrees with the pixel differ on every reachable transition") {
    const auto hud = game().hud_regions();
    std::size_t transitions = 0, level_changes = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents&) {
        ++transitions;
        auto truth = entity_diff(game(), before, after);
        auto pixels = programmatic_diff(Observation{render_state(game(), before), before.score, before.status, 0},
                                         Observation{render_state(game(), after), after.score, after.status, 1}, hud);
        CHECK(same_content(truth, pixels));
        CHECK_NOTHROW(validate(truth));
        if (after.level != before.level) {
            ++level_changes;
            CHECK(truth.summary.find("level 1 -> 2") != std::string::npos);
        }
    });
    CHECK(transitions > 10000);
    CHECK(level_changes > 0);
}

TEST_CASE("every reachable frame is a valid observation of the configured size") {
    explore(game(), [&](const State&, const ActionCommand&, const State& after, const StepEvents&) {
        auto f = render_state(game(), after);
        CHECK(f.height() == game().height);
        CHECK(f.width() == game().width);
        CHECK_NOTHROW((Observation{f, after.score, after.status, 0}.validate()));
    });
}

TEST_CASE("bad game configs are rejected") {
    auto base = open_room(10);
    auto bad = base;
    bad["initial_energy"] = 0;
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad["initial_energy"] = 25;  // over the 2x12 HUD capacity
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad["levels"][0]["map"][4] = "#....?.....#";
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad["levels"][0]["map"][9] = "#..........#";
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad["levels"][0]["map"][5] = "#...a......#";
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad["levels"] = nlohmann::json::array();
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    bad = base;
    bad.erase("levels");
    CHECK_THROWS_AS(GameConfig::from_json(bad), ConfigError);
    CHECK_THROWS_AS(GameConfig::load("/nonexistent/game.json"), ConfigError);
}

TEST_CASE("game configs round-trip and load from disk") {
    auto config = GameConfig::load(sensi::testing::fixture_path("games/wide_room.json"));
    CHECK(config.width == 20);
    CHECK(config.initial_energy == 40);
    auto again = GameConfig::from_json(config.to_json());
    CHECK(again.to_json() == config.to_json());
    CHECK(GameConfig::from_json(game().to_json()).to_json() == game().to_json());
}

TEST_CASE("the reference game is winnable") {
    bool won = false;
    explore(game(), [&](const State&, const ActionCommand&, const State& after, const StepEvents&) {
        won |= after.status == GameStatus::Win;
    });
    CHECK(won);
}
