// Each reference statement is checked against every reachable transition of
// the reference game, then against the claim checker.

#include "explorer.hpp"

#include "sensi/claims.hpp"
#include "sensi/keyquest.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace sensi;
using namespace sensi::keyquest;
using sensi::testing::explore;

namespace {

const GameConfig& game() {
    static const GameConfig config = GameConfig::reference();
    return config;
}

int count_color(const Frame& f, int color, int row_lo, int row_hi) {
    int n = 0;
    for (int r = row_lo; r <= row_hi; ++r)
        for (int c = 0; c < f.width(); ++c) n += f.at(0, r, c) == color;
    return n;
}

int count_true(const std::vector<bool>& v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

void check_move(ActionId id, int dr, int dc, const char* word) {
    CHECK(check_claim(claim::moves(id, word)) == Truth::Consistent);
    std::size_t moves = 0;
    explore(game(), [&](const State& before, const ActionCommand& a, const State& after, const StepEvents& ev) {
        if (a.id != id) return;
        if (ev.moved) {
            ++moves;
            if (ev.level_completed) return;  // the next level's start position replaces the player
            CHECK(after.player.row - before.player.row == dr);
            CHECK(after.player.col - before.player.col == dc);
        } else {
            CHECK(after.player == before.player);
        }
    });
    CHECK(moves > 0);
}

}  // namespace

TEST_CASE("fact: RESET starts a new game") {
    CHECK(check_claim(claim::kResetStarts) == Truth::Consistent);
    KeyQuestEnv env;
    const auto fresh = env.reset();
    CHECK(fresh.status == GameStatus::NotFinished);
    std::mt19937 rng(11);
    const auto& actions = sensi::testing::non_reset_actions();
    for (int trial = 0; trial < 200; ++trial) {
        env.reset();
        const int length = static_cast<int>(rng() % 40);
        for (int i = 0; i < length && env.state().status == GameStatus::NotFinished; ++i)
            env.step(actions[rng() % actions.size()]);
        auto obs = env.step(ActionCommand::reset());
        CHECK(obs == fresh);
        CHECK(env.state() == initial_state(game()));
    }
}

TEST_CASE("fact: the player is the blue block with a red top") {
    CHECK(check_claim(claim::kPlayerIdentity) == Truth::Consistent);
    explore(game(), [&](const State&, const ActionCommand&, const State& after, const StepEvents&) {
        const auto frame = render_state(game(), after);
        CHECK(frame.at(0, after.player.row, after.player.col) == kPlayerTopColor);
        CHECK(frame.at(0, after.player.row + 1, after.player.col) == kPlayerBottomColor);
        const int top = game().playfield_top(), bottom = game().inventory_row() - 1;
        CHECK(count_color(frame, kPlayerTopColor, top, bottom) == 1);
        CHECK(count_color(frame, kPlayerBottomColor, top, bottom) == 1);
    });
}

TEST_CASE("fact: ACTION1 moves the player one cell up") { check_move(ActionId::Action1, -1, 0, "up"); }
TEST_CASE("fact: ACTION2 moves the player one cell down") { check_move(ActionId::Action2, 1, 0, "down"); }
TEST_CASE("fact: ACTION3 moves the player one cell left") { check_move(ActionId::Action3, 0, -1, "left"); }
TEST_CASE("fact: ACTION4 moves the player one cell right") { check_move(ActionId::Action4, 0, 1, "right"); }

TEST_CASE("fact: every action uses one energy pip from the top bar") {
    CHECK(check_claim(claim::kEnergyCost) == Truth::Consistent);
    CHECK(check_claim(claim::kDecorativeBar) == Truth::Contradicted);
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        const int expected = std::max(0, before.energy - 1 + ev.energy_bonus);
        CHECK(after.energy == expected);
        const auto frame = render_state(game(), after);
        const int pips = count_color(frame, kPipColor, 0, kHudRows - 1);
        CHECK(pips == std::min(after.energy, game().energy_capacity()));
    });
}

TEST_CASE("fact: a key generator makes keys that match a door") {
    CHECK(check_claim(claim::kGeneratorMatches) == Truth::Consistent);
    for (const auto& level : game().levels)
        for (const auto& g : level.key_generators)
            CHECK(std::any_of(level.doors.begin(), level.doors.end(), [&](const Door& d) { return d.color == g.color; }));
    std::size_t keys = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State&, const StepEvents& ev) {
        const auto& level = game().levels[before.level];
        for (int color : ev.keys_generated) {
            ++keys;
            CHECK(std::any_of(level.doors.begin(), level.doors.end(), [&](const Door& d) { return d.color == color; }));
        }
    });
    CHECK(keys > 0);
}

TEST_CASE("fact: bumping into a key generator adds a key of its color to the inventory") {
    CHECK(check_claim(claim::kBumpGenerator) == Truth::Consistent);
    std::size_t bumps = 0;
    explore(game(), [&](const State& before, const ActionCommand& a, const State& after, const StepEvents& ev) {
        if (ev.keys_generated.empty()) return;
        ++bumps;
        CHECK_FALSE(ev.moved);
        CHECK(after.player == before.player);
        CHECK(after.inventory.size() == before.inventory.size() + ev.keys_generated.size());
        // The generator sits in the direction of travel next to one of the player's cells.
        int dr = a.id == ActionId::Action1 ? -1 : a.id == ActionId::Action2 ? 1 : 0;
        int dc = a.id == ActionId::Action3 ? -1 : a.id == ActionId::Action4 ? 1 : 0;
        bool adjacent = false;
        for (const auto& g : game().levels[before.level].key_generators)
            for (auto p : player_cells(before))
                adjacent |= g.pos == Pos{p.row + dr, p.col + dc} && g.color == ev.keys_generated.front();
        CHECK(adjacent);
    });
    CHECK(bumps > 0);
}

TEST_CASE("fact: opening a door uses up the matching key") {
    CHECK(check_claim(claim::kKeyConsumed) == Truth::Consistent);
    std::size_t opened = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        if (ev.doors_opened.empty()) {
            CHECK(ev.keys_consumed.empty());
            return;
        }
        ++opened;
        CHECK(ev.keys_consumed.size() == ev.doors_opened.size());
        CHECK(after.inventory.size() + ev.keys_consumed.size() == before.inventory.size());
        for (std::size_t i = 0; i < ev.doors_opened.size(); ++i)
            CHECK(game().levels[before.level].doors[ev.doors_opened[i]].color == ev.keys_consumed[i]);
    });
    CHECK(opened > 0);
}

TEST_CASE("fact: an opened door vanishes") {
    CHECK(check_claim(claim::kDoorVanishes) == Truth::Consistent);
    std::size_t opened = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        if (ev.doors_opened.empty() || after.level != before.level) return;
        ++opened;
        const auto frame = render_state(game(), after);
        for (int d : ev.doors_opened) {
            CHECK_FALSE(after.doors_closed[d]);
            for (auto p : game().levels[before.level].doors[d].cells) CHECK(frame.at(0, p.row, p.col) == 0);
        }
    });
    CHECK(opened > 0);
}

TEST_CASE("fact: picking up an energy dot refills energy") {
    CHECK(check_claim(claim::kDotRefills) == Truth::Consistent);
    std::size_t dots = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        if (ev.dots_collected == 0) return;
        ++dots;
        CHECK(ev.energy_bonus == ev.dots_collected * game().energy_dot_bonus);
        CHECK(after.energy > before.energy);
        CHECK(count_true(after.dots_left) + ev.dots_collected == count_true(before.dots_left));
    });
    CHECK(dots > 0);
}

TEST_CASE("fact: the game is over when energy runs out") {
    CHECK(check_claim(claim::kEnergyOut) == Truth::Consistent);
    std::size_t endings = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        const bool out = before.energy - 1 + ev.energy_bonus <= 0;
        CHECK(out == (after.status == GameStatus::GameOver));
        endings += out;
    });
    CHECK(endings > 0);
}

TEST_CASE("fact: stars can be collected") {
    CHECK(check_claim(claim::kStarsCollectible) == Truth::Consistent);
    std::size_t stars = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        if (ev.stars_collected == 0) return;
        ++stars;
        CHECK(ev.moved);
        if (after.level == before.level)
            CHECK(count_true(after.stars_left) + ev.stars_collected == count_true(before.stars_left));
    });
    CHECK(stars > 0);
}

TEST_CASE("fact: collecting every star finishes the level") {
    CHECK(check_claim(claim::kAllStarsLevel) == Truth::Consistent);
    std::size_t finished = 0, wins = 0;
    explore(game(), [&](const State& before, const ActionCommand&, const State& after, const StepEvents& ev) {
        const bool all = ev.stars_collected == count_true(before.stars_left) && ev.stars_collected > 0;
        CHECK(all == ev.level_completed);
        if (!ev.level_completed) {
            CHECK(after.score == before.score);
            return;
        }
        ++finished;
        wins += after.status == GameStatus::Win;
        CHECK(after.score == before.score + 1);
        if (after.status != GameStatus::GameOver) {
            const bool last = before.level + 1 == static_cast<int>(game().levels.size());
            CHECK((last ? after.status == GameStatus::Win : after.level == before.level + 1));
        }
    });
    CHECK(finished > 0);
    CHECK(wins > 0);
}

TEST_CASE("the reference statements are exactly the fifteen checked above") {
    const auto& claims = reference_claims();
    CHECK(claims.size() == 15);
    for (const auto& c : claims) CHECK_MESSAGE(check_claim(c) == Truth::Consistent, c);
}
