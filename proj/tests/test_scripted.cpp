#include "explorer.hpp"
#include "temp_dir.hpp"

#include "sensi/cascade.hpp"
#include "sensi/claims.hpp"
#include "sensi/codec.hpp"
#include "sensi/errors.hpp"
#include "sensi/scripted.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace sensi;
using nlohmann::json;
using sensi::testing::fixture_path;

namespace {

StageRequest at_turn(int turn) {
    StageRequest r;
    r.turn_index = turn;
    return r;
}

}  // namespace

TEST_CASE("monotone scorer: base plus the figured-out count, capped at 10") {
    MonotoneScorer scorer(2);
    StageRequest req;
    req.metric = "m";
    for (std::size_t n = 0; n <= 12; ++n) {
        req.figured_out.assign(n, "k");
        CHECK(stage_sense_score(scorer, req).score == std::min<int>(10, 2 + static_cast<int>(n)));
    }
    req.figured_out.assign(4, "k");
    CHECK(stage_sense_score(scorer, req).score == 6);
    req.figured_out.clear();
    CHECK(stage_sense_score(scorer, req).score == 2);
}

TEST_CASE("schedule and constant scorers") {
    ScheduleScorer schedule({{3, 9}}, 2);
    StageRequest req = at_turn(3);
    req.metric = "m";
    CHECK(stage_sense_score(schedule, req).score == 9);
    req.turn_index = 4;
    CHECK(stage_sense_score(schedule, req).score == 2);
    ConstantScorer constant(5);
    CHECK(stage_sense_score(constant, req).score == 5);
    auto from = ScheduleScorer::from_json({{"scores", {{"2", 7}}}, {"default", 3}});
    req.turn_index = 2;
    CHECK(stage_sense_score(from, req).score == 7);
    CHECK_THROWS_AS(ScheduleScorer::from_json({{"scores", {{"two", 7}}}}), ConfigError);
}

TEST_CASE("the shipped metric fixture is the golden rubric set") {
    auto gen = ScriptedMetricGen::from_json(load_fixture(fixture_path("metrics.json")));
    StageRequest req;
    req.item_name = "figure out what every action does";
    auto rubric = stage_metric_gen(gen, req);
    for (const char* word : {"ACTION1", "ACTION7", "RESET", "energy"}) CHECK(rubric.find(word) != std::string::npos);
    req.item_name = "learn the doors";
    CHECK(stage_metric_gen(gen, req).find("learn the doors") != std::string::npos);
    CHECK(gen.invocations() == 2);
}

TEST_CASE("scripted differ replays by turn") {
    FrameDiff d;
    canonicalize(d);
    auto differ = ScriptedDiffer::from_json({{"diffs", {{"1", json::parse(serialize_diff(d))}, {"2", "not json"}}}});
    Observation o{Frame(1, 2, 2), 0, GameStatus::NotFinished, 0};
    StageRequest req = at_turn(1);
    req.previous = &o;
    req.current = &o;
    CHECK(stage_frame_diff(differ, req) == d);
    req.turn_index = 2;
    CHECK_THROWS_AS(stage_frame_diff(differ, req), StageError);
    req.turn_index = 3;
    CHECK_THROWS_AS(differ.invoke(req), StageError);
}

TEST_CASE("a flipped left move reads as a move to the right") {
    Frame a(1, 6, 6), b(1, 6, 6);
    a.at(0, 2, 3) = 4;
    b.at(0, 2, 2) = 4;
    Observation pa{a, 0, GameStatus::NotFinished, 0}, pb{b, 0, GameStatus::NotFinished, 1};
    auto truth = programmatic_diff(pa, pb, {});
    REQUIRE(truth.moved.size() == 1);
    CHECK(truth.moved[0].d_col() == -1);
    auto flipped = corrupt(truth, CorruptionPolicy::FlipHorizontalDirection);
    ScriptedDiffer differ(std::map<int, std::string>{{1, serialize_diff(flipped)}});
    StageRequest req = at_turn(1);
    req.previous = &pa;
    req.current = &pb;
    auto d = stage_frame_diff(differ, req);
    CHECK(d.moved[0].d_col() == 1);
    CHECK(d.summary.find("right") != std::string::npos);
}

TEST_CASE("table observer: by turn, carry forward, pinned diffs") {
    auto observer = TableObserver::from_json(
        {{"turns", {{"1", {{"guesses", {"g"}}, {"figured_out", {"k"}}}}}}, {"carry_forward", true}});
    auto out = stage_observer(observer, at_turn(1));
    CHECK(out.guesses == std::vector<std::string>{"g"});
    EpistemicState st;
    st.guesses = {"a"};
    StageRequest req = at_turn(2);
    req.state = &st;
    CHECK(stage_observer(observer, req).guesses == std::vector<std::string>{"a"});

    auto strict = TableObserver::from_json({{"turns", json::object()}, {"carry_forward", false}});
    CHECK_THROWS_AS(stage_observer(strict, at_turn(1)), StageError);

    FrameDiff d;
    canonicalize(d);
    const auto hash = sha256_hex(serialize_diff(d));
    auto pinned = TableObserver::from_json({{"turns", {{"1", {{"guesses", json::array()}, {"diff_hash", hash}}}}}});
    req = at_turn(1);
    req.diff = &d;
    CHECK_NOTHROW(stage_observer(pinned, req));
    FrameDiff other;
    other.ui_changes.push_back({"energy", "1 cell changed, 3 -> 2 non-background cells"});
    canonicalize(other);
    req.diff = &other;
    CHECK_THROWS_AS(stage_observer(pinned, req), StageError);
}

TEST_CASE("the diff reader only states true things about the reference game") {
    // Exhaustive: every reachable transition, the true diff, the action taken.
    const auto config = keyquest::GameConfig::reference();
    std::set<std::string> said;
    sensi::testing::explore(config, [&](const keyquest::State& before, const ActionCommand& action,
                                        const keyquest::State& after, const keyquest::StepEvents&) {
        auto diff = keyquest::entity_diff(config, before, after);
        for (const auto& c : DiffReaderObserver::claims_for(diff, action)) {
            CHECK_MESSAGE(keyquest::check_claim(c) == keyquest::Truth::Consistent, c);
            said.insert(c);
        }
    });
    // Statements that need more than one transition (or a RESET) to see are out of its reach.
    std::set<std::string> missed;
    for (const auto& c : keyquest::reference_claims())
        if (!said.count(c)) missed.insert(c);
    CHECK(missed == std::set<std::string>{keyquest::claim::kResetStarts, keyquest::claim::kGeneratorMatches,
                                          keyquest::claim::kEnergyOut, keyquest::claim::kAllStarsLevel});
}

TEST_CASE("the diff reader promotes a statement the second time it is seen") {
    Frame a(1, 6, 6), b(1, 6, 6);
    a.at(0, 2, 3) = keyquest::kPlayerTopColor;
    b.at(0, 2, 2) = keyquest::kPlayerTopColor;
    auto diff = programmatic_diff({a, 0, GameStatus::NotFinished, 0}, {b, 0, GameStatus::NotFinished, 1}, {});
    DiffReaderObserver observer;
    EpistemicState st;
    StageRequest req = at_turn(1);
    req.diff = &diff;
    req.state = &st;
    req.last_action = ActionCommand::simple(ActionId::Action3);
    auto first = stage_observer(observer, req);
    const auto claim = keyquest::claim::moves(ActionId::Action3, "left");
    CHECK(first.guesses == std::vector<std::string>{claim});
    CHECK(first.figured_out.empty());
    st.guesses = first.guesses;
    auto second = stage_observer(observer, req);
    CHECK(second.figured_out == std::vector<std::string>{claim});
    CHECK(second.guesses.empty());
    st.guesses.clear();
    st.figured_out.clear();
    st.facts = {claim};
    auto third = stage_observer(observer, req);
    CHECK(third.guesses.empty());
    CHECK(third.figured_out.empty());
}

TEST_CASE("table actor cycles and labels by the epistemic state") {
    auto actor = TableActor::from_json({{"actions", {"ACTION4", "ACTION3"}}, {"cycle", true}});
    EpistemicState st;
    st.guesses = {"a", "b"};
    st.figured_out = {"c"};
    StageRequest req = at_turn(3);
    req.state = &st;
    auto out = stage_actor(actor, req);
    CHECK(out.action == ActionCommand::simple(ActionId::Action4));
    CHECK(out.decision_type == DecisionType::Guess);
    st.figured_out = {"c", "d"};
    req.turn_index = 4;
    out = stage_actor(actor, req);
    CHECK(out.action == ActionCommand::simple(ActionId::Action3));
    CHECK(out.decision_type == DecisionType::Informed);

    auto once = TableActor::from_json({{"actions", {"ACTION1"}}, {"cycle", false}});
    CHECK_THROWS_AS(stage_actor(once, at_turn(2)), StageError);
    CHECK_THROWS_AS(TableActor::from_json({{"actions", json::array()}}), ConfigError);
    CHECK_THROWS_AS(TableActor::from_json({{"actions", {"JUMP"}}}), ConfigError);
    CHECK_THROWS_AS(TableActor::from_json({{"actions", {{{"action_id", "ACTION6"}}}}}), ConfigError);
}

TEST_CASE("exploration decisions on a fresh store are guesses") {
    CHECK(exploration_decision(nullptr) == DecisionType::Guess);
    EpistemicState st;
    st.guesses = {"g"};
    CHECK(exploration_decision(&st) == DecisionType::Guess);
}

TEST_CASE("frame policy actor keys on the frame") {
    Observation o{Frame(1, 3, 3), 0, GameStatus::NotFinished, 0};
    const auto key = FramePolicyActor::frame_key(o);
    auto actor = FramePolicyActor::from_json({{"policy", {{key, "ACTION2"}}}, {"default", "ACTION7"}});
    StageRequest req;
    req.current = &o;
    CHECK(stage_actor(actor, req).action == ActionCommand::simple(ActionId::Action2));
    Observation other = o;
    other.frame.at(0, 0, 0) = 1;
    req.current = &other;
    CHECK(stage_actor(actor, req).action == ActionCommand::simple(ActionId::Action7));
}

TEST_CASE("fixture loading errors name the file") {
    sensi::testing::TempDir dir;
    CHECK_THROWS_WITH_AS(load_fixture(dir / "none.json"), doctest::Contains("none.json"), ConfigError);
    std::ofstream(dir / "bad.json") << "{";
    CHECK_THROWS_WITH_AS(load_fixture(dir / "bad.json"), doctest::Contains("bad.json"), ConfigError);
}
