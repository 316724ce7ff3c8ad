#include "temp_dir.hpp"

#include "sensi/errors.hpp"
#include "sensi/orchestrator.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace sensi;
using nlohmann::json;
using sensi::testing::fixture_path;
using sensi::testing::TempDir;

namespace {

RunConfig load(const std::string& name) { return RunConfig::load(fixture_path(name)); }

/// Passes calls through and counts them per stage.
class Counting final : public Backend {
public:
    Counting(BackendPtr inner, std::map<Stage, int>& counts) : inner_(std::move(inner)), counts_(counts) {}
    std::string name() const override { return inner_->name(); }
    std::string invoke(const StageRequest& request) override {
        ++counts_[request.stage];
        return inner_->invoke(request);
    }

private:
    BackendPtr inner_;
    std::map<Stage, int>& counts_;
};

void wrap(BackendPtr& b, std::map<Stage, int>& counts) {
    if (b) b = std::make_shared<Counting>(b, counts);
}

}  // namespace

TEST_CASE("a v1 turn calls the observer and the actor once each and nothing else") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    config.mode = Mode::V1;
    config.stop = StopCondition::MaxTurns;
    config.max_turns = 5;
    auto env = make_environment(config);
    auto pipeline = make_pipeline(config, *env);
    std::map<Stage, int> counts;
    for (auto* b : {&pipeline.frame_diff, &pipeline.metric_gen, &pipeline.sense_score, &pipeline.observer, &pipeline.actor})
        wrap(*b, counts);
    auto store = open_run_store(config, dir / "run.db", env->game_id());
    Orchestrator orch(config, store, *env, std::move(pipeline));
    orch.start();
    for (int t = 1; t <= 5; ++t) {
        counts.clear();
        auto out = orch.execute_turn();
        CHECK(counts.size() == 2);
        CHECK(counts[Stage::Observer] == 1);
        CHECK(counts[Stage::Actor] == 1);
        CHECK(out.transcript_entry["stages"] == json{"observer", "store_hypotheses", "actor", "env_step"});
        CHECK(out.transcript_entry["pipeline_diff"].is_null());
        CHECK_FALSE(out.record.sense_score);
    }
}

TEST_CASE("a v2 turn runs the frame differ, scorer, observer and actor once each") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    auto env = make_environment(config);
    auto pipeline = make_pipeline(config, *env);
    std::map<Stage, int> counts;
    for (auto* b : {&pipeline.frame_diff, &pipeline.metric_gen, &pipeline.sense_score, &pipeline.observer, &pipeline.actor})
        wrap(*b, counts);
    auto store = open_run_store(config, dir / "run.db", env->game_id());
    Orchestrator orch(config, store, *env, std::move(pipeline));
    auto first = orch.execute_turn();
    CHECK(first.transcript_entry["stages"] == json{"frame_diff", "select_active", "metric_gen", "sense_score",
                                                   "transition", "observer", "store_hypotheses", "actor", "env_step"});
    CHECK(counts[Stage::MetricGen] == 1);
    counts.clear();
    auto second = orch.execute_turn();
    CHECK(std::count(second.transcript_entry["stages"].begin(), second.transcript_entry["stages"].end(), "metric_gen") == 0);
    CHECK(counts[Stage::FrameDiff] == 1);
    CHECK(counts[Stage::SenseScore] == 1);
    CHECK(counts[Stage::Observer] == 1);
    CHECK(counts[Stage::Actor] == 1);
}

TEST_CASE("promotion happens before the observer sees the state") {
    TempDir dir;
    auto result = run_config(load("curriculum_32.json"), dir / "run.db");
    bool saw = false;
    for (const auto& t : result.transcript["turns"]) {
        if (!t.contains("completed_item")) continue;
        saw = true;
        auto stages = t["stages"].get<std::vector<std::string>>();
        auto at = [&](const char* s) { return std::find(stages.begin(), stages.end(), s) - stages.begin(); };
        CHECK(at("transition") < at("promote"));
        CHECK(at("promote") < at("observer"));
    }
    CHECK(saw);
    auto store = Store::open_readonly(dir / "run.db");
    for (const auto& [item, turn] : result.metrics.item_completion_turns) {
        auto promoted = store.item(item);
        REQUIRE(promoted);
        CHECK(promoted->completed_turn == turn);
    }
}

TEST_CASE("an energy-out episode is logged as one losing sequence and the loop resets") {
    TempDir dir;
    auto result = run_config(load("game_over.json"), dir / "run.db");
    CHECK(result.metrics.losing_sequences == 1);
    CHECK(result.metrics.resets == 1);
    CHECK(result.metrics.total_interactions == 7);
    auto store = Store::open_readonly(dir / "run.db");
    auto losing = store.losing_sequences();
    REQUIRE(losing.size() == 1);
    CHECK(losing[0].terminal_turn_index == 9);
    std::vector<ActionCommand> expected = {ActionCommand::simple(ActionId::Action1), ActionCommand::simple(ActionId::Action1),
                                           ActionCommand::simple(ActionId::Action4)};
    CHECK(losing[0].actions == expected);
    CHECK(result.transcript["turns"][8]["auto_reset"] == true);
    CHECK(result.transcript["losing_sequences"][0]["terminal_turn"] == 9);
}

TEST_CASE("efficiency ratios") {
    auto r = efficiency_ratios(32);
    REQUIRE(r.size() == 2);
    CHECK(r[0].second == 1600.0 / 32);
    CHECK(r[1].second == 3000.0 / 32);
    CHECK(efficiency_ratios(0).empty());
}

TEST_CASE("replay of an untouched transcript matches") {
    TempDir dir;
    auto result = run_config(load("game_over.json"), dir / "run.db");
    auto rep = replay(result.transcript, std::nullopt);
    CHECK(rep.match);
    CHECK(rep.turns_checked == 9);
}

TEST_CASE("a tampered action makes replay diverge at that turn") {
    TempDir dir;
    auto result = run_config(load("curriculum_32.json"), dir / "run.db");
    auto transcript = result.transcript;
    transcript["turns"][4]["action"] = to_json(ActionCommand::simple(ActionId::Action2));
    auto rep = replay(transcript, std::nullopt);
    CHECK_FALSE(rep.match);
    REQUIRE(rep.divergence);
    CHECK(rep.divergence->turn_index == 5);
    CHECK(rep.divergence->field == "action");
    CHECK(rep.turns_checked == 4);
}

TEST_CASE("an extra fact in the starting store diverges at the observer prompt") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    auto result = run_config(config, dir / "run.db");
    {
        auto env = make_environment(config);
        auto base = open_run_store(config, dir / "base.db", env->game_id());
        base.apply_external_edit(edit::InsertFact{"Walls stop the player"});
    }
    auto rep = replay(result.transcript, dir / "base.db");
    REQUIRE(rep.divergence);
    CHECK(rep.divergence->turn_index == 1);
    CHECK(rep.divergence->field == "observer_prompt_hash");
}

TEST_CASE("replay refuses what it cannot re-execute") {
    TempDir dir;
    auto result = run_config(load("game_over.json"), dir / "run.db");
    auto t = result.transcript;
    t["format"] = "other";
    CHECK_THROWS_AS(replay(t, std::nullopt), ConfigError);
    t = result.transcript;
    t["config"]["max_turns"] = 3;
    CHECK_THROWS_AS(replay(t, std::nullopt), ConfigError);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(RunConfig::from_json(json::array()), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"mode", "v3"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"max_turns", 0}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"threshold", 11}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"mode", "v1"}, {"stop", "curriculum_done"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"backends", {{"planner", {{"kind", "x"}}}}}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"environment", {{"kind", "keyquest"}}}, {"max_turns", "ten"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(fixture_path("missing.json")), ConfigError);
    auto bad_kind = RunConfig::from_json({{"environment", {{"kind", "arcade"}}}});
    CHECK_THROWS_AS(make_environment(bad_kind), ConfigError);
    auto bad_backend = RunConfig::from_json({{"backends", {{"observer", {{"kind", "oracle"}}}}}});
    auto env = make_environment(bad_backend);
    CHECK_THROWS_AS(make_pipeline(bad_backend, *env), ConfigError);
    auto bad_policy = RunConfig::from_json({{"corruption", {{"policy", "scramble"}, {"rate", 0.5}, {"seed", 1}}}});
    CHECK_THROWS_AS(make_pipeline(bad_policy, *env), ConfigError);
    auto bad_rate = RunConfig::from_json({{"corruption", {{"policy", "flip_horizontal"}, {"rate", 2.0}, {"seed", 1}}}});
    CHECK_THROWS_AS(make_pipeline(bad_rate, *env), ConfigError);
}

TEST_CASE("config round-trips through JSON with a stable hash") {
    auto config = load("curriculum_32.json").resolved();
    auto again = RunConfig::from_json(config.to_json());
    CHECK(again.to_json() == config.to_json());
    CHECK(again.hash() == config.hash());
    CHECK(config.scripted());
    auto remote = RunConfig::from_json({{"environment", {{"kind", "remote"}, {"base_url", "http://h:1"}, {"game_id", "g"}}}});
    CHECK_FALSE(remote.scripted());
}

TEST_CASE("edits queued on the control plane apply at the next turn boundary and are echoed") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    auto env = make_environment(config);
    auto pipeline = make_pipeline(config, *env);
    auto store = open_run_store(config, dir / "run.db", env->game_id());
    RunControl control;
    Orchestrator orch(config, store, *env, std::move(pipeline), &control);
    orch.execute_turn();
    CHECK(control.next_turn() == 2);
    control.edits().push(edit::InsertFact{"Stars are yellow"}, control.next_turn());
    auto before = store.facts().size();
    auto out = orch.execute_turn();
    CHECK(store.facts().size() == before + 1);
    REQUIRE(out.transcript_entry["edits"].size() == 1);
    CHECK(out.transcript_entry["edits"][0]["changed"] == true);
    CHECK(control.events().last_sequence() == 2);
    auto events = control.events().wait_after(1, std::chrono::milliseconds(0));
    REQUIRE(events.size() == 1);
    CHECK(events[0]["turn"] == 2);
    CHECK(events[0]["edits"].size() == 1);

    // A bad edit is recorded, not fatal.
    control.edits().push(edit::DeleteItem{999}, control.next_turn());
    auto third = orch.execute_turn();
    CHECK(third.transcript_entry["edits"][0].contains("error"));
}

TEST_CASE("a stop request ends the run between turns") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    RunControl control;
    control.request_stop();
    auto result = run_config(config, dir / "run.db", &control);
    CHECK(result.metrics.turns == 0);
    CHECK(result.metrics.stop_reason == "stopped");
    CHECK_FALSE(control.live());
}

TEST_CASE("the first v2 turn generates a metric when none is stored") {
    TempDir dir;
    auto config = load("curriculum_32.json");
    auto result = run_config(config, dir / "run.db");
    auto stages = result.transcript["turns"][0]["stages"];
    CHECK(std::count(stages.begin(), stages.end(), "metric_gen") == 1);
    auto store = Store::open_readonly(dir / "run.db");
    for (const auto& item : store.items())
        if (item.state == ItemState::Completed) CHECK(item.metric.has_value());
}
