#include "temp_dir.hpp"

#include "sensi/ops_server.hpp"
#include "sensi/orchestrator.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

using namespace sensi;
using nlohmann::json;
using namespace std::chrono_literals;
using sensi::testing::fixture_path;
using sensi::testing::TempDir;

namespace {

RunConfig config() { return RunConfig::load(fixture_path("curriculum_32.json")); }

void seed(const std::filesystem::path& db) {
    auto c = config();
    auto env = make_environment(c);
    open_run_store(c, db, env->game_id());
}

std::int64_t first_item(const std::filesystem::path& db) { return Store::open_readonly(db).queue().front().item_id; }

json body_of(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("state of a freshly seeded store") {
    TempDir dir;
    seed(dir / "run.db");
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}});
    auto state = server.get_state();
    CHECK(state.status == 200);
    CHECK(state.body["snapshot"]["facts"].size() == 2);
    CHECK(state.body["queue"].size() == 3);
    CHECK(state.body["last_turn"] == 0);
    CHECK(state.body["live"] == false);
    CHECK_FALSE(state.body.contains("pending_edits"));
}

TEST_CASE("edits without an attached run apply immediately") {
    TempDir dir;
    seed(dir / "run.db");
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}});
    auto r = server.post_edit(R"({"kind": "insert_fact", "text": "Walls stop the player"})");
    CHECK(r.status == 200);
    CHECK(r.body["status"] == "applied");
    CHECK(r.body["changed"] == true);
    CHECK(server.get_state().body["snapshot"]["facts"].size() == 3);
    CHECK(server.get_audit().body["audit"].size() == 1);

    const auto id = first_item(dir / "run.db");
    r = server.post_edit(json{{"kind", "set_threshold"}, {"item_id", id}, {"threshold", 9}}.dump());
    CHECK(r.status == 200);
    CHECK(server.get_state().body["queue"][0]["threshold"] == 9);
}

TEST_CASE("bad edits are rejected with 400 or 404 and leave no audit row") {
    TempDir dir;
    seed(dir / "run.db");
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}});
    CHECK(server.post_edit("not json").status == 400);
    CHECK(server.post_edit(R"({"kind": "launch"})").status == 400);
    CHECK(server.post_edit(R"({"kind": "insert_fact", "text": ""})").status == 400);
    CHECK(server.post_edit(R"({"kind": "delete_item", "item_id": 999})").status == 404);
    CHECK(server.post_edit(R"({"kind": "set_threshold", "item_id": 999, "threshold": 5})").status == 404);
    const auto id = first_item(dir / "run.db");
    CHECK(server.post_edit(json{{"kind", "set_threshold"}, {"item_id", id}, {"threshold", 0}}.dump()).status == 400);
    CHECK(server.post_edit(json{{"kind", "reorder_items"}, {"item_ids", {id, id}}}.dump()).status == 400);
    CHECK(server.get_audit().body["audit"].empty());
}

TEST_CASE("run commands need an attached run") {
    TempDir dir;
    seed(dir / "run.db");
    OpsServer detached(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}});
    CHECK(detached.post_run("pause").status == 409);

    RunControl control;
    OpsServer attached(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}}, &control);
    CHECK(attached.post_run("pause").body["paused"] == true);
    CHECK(control.paused());
    CHECK(attached.post_run("resume").body["paused"] == false);
    CHECK(attached.post_run("launch").status == 404);
    CHECK(attached.post_run("stop").body["stop_requested"] == true);
}

TEST_CASE("edits during a live run are queued for the next turn") {
    TempDir dir;
    seed(dir / "run.db");
    RunControl control;
    control.set_live(true);
    control.set_next_turn(4);
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}}, &control);
    auto r = server.post_edit(R"({"kind": "insert_fact", "text": "Stars are yellow"})");
    CHECK(r.status == 202);
    CHECK(r.body["status"] == "queued");
    CHECK(r.body["apply_at_turn"] == 4);
    CHECK(r.body["ticket"] == 1);
    auto state = server.get_state().body;
    CHECK(state["snapshot"]["facts"].size() == 2);
    REQUIRE(state["pending_edits"].size() == 1);
    CHECK(state["pending_edits"][0]["apply_at_turn"] == 4);
}

TEST_CASE("over HTTP: routes, bearer token, missing routes") {
    TempDir dir;
    seed(dir / "run.db");
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, std::string("tok")});
    const int port = server.start();
    CHECK(port > 0);
    CHECK(server.port() == port);
    httplib::Client client("127.0.0.1", port);
    auto denied = client.Get("/state");
    REQUIRE(denied);
    CHECK(denied->status == 401);
    CHECK(client.Get("/state", {{"Authorization", "Bearer nope"}})->status == 401);

    httplib::Headers auth = {{"Authorization", "Bearer tok"}};
    auto state = client.Get("/state", auth);
    REQUIRE(state);
    CHECK(state->status == 200);
    CHECK(body_of(state)["snapshot"]["facts"].size() == 2);
    CHECK(client.Get("/timeline", auth)->status == 200);
    CHECK(client.Get("/turns?since=0", auth)->status == 200);
    CHECK(client.Get("/turns?since=x", auth)->status == 400);
    CHECK(client.Get("/events", auth)->status == 409);
    CHECK(client.Get("/nowhere", auth)->status == 404);
    auto posted = client.Post("/edit", auth, R"({"kind": "insert_fact", "text": "Doors block the way"})", "application/json");
    REQUIRE(posted);
    CHECK(posted->status == 200);
    CHECK(client.Post("/run/pause", auth, "", "application/json")->status == 409);
    server.stop();
}

TEST_CASE("event stream follows a live run and stays quiet while paused") {
    TempDir dir;
    auto c = config();
    c.stop = StopCondition::MaxTurns;
    c.max_turns = 64;
    RunControl control;
    control.pause();
    auto env = make_environment(c);
    auto pipeline = make_pipeline(c, *env);
    auto store = open_run_store(c, dir / "run.db", env->game_id());
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}}, &control);
    const int port = server.start();

    std::thread runner([&] {
        Orchestrator orch(c, store, *env, std::move(pipeline), &control);
        orch.run();
    });

    std::this_thread::sleep_for(150ms);
    CHECK(control.events().last_sequence() == 0);

    httplib::Client client("127.0.0.1", port);
    CHECK(body_of(client.Post("/run/resume", "", "application/json"))["paused"] == false);

    std::string stream;
    std::vector<int> ids;
    auto res = client.Get("/events", [&](const char* data, std::size_t n) {
        stream.append(data, n);
        std::size_t pos;
        while ((pos = stream.find("\n\n")) != std::string::npos) {
            auto frame = stream.substr(0, pos);
            stream.erase(0, pos + 2);
            if (frame.rfind("id: ", 0) == 0) ids.push_back(std::stoi(frame.substr(4)));
        }
        return ids.size() < 3;
    });
    REQUIRE(ids.size() >= 3);
    CHECK(ids[0] == 1);
    CHECK(ids[1] == 2);
    CHECK(ids[2] == 3);

    client.Post("/run/pause", "", "application/json");
    std::this_thread::sleep_for(100ms);  // a turn in flight may still finish
    const auto frozen = control.events().last_sequence();
    std::this_thread::sleep_for(200ms);
    CHECK(control.events().last_sequence() == frozen);

    client.Post("/run/stop", "", "application/json");
    runner.join();
    CHECK_FALSE(control.live());
    server.stop();
}

TEST_CASE("steering loop: a fact posted while paused is pending, then applied at the next turn") {
    auto observer_hashes = [](bool steer) {
        TempDir dir;
        auto c = config();
        RunControl control;
        auto env = make_environment(c);
        auto pipeline = make_pipeline(c, *env);
        auto store = open_run_store(c, dir / "run.db", env->game_id());
        OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}}, &control);
        Orchestrator orch(c, store, *env, std::move(pipeline), &control);
        control.set_live(true);
        std::vector<std::string> hashes;
        hashes.push_back(orch.execute_turn().record.observer_prompt_hash);
        if (steer) {
            control.pause();
            auto r = server.post_edit(R"({"kind": "insert_fact", "text": "Walls stop the player"})");
            CHECK(r.status == 202);
            CHECK(r.body["apply_at_turn"] == 2);
            auto pending = server.get_state().body;
            CHECK(pending["paused"] == true);
            CHECK(pending["pending_edits"].size() == 1);
            CHECK(pending["snapshot"]["facts"].size() == 2);
            control.resume();
        }
        hashes.push_back(orch.execute_turn().record.observer_prompt_hash);
        if (steer) {
            auto applied = server.get_state().body;
            CHECK(applied["pending_edits"].empty());
            CHECK(applied["snapshot"]["facts"].size() == 3);
            CHECK(server.get_audit().body["audit"].size() == 1);
        }
        return hashes;
    };
    auto plain = observer_hashes(false);
    auto steered = observer_hashes(true);
    CHECK(plain[0] == steered[0]);
    CHECK(plain[1] != steered[1]);
}

TEST_CASE("timeline of the 32-turn fixture has item boundaries at turns 14 and 24") {
    TempDir dir;
    run_config(config(), dir / "run.db");
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}});
    auto timeline = server.get_timeline().body["timeline"];
    CHECK(timeline.size() == 32);
    std::vector<int> completions;
    for (const auto& p : timeline)
        if (p["state"] == "completed") completions.push_back(p["turn"].get<int>());
    CHECK(completions == std::vector<int>{14, 24, 32});
    CHECK(server.get_state().body["queue"][0]["threshold"] == 8);
    CHECK(server.get_turns(30).body["turns"].size() == 2);
}

TEST_CASE("the API description lists exactly the served routes") {
    std::ifstream in(std::filesystem::path(SENSI_DOCS_DIR) / "control_api.openapi.json");
    REQUIRE(in);
    auto doc = json::parse(in);
    std::set<std::string> paths;
    for (const auto& [path, ops] : doc["paths"].items()) paths.insert(path);
    CHECK(paths == std::set<std::string>{"/state", "/timeline", "/turns", "/audit", "/edit", "/run/{verb}", "/events"});

    TempDir dir;
    seed(dir / "run.db");
    RunControl control;
    OpsServer server(OpsOptions{dir / "run.db", "127.0.0.1", 0, {}}, &control);
    httplib::Client client("127.0.0.1", server.start());
    for (const char* get : {"/state", "/timeline", "/turns", "/audit"}) CHECK(client.Get(get)->status == 200);
    CHECK(client.Post("/run/pause", "", "application/json")->status == 200);
    control.events().close();
    CHECK(client.Get("/events")->status == 200);
    server.stop();
}
