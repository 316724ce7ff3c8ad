#include "sensi/cascade.hpp"
#include "sensi/errors.hpp"
#include "sensi/frames.hpp"
#include "sensi/ops_server.hpp"
#include "sensi/orchestrator.hpp"
#include "sensi/plot.hpp"
#include "sensi/prompt.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode { kOk = 0, kFailure = 1, kStageFailure = 2, kEnvFailure = 3, kUsage = 64, kBadInput = 65 };

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw sensi::ConfigError("cannot read " + path.string());
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw sensi::ConfigError(path.string() + " is not valid JSON");
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sensi::ConfigError("cannot write " + path.string());
    out << text;
}

sensi::RunControl* g_control = nullptr;

void on_signal(int) {
    if (g_control) g_control->request_stop();
}

struct Overrides {
    std::string mode;
    std::string stop;
    std::optional<int> max_turns;
    std::string game_config;
};

sensi::RunConfig load_config(const std::string& path, const Overrides& o) {
    auto j = read_json(path);
    if (!o.mode.empty()) j["mode"] = o.mode;
    if (!o.stop.empty()) j["stop"] = o.stop;
    if (o.max_turns) j["max_turns"] = *o.max_turns;
    if (!o.game_config.empty())
        j["environment"] = {{"kind", "keyquest"}, {"config", fs::absolute(o.game_config).string()}};
    auto dir = fs::path(path).parent_path();
    return sensi::RunConfig::from_json(j, dir.empty() ? fs::path(".") : dir);
}

/// "host:port", ":port" or "port".
std::pair<std::string, int> parse_bind(const std::string& text) {
    std::string host = "127.0.0.1", port = text;
    if (auto colon = text.rfind(':'); colon != std::string::npos) {
        if (colon > 0) host = text.substr(0, colon);
        port = text.substr(colon + 1);
    }
    try {
        std::size_t used = 0;
        int p = std::stoi(port, &used);
        if (used == port.size() && p >= 0 && p <= 65535) return {host, p};
    } catch (const std::exception&) {
    }
    throw sensi::ConfigError("--bind expects host:port, got '" + text + "'");
}

struct RunArgs {
    std::string config;
    std::string db;
    std::string transcript;
    std::string trace;
    std::string bind;
    bool start_paused = false;
    Overrides overrides;
};

int cmd_run(const RunArgs& a) {
    auto config = load_config(a.config, a.overrides);
    sensi::RunControl control;
    std::unique_ptr<sensi::OpsServer> server;
    auto env = sensi::make_environment(config);
    std::optional<fs::path> trace = a.trace.empty() ? std::nullopt : std::optional<fs::path>(a.trace);
    auto pipeline = sensi::make_pipeline(config, *env, trace);
    auto store = sensi::open_run_store(config, a.db, env->game_id());
    sensi::write_manifest(config, a.db);
    if (!a.bind.empty()) {
        auto [host, port] = parse_bind(a.bind);
        server = std::make_unique<sensi::OpsServer>(sensi::OpsOptions{a.db, host, port, {}}, &control);
        int bound = server->start();
        std::cerr << "control API on http://" << host << ":" << bound << "\n";
    }
    if (a.start_paused) control.pause();
    g_control = &control;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    sensi::Orchestrator orch(config, store, *env, std::move(pipeline), &control, trace);
    std::optional<sensi::RunMetrics> metrics;
    try {
        metrics = orch.run();
    } catch (...) {
        if (!a.transcript.empty()) write_text(a.transcript, orch.transcript().dump(2) + "\n");
        g_control = nullptr;
        throw;
    }
    g_control = nullptr;
    if (!a.transcript.empty()) write_text(a.transcript, orch.transcript().dump(2) + "\n");
    std::cout << metrics->to_json().dump(2) << "\n";
    return metrics->stop_reason == sensi::to_string(config.stop) ? kOk : kFailure;
}

int cmd_replay(const std::string& transcript, const std::string& base_store) {
    auto report = sensi::replay(read_json(transcript),
                                base_store.empty() ? std::nullopt : std::optional<fs::path>(base_store));
    std::cout << report.to_json().dump(2) << "\n";
    return report.match ? kOk : kFailure;
}

int cmd_audit(const std::string& transcript, const std::string& db) {
    auto store = sensi::Store::open_readonly(db);
    auto report = sensi::audit_run(read_json(transcript), store);
    std::cout << report.to_json().dump(2) << "\n";
    return kOk;
}

int cmd_inspect(const std::string& db, const std::string& table, std::optional<int> snapshot, bool dump) {
    auto store = sensi::Store::open_readonly(db);
    if (dump) {
        std::cout << store.dump();
    } else if (snapshot) {
        std::cout << sensi::to_json(store.snapshot(*snapshot)).dump(2) << "\n";
    } else if (!table.empty()) {
        std::cout << store.table_json(table).dump(2) << "\n";
    } else {
        json summary = {{"game_id", store.game_id()}, {"card_id", store.card_id()}, {"last_turn", store.last_turn_index()}};
        for (const auto& name : sensi::Store::table_names()) summary["rows"][name] = store.table_json(name).size();
        for (const auto& name : sensi::Store::view_names()) summary["views"][name] = store.table_json(name).size();
        std::cout << summary.dump(2) << "\n";
    }
    return kOk;
}

int cmd_plot(const std::string& db, const std::string& svg, const std::string& csv) {
    auto store = sensi::Store::open_readonly(db);
    auto timeline = sensi::curriculum_timeline(store);
    int threshold = sensi::kDefaultThreshold;
    if (auto q = store.queue(); !q.empty()) threshold = q.front().threshold;
    if (!csv.empty()) write_text(csv, sensi::timeline_csv(timeline));
    if (!svg.empty()) write_text(svg, sensi::timeline_svg(timeline, threshold));
    if (csv.empty() && svg.empty()) std::cout << sensi::timeline_csv(timeline);
    return kOk;
}

int cmd_seed(const std::string& config_path, const std::string& db, const std::string& edits_path) {
    auto config = sensi::RunConfig::load(config_path);
    auto env = sensi::make_environment(config);
    auto store = sensi::open_run_store(config, db, env->game_id());
    sensi::write_manifest(config, db);
    if (!edits_path.empty()) {
        auto edits = read_json(edits_path);
        if (!edits.is_array()) throw sensi::ConfigError(edits_path + " must hold a JSON array of edits");
        std::vector<sensi::ExternalEdit> parsed;
        for (const auto& e : edits) parsed.push_back(sensi::edit_from_json(e));
        for (const auto& e : parsed) {
            sensi::check_edit(store, e);
            store.apply_external_edit(e);
        }
    }
    json queue = json::array();
    for (const auto& item : store.queue())
        queue.push_back({{"item_id", item.item_id}, {"item_name", item.item_name}, {"threshold", item.threshold}});
    std::cout << json{{"facts", store.facts()}, {"queue", queue}}.dump(2) << "\n";
    return kOk;
}

int cmd_serve(const std::string& db, const std::string& bind) {
    auto [host, port] = parse_bind(bind);
    sensi::OpsServer server(sensi::OpsOptions{db, host, port, {}});
    int bound = server.start();
    std::cerr << "serving " << db << " on http://" << host << ":" << bound << " (Ctrl-C to stop)\n";
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return kOk;
}

int cmd_prompt(const std::string& db, const std::string& config_path, const std::string& stage_name, bool show) {
    auto stage = sensi::parse_stage(stage_name);
    if (!stage || (*stage != sensi::Stage::Observer && *stage != sensi::Stage::Actor))
        throw sensi::ConfigError("prompt supports the observer and actor stages");
    auto config = sensi::RunConfig::load(config_path);
    auto store = sensi::Store::open_readonly(db);
    sensi::Observation obs;
    if (auto last = store.turn(store.last_turn_index())) {
        obs = sensi::observation_from_json(json::parse(last->frame_json));
    } else {
        obs = sensi::make_environment(config)->reset();
    }
    const bool v1 = config.mode == sensi::Mode::V1;
    sensi::FrameDiff empty;
    sensi::canonicalize(empty);
    auto bundle = sensi::assemble_prompt(*stage, store, obs, v1 ? nullptr : &empty, config.history_window, v1);
    std::cout << bundle.hash() << "\n";
    if (show) std::cout << "\n" << bundle.system << "\n\n" << bundle.user_text() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sensi: curriculum-driven game-learning agent engine"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a config to completion");
    run_cmd->add_option("-c,--config", run.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--db", run.db, "Store file (created if missing)")->required();
    run_cmd->add_option("-t,--transcript", run.transcript, "Write the transcript here");
    run_cmd->add_option("--trace", run.trace, "Write every stage prompt and reply under this directory");
    run_cmd->add_option("--mode", run.overrides.mode, "Override the pipeline mode")->check(CLI::IsMember({"v1", "v2"}));
    run_cmd->add_option("--max-turns", run.overrides.max_turns, "Override the turn budget");
    run_cmd->add_option("--stop", run.overrides.stop, "Override the stop condition")
        ->check(CLI::IsMember({"curriculum_done", "win", "max_turns"}));
    run_cmd->add_option("--game-config", run.overrides.game_config, "Play this KeyQuest game file")
        ->check(CLI::ExistingFile);
    run_cmd->add_option("--bind", run.bind, "Expose the control API on host:port (port 0 = any)");
    run_cmd->add_flag("--paused", run.start_paused, "Start paused (resume through the control API)");

    std::string transcript, base_store, db, table, svg, csv, config, edits, bind = "127.0.0.1:8765", stage = "observer";
    std::optional<int> snapshot;
    bool dump = false, show = false;

    auto* replay_cmd = app.add_subcommand("replay", "Re-execute a scripted transcript and compare");
    replay_cmd->add_option("transcript", transcript)->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--base-store", base_store, "Store the original run started from")->check(CLI::ExistingFile);

    auto* audit_cmd = app.add_subcommand("audit", "Compare a run's beliefs with simulator truth");
    audit_cmd->add_option("transcript", transcript)->required()->check(CLI::ExistingFile);
    audit_cmd->add_option("--db", db)->required()->check(CLI::ExistingFile);

    auto* inspect_cmd = app.add_subcommand("inspect", "Read a store");
    inspect_cmd->add_option("--db", db)->required()->check(CLI::ExistingFile);
    inspect_cmd->add_option("--table", table, "Print one table as JSON");
    inspect_cmd->add_option("--snapshot", snapshot, "Print the epistemic state as of a turn");
    inspect_cmd->add_flag("--dump", dump, "Print the deterministic dump");

    auto* plot_cmd = app.add_subcommand("plot", "Curriculum timeline as SVG and CSV");
    plot_cmd->add_option("--db", db)->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("--svg", svg);
    plot_cmd->add_option("--csv", csv);

    auto* seed_cmd = app.add_subcommand("seed", "Create and seed a store, optionally applying edits");
    seed_cmd->add_option("-c,--config", config)->required()->check(CLI::ExistingFile);
    seed_cmd->add_option("--db", db)->required();
    seed_cmd->add_option("--edits", edits, "JSON array of curriculum and fact edits to apply")->check(CLI::ExistingFile);

    auto* serve_cmd = app.add_subcommand("serve", "Serve the control API for a store");
    serve_cmd->add_option("--db", db)->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--bind", bind, "host:port to listen on");

    auto* prompt_cmd = app.add_subcommand("prompt", "Print the hash of the next observer or actor prompt");
    prompt_cmd->add_option("-c,--config", config)->required()->check(CLI::ExistingFile);
    prompt_cmd->add_option("--db", db)->required()->check(CLI::ExistingFile);
    prompt_cmd->add_option("--stage", stage)->check(CLI::IsMember({"observer", "actor"}));
    prompt_cmd->add_flag("--show", show, "Also print the prompt text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*replay_cmd) return cmd_replay(transcript, base_store);
        if (*audit_cmd) return cmd_audit(transcript, db);
        if (*inspect_cmd) return cmd_inspect(db, table, snapshot, dump);
        if (*plot_cmd) return cmd_plot(db, svg, csv);
        if (*seed_cmd) return cmd_seed(config, db, edits);
        if (*serve_cmd) return cmd_serve(db, bind);
        if (*prompt_cmd) return cmd_prompt(db, config, stage, show);
    } catch (const sensi::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (!e.raw_reply().empty()) std::cerr << "last reply: " << e.raw_reply() << "\n";
        return kStageFailure;
    } catch (const sensi::ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kEnvFailure;
    } catch (const sensi::RetryableError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kEnvFailure;
    } catch (const sensi::EnvStateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kEnvFailure;
    } catch (const sensi::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const sensi::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const sensi::NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}
