#include "sensi/ops_server.hpp"

#include "sensi/curriculum.hpp"
#include "sensi/errors.hpp"

#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

namespace sensi {

using nlohmann::json;

void check_edit(const Store& store, const ExternalEdit& e) {
    auto require = [&](std::int64_t id) {
        auto item = store.item(id);
        if (!item) throw NotFoundError("item " + std::to_string(id) + " not found");
        return *item;
    };
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, edit::InsertFact>) {
                if (v.text.empty()) throw ValidationError("fact text must not be empty");
            } else if constexpr (std::is_same_v<T, edit::DeleteItem>) {
                require(v.item_id);
            } else if constexpr (std::is_same_v<T, edit::ReorderItems>) {
                if (v.item_ids.empty()) throw ValidationError("reorder needs at least one item id");
                std::set<std::int64_t> seen;
                for (auto id : v.item_ids) {
                    if (!seen.insert(id).second) throw ValidationError("reorder lists item " + std::to_string(id) + " twice");
                    if (require(id).state == ItemState::Fact)
                        throw ValidationError("item " + std::to_string(id) + " is a fact and has no queue position");
                }
            } else if constexpr (std::is_same_v<T, edit::SetThreshold>) {
                if (v.threshold < 1 || v.threshold > 10) throw ValidationError("threshold must be within [1, 10]");
                require(v.item_id);
            } else if constexpr (std::is_same_v<T, edit::InsertItem>) {
                if (v.item_name.empty()) throw ValidationError("item name must not be empty");
                if (v.position && *v.position < 1) throw ValidationError("position must be >= 1");
                if (v.threshold && (*v.threshold < 1 || *v.threshold > 10))
                    throw ValidationError("threshold must be within [1, 10]");
            }
        },
        e);
}

struct OpsServer::Impl {
    OpsOptions options;
    RunControl* control;
    httplib::Server server;
    std::thread thread;
    int port = 0;

    std::mutex mu;
    std::optional<Store> reader;
    std::optional<Store> writer;

    Store& read() {
        if (!reader) reader.emplace(Store::open_readonly(options.db));
        return *reader;
    }
    Store& write() {
        if (!writer) writer.emplace(Store::open(options.db));
        return *writer;
    }
};

namespace {

OpsServer::Reply error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

template <typename F>
OpsServer::Reply guarded(F&& f) {
    try {
        return f();
    } catch (const NotFoundError& e) {
        return error_reply(404, e.what());
    } catch (const ValidationError& e) {
        return error_reply(400, e.what());
    } catch (const StoreError& e) {
        return error_reply(503, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

json item_json(const LearningItem& item) {
    return {{"item_id", item.item_id},
            {"item_name", item.item_name},
            {"state", to_string(item.state)},
            {"threshold", item.threshold},
            {"metric", item.metric ? json(*item.metric) : json()},
            {"queue_position", item.queue_position ? json(*item.queue_position) : json()},
            {"completed_turn", item.completed_turn ? json(*item.completed_turn) : json()}};
}

}  // namespace

OpsServer::OpsServer(OpsOptions options, RunControl* control) : impl_(std::make_unique<Impl>()) {
    if (!options.token) {
        if (const char* env = std::getenv("SENSI_CONTROL_TOKEN"); env && *env) options.token = env;
    }
    impl_->options = std::move(options);
    impl_->control = control;
}

OpsServer::~OpsServer() { stop(); }

OpsServer::Reply OpsServer::get_state() {
    return guarded([&]() -> Reply {
        std::lock_guard lock(impl_->mu);
        auto& store = impl_->read();
        const int last = store.last_turn_index();
        json queue = json::array();
        for (const auto& item : store.queue()) queue.push_back(item_json(item));
        json body = {{"game_id", store.game_id()},
                     {"card_id", store.card_id()},
                     {"last_turn", last},
                     {"snapshot", to_json(store.snapshot(last))},
                     {"queue", queue},
                     {"live", impl_->control && impl_->control->live()},
                     {"paused", impl_->control && impl_->control->paused()}};
        if (impl_->control) {
            body["next_turn"] = impl_->control->next_turn();
            json pending = json::array();
            for (const auto& p : impl_->control->edits().pending())
                pending.push_back({{"ticket", p.ticket}, {"edit", to_json(p.edit)}, {"apply_at_turn", p.apply_at_turn}});
            body["pending_edits"] = pending;
        }
        return {200, body};
    });
}

OpsServer::Reply OpsServer::get_timeline() {
    return guarded([&]() -> Reply {
        std::lock_guard lock(impl_->mu);
        return {200, {{"timeline", to_json(curriculum_timeline(impl_->read()))}}};
    });
}

OpsServer::Reply OpsServer::get_turns(int since) {
    return guarded([&]() -> Reply {
        std::lock_guard lock(impl_->mu);
        json rows = json::array();
        for (const auto& t : impl_->read().turns(since)) rows.push_back(to_json(t));
        return {200, {{"turns", rows}}};
    });
}

OpsServer::Reply OpsServer::get_audit() {
    return guarded([&]() -> Reply {
        std::lock_guard lock(impl_->mu);
        json rows = json::array();
        for (const auto& a : impl_->read().audit_log()) {
            json payload = json::parse(a.payload, nullptr, false);
            rows.push_back({{"audit_id", a.audit_id},
                            {"created_at", a.created_at},
                            {"kind", a.kind},
                            {"payload", payload.is_discarded() ? json(a.payload) : payload}});
        }
        return {200, {{"audit", rows}}};
    });
}

OpsServer::Reply OpsServer::post_edit(const std::string& body) {
    return guarded([&]() -> Reply {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded()) return error_reply(400, "request body is not JSON");
        auto e = edit_from_json(j);
        std::lock_guard lock(impl_->mu);
        check_edit(impl_->read(), e);
        auto* control = impl_->control;
        if (control && control->live()) {
            auto pending = control->edits().push(e, control->next_turn());
            return {202,
                    {{"ticket", pending.ticket},
                     {"kind", edit_kind(e)},
                     {"status", "queued"},
                     {"apply_at_turn", pending.apply_at_turn}}};
        }
        auto receipt = impl_->write().apply_external_edit(e);
        return {200,
                {{"audit_id", receipt.audit_id},
                 {"kind", receipt.kind},
                 {"status", "applied"},
                 {"changed", receipt.changed},
                 {"item_id", receipt.item_id ? json(*receipt.item_id) : json()},
                 {"apply_at_turn", impl_->read().last_turn_index() + 1}}};
    });
}

OpsServer::Reply OpsServer::post_run(const std::string& verb) {
    auto* control = impl_->control;
    if (!control) return error_reply(409, "no run is attached to this server");
    if (verb == "pause")
        control->pause();
    else if (verb == "resume")
        control->resume();
    else if (verb == "stop")
        control->request_stop();
    else
        return error_reply(404, "unknown run command '" + verb + "'");
    return {200, {{"paused", control->paused()}, {"stop_requested", control->stop_requested()}}};
}

int OpsServer::start() {
    auto& srv = impl_->server;
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        const auto& token = impl_->options.token;
        if (!token || req.get_header_value("Authorization") == "Bearer " + *token)
            return httplib::Server::HandlerResponse::Unhandled;
        res.status = 401;
        res.set_content(R"({"error":"missing or wrong bearer token"})", "application/json");
        return httplib::Server::HandlerResponse::Handled;
    });
    srv.Get("/state", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_state()); });
    srv.Get("/timeline", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_timeline()); });
    srv.Get("/audit", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_audit()); });
    srv.Get("/turns", [this, send](const httplib::Request& req, httplib::Response& res) {
        int since = 0;
        if (req.has_param("since")) {
            try {
                since = std::stoi(req.get_param_value("since"));
            } catch (const std::exception&) {
                return send(res, error_reply(400, "since must be an integer"));
            }
        }
        send(res, get_turns(since));
    });
    srv.Post("/edit", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, post_edit(req.body)); });
    srv.Post(R"(/run/(\w+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, post_run(req.matches[1]));
    });
    srv.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        if (!impl_->control) {
            res.status = 409;
            res.set_content(R"({"error":"no run is attached to this server"})", "application/json");
            return;
        }
        std::int64_t after = 0;
        if (req.has_header("Last-Event-ID")) after = std::atoll(req.get_header_value("Last-Event-ID").c_str());
        if (req.has_param("after")) after = std::atoll(req.get_param_value("after").c_str());
        auto cursor = std::make_shared<std::int64_t>(after);
        auto* bus = &impl_->control->events();
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [bus, cursor](std::size_t, httplib::DataSink& sink) {
            auto events = bus->wait_after(*cursor, std::chrono::milliseconds(1000));
            for (const auto& e : events) {
                *cursor = e["seq"].get<std::int64_t>();
                std::string frame = "id: " + std::to_string(*cursor) + "\nevent: " + e.value("type", "turn") +
                                    "\ndata: " + e.dump() + "\n\n";
                if (!sink.write(frame.data(), frame.size())) return false;
            }
            if (events.empty() && bus->closed()) {
                sink.done();
                return true;
            }
            if (events.empty()) {
                static const std::string ping = ": keep-alive\n\n";
                if (!sink.write(ping.data(), ping.size())) return false;
            }
            return true;
        });
    });

    const auto& opt = impl_->options;
    impl_->port = opt.port == 0 ? srv.bind_to_any_port(opt.host) : (srv.bind_to_port(opt.host, opt.port) ? opt.port : -1);
    if (impl_->port <= 0) throw ConfigError("cannot bind control server to " + opt.host + ":" + std::to_string(opt.port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    srv.wait_until_ready();
    return impl_->port;
}

void OpsServer::stop() {
    if (!impl_) return;
    if (impl_->control) impl_->control->events().close();
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int OpsServer::port() const { return impl_->port; }

}  // namespace sensi
