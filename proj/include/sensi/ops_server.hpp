#pragma once

// HTTP control plane for a store, optionally attached to a live run.
// Endpoints are described in docs/control_api.md.

#include "sensi/control.hpp"
#include "sensi/store.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace sensi {

struct OpsOptions {
    std::filesystem::path db;
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    std::optional<std::string> token;  // bearer token; SENSI_CONTROL_TOKEN when unset
};

/// Rejects edits that are malformed (ValidationError) or name missing items (NotFoundError).
void check_edit(const Store& store, const ExternalEdit& e);

class OpsServer {
public:
    /// `control` is null when no run is attached; edits then apply immediately.
    OpsServer(OpsOptions options, RunControl* control = nullptr);
    ~OpsServer();

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    int port() const;

    /// Handlers are plain functions of the request for testing without sockets.
    struct Reply {
        int status = 200;
        nlohmann::json body;
    };
    Reply get_state();
    Reply get_timeline();
    Reply get_turns(int since);
    Reply get_audit();
    Reply post_edit(const std::string& body);
    Reply post_run(const std::string& verb);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sensi
