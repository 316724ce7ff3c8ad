#pragma once

#include "sensi/environment.hpp"
#include "sensi/http.hpp"

namespace sensi {

/// HTTP game server client:
///   POST {base}/games/{game_id}/reset            -> observation
///   POST {base}/games/{game_id}/action  {action} -> observation
/// Observations are validated on receipt; malformed payloads throw ProtocolError.
struct RemoteEnvConfig {
    std::string base_url;
    std::string game_id;
    std::string api_key;  // sent as a bearer token when non-empty
    RetryPolicy retry;
    std::vector<HudRegion> hud;

    /// api_key falls back to SENSI_ENV_KEY.
    static RemoteEnvConfig from_json(const nlohmann::json& j);
};

class RemoteEnv final : public Environment {
public:
    explicit RemoteEnv(RemoteEnvConfig config);

    Observation reset() override;
    Observation step(const ActionCommand& cmd) override;
    std::optional<FrameDiff> ground_truth_diff() const override { return std::nullopt; }
    std::vector<HudRegion> hud_regions() const override { return config_.hud; }
    std::string game_id() const override { return config_.game_id; }

private:
    Observation call(const std::string& route, const nlohmann::json& body);

    RemoteEnvConfig config_;
    Url base_;
    bool started_ = false;
    GameStatus status_ = GameStatus::NotPlayed;
};

}  // namespace sensi
