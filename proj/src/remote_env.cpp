#include "sensi/remote_env.hpp"

#include "sensi/errors.hpp"

#include <cstdlib>

namespace sensi {

using nlohmann::json;

RemoteEnvConfig RemoteEnvConfig::from_json(const json& j) {
    RemoteEnvConfig c;
    try {
        c.base_url = j.at("base_url").get<std::string>();
        c.game_id = j.at("game_id").get<std::string>();
    } catch (const json::exception&) {
        throw ConfigError("remote environment needs base_url and game_id");
    }
    const char* key = std::getenv("SENSI_ENV_KEY");
    c.api_key = key && *key ? key : j.value("api_key", std::string());
    c.retry.max_attempts = j.value("max_attempts", 3);
    c.retry.initial_backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
    c.retry.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
    for (const auto& r : j.value("hud", json::array())) {
        c.hud.push_back({r.at("name").get<std::string>(), r.at("top").get<int>(), r.at("left").get<int>(),
                         r.at("bottom").get<int>(), r.at("right").get<int>()});
    }
    return c;
}

RemoteEnv::RemoteEnv(RemoteEnvConfig config) : config_(std::move(config)) {
    if (config_.game_id.empty()) throw ConfigError("remote environment needs a game id");
    base_ = parse_url(config_.base_url);
    while (!base_.path.empty() && base_.path.back() == '/') base_.path.pop_back();
}

Observation RemoteEnv::call(const std::string& route, const json& body) {
    Url url = base_;
    url.path += "/games/" + config_.game_id + "/" + route;
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    auto reply = post_json(url, body, headers, config_.retry);
    try {
        auto obs = observation_from_json(reply);
        status_ = obs.status;
        return obs;
    } catch (const Error& e) {
        throw ProtocolError("game server sent an invalid observation: " + std::string(e.what()));
    }
}

Observation RemoteEnv::reset() {
    auto obs = call("reset", json::object());
    started_ = true;
    return obs;
}

Observation RemoteEnv::step(const ActionCommand& cmd) {
    if (cmd.is_reset()) return reset();
    if (!started_) throw EnvStateError("step before reset: issue RESET first");
    if (status_ == GameStatus::GameOver || status_ == GameStatus::Win)
        throw EnvStateError("game is " + std::string(to_string(status_)) + "; issue RESET to play again");
    cmd.validate();
    return call("action", to_json(cmd));
}

}  // namespace sensi
