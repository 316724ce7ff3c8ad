#include "sensi/chat_backend.hpp"

#include "sensi/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace sensi {

using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

ChatConfig ChatConfig::from_json(const json& j) {
    ChatConfig c;
    c.endpoint = j.value("endpoint", env_or("SENSI_LLM_ENDPOINT", ""));
    c.model = j.value("model", env_or("SENSI_LLM_MODEL", ""));
    c.api_key = env_or("SENSI_LLM_KEY", j.value("api_key", std::string()));
    c.temperature = j.value("temperature", 0.0);
    c.max_tokens = j.value("max_tokens", 1024);
    c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
    c.retry.initial_backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
    c.retry.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    return c;
}

void ChatConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("remote backend needs an endpoint (set SENSI_LLM_ENDPOINT)");
    if (model.empty()) throw ConfigError("remote backend needs a model (set SENSI_LLM_MODEL)");
    parse_url(endpoint);
    if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

json build_chat_request(const ChatConfig& config, const StageRequest& request) {
    if (!request.prompt) throw ValidationError("remote stage call without a prompt");
    std::string text = request.prompt->user_text();
    if (!request.repair_hint.empty())
        text += "## correction\nYour previous reply could not be used: " + request.repair_hint +
                "\nReply again with valid JSON only.\n";
    json user;
    if (request.prompt->images.empty()) {
        user = {{"role", "user"}, {"content", text}};
    } else {
        json parts = json::array({{{"type", "text"}, {"text", text}}});
        for (const auto& img : request.prompt->images)
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", img}}}});
        user = {{"role", "user"}, {"content", parts}};
    }
    return {{"model", config.model},
            {"temperature", config.temperature},
            {"max_tokens", config.max_tokens},
            {"messages", json::array({{{"role", "system"}, {"content", request.prompt->system}}, user})}};
}

std::string chat_reply_text(const json& response) {
    try {
        const auto& content = response.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        std::string out;
        for (const auto& part : content)
            if (part.value("type", "") == "text") out += part.value("text", "");
        return out;
    } catch (const json::exception&) {
        throw ProtocolError("chat reply lacks choices[0].message.content");
    }
}

ChatBackend::ChatBackend(ChatConfig config) : config_(std::move(config)) {
    config_.validate();
    url_ = parse_url(config_.endpoint);
    if (config_.trace_dir) std::filesystem::create_directories(*config_.trace_dir);
}

std::string ChatBackend::invoke(const StageRequest& request) {
    auto body = build_chat_request(config_, request);
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    std::string base;
    if (config_.trace_dir) {
        char name[96];
        std::snprintf(name, sizeof name, "%04d_t%03d_%s_a%d", ++calls_, request.turn_index,
                      std::string(to_string(request.stage)).c_str(), request.attempt);
        base = (*config_.trace_dir / name).string();
        write_file(base + ".request.json", body.dump(2));
    }
    auto response = post_json(url_, body, headers, config_.retry);
    auto text = chat_reply_text(response);
    if (config_.trace_dir) write_file(base + ".response.txt", text);
    return text;
}

}  // namespace sensi
