#pragma once

#include "sensi/cognition.hpp"
#include "sensi/http.hpp"

#include <filesystem>
#include <optional>

namespace sensi {

/// Minimal chat-completion contract: system + user messages, optional image
/// attachments, temperature and max tokens. Works with any provider that
/// accepts the widely used `messages` request shape.
struct ChatConfig {
    std::string endpoint;  // full URL of the completion route
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    int max_tokens = 1024;
    RetryPolicy retry{3, std::chrono::milliseconds(500), std::chrono::milliseconds(60000)};
    std::optional<std::filesystem::path> trace_dir;

    /// Fields from `j`, falling back to SENSI_LLM_ENDPOINT / SENSI_LLM_MODEL / SENSI_LLM_KEY.
    static ChatConfig from_json(const nlohmann::json& j);
    void validate() const;
};

nlohmann::json build_chat_request(const ChatConfig& config, const StageRequest& request);
/// Text of the first choice. Throws ProtocolError when the shape is wrong.
std::string chat_reply_text(const nlohmann::json& response);

class ChatBackend final : public Backend {
public:
    explicit ChatBackend(ChatConfig config);
    std::string name() const override { return "remote:" + config_.model; }
    std::string invoke(const StageRequest& request) override;

private:
    ChatConfig config_;
    Url url_;
    int calls_ = 0;
};

}  // namespace sensi
