#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <string>
#include <vector>

namespace sensi {

struct Url {
    std::string scheme;  // http or https
    std::string host;
    int port = 80;
    std::string path;  // begins with '/'

    std::string origin() const;
};

/// Throws ConfigError for anything but http(s)://host[:port][/path].
Url parse_url(const std::string& text);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};  // doubles after each failure
    std::chrono::milliseconds timeout{30000};
};

/// POSTs JSON and returns the parsed JSON reply. Connection failures, 429 and
/// 5xx are retried with exponential backoff, then surface as RetryableError.
/// Other non-2xx statuses and non-JSON bodies throw ProtocolError.
nlohmann::json post_json(const Url& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, const RetryPolicy& policy);

}  // namespace sensi
