#include "sensi/http.hpp"

#include "sensi/errors.hpp"

#include <httplib.h>

#include <regex>
#include <thread>

namespace sensi {

std::string Url::origin() const { return scheme + "://" + host + ":" + std::to_string(port); }

Url parse_url(const std::string& text) {
    static const std::regex re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw ConfigError("not an http(s) URL: '" + text + "'");
    Url u;
    u.scheme = m[1];
    u.host = m[2];
    u.port = m[3].matched ? std::stoi(m[3]) : (u.scheme == "https" ? 443 : 80);
    u.path = m[4].matched ? m[4].str() : "/";
    return u;
}


nlohmann::json post_json(const Url& url, const nlohmann::json& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, const RetryPolicy& policy) {
    httplib::Client client(url.origin());
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);

    std::string payload = body.dump();
    std::string last_error;
    auto backoff = policy.initial_backoff;
    int attempts = std::max(1, policy.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto res = client.Post(url.path, hs, payload, "application/json");
        if (!res) {
            last_error = "POST " + url.origin() + url.path + " failed: " + httplib::to_string(res.error());
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "POST " + url.path + " returned HTTP " + std::to_string(res->status);
        } else if (res->status < 200 || res->status >= 300) {
            throw ProtocolError("POST " + url.path + " returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 200));
        } else {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProtocolError("POST " + url.path + " returned a non-JSON body: " + e.what());
            }
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw RetryableError(last_error + " (after " + std::to_string(attempts) + " attempts)");
}

}  // namespace sensi
