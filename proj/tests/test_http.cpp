#include "mock_server.hpp"

#include "sensi/errors.hpp"
#include "sensi/http.hpp"

#include <doctest.h>

#include <atomic>

using namespace sensi;
using nlohmann::json;
using sensi::testing::MockServer;

namespace {

RetryPolicy fast(int attempts = 3) { return RetryPolicy{attempts, std::chrono::milliseconds(1), std::chrono::milliseconds(300)}; }

}  // namespace

TEST_CASE("URLs") {
    auto u = parse_url("http://localhost:8080/v1/chat");
    CHECK(u.scheme == "http");
    CHECK(u.host == "localhost");
    CHECK(u.port == 8080);
    CHECK(u.path == "/v1/chat");
    CHECK(u.origin() == "http://localhost:8080");
    CHECK(parse_url("https://example.org").port == 443);
    CHECK(parse_url("https://example.org").path == "/");
    CHECK_THROWS_AS(parse_url("ftp://x"), ConfigError);
    CHECK_THROWS_AS(parse_url("localhost:80"), ConfigError);
}

TEST_CASE("JSON is posted with the given headers and the reply parsed") {
    MockServer mock;
    std::string auth, body;
    mock.server.Post("/echo", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        body = req.body;
        res.set_content(R"({"ok": true})", "application/json");
    });
    mock.start();
    auto reply = post_json(parse_url(mock.url("/echo")), {{"x", 1}}, {{"Authorization", "Bearer t"}}, fast());
    CHECK(reply == json{{"ok", true}});
    CHECK(auth == "Bearer t");
    CHECK(json::parse(body) == json{{"x", 1}});
}

TEST_CASE("429 and 5xx are retried, then succeed") {
    MockServer mock;
    std::atomic<int> calls = 0;
    mock.server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        int n = ++calls;
        if (n == 1) res.status = 429;
        else if (n == 2) res.status = 503;
        else res.set_content("{\"n\": 3}", "application/json");
    });
    mock.start();
    CHECK(post_json(parse_url(mock.url("/flaky")), json::object(), {}, fast())["n"] == 3);
    CHECK(calls == 3);
}

TEST_CASE("persistent server errors become retryable after the configured attempts") {
    MockServer mock;
    std::atomic<int> calls = 0;
    mock.server.Post("/down", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 500;
    });
    mock.start();
    CHECK_THROWS_AS(post_json(parse_url(mock.url("/down")), json::object(), {}, fast(3)), RetryableError);
    CHECK(calls == 3);
}

TEST_CASE("a slow server times out and is retried") {
    MockServer mock;
    std::atomic<int> calls = 0;
    mock.server.Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content("{}", "application/json");
    });
    mock.start();
    CHECK_THROWS_AS(post_json(parse_url(mock.url("/slow")), json::object(), {}, fast(3)), RetryableError);
    CHECK(calls == 3);
}

TEST_CASE("client errors and non-JSON bodies break the contract") {
    MockServer mock;
    std::atomic<int> calls = 0;
    mock.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 400;
        res.set_content("nope", "text/plain");
    });
    mock.server.Post("/text", [&](const httplib::Request&, httplib::Response& res) { res.set_content("hello", "text/plain"); });
    mock.start();
    CHECK_THROWS_AS(post_json(parse_url(mock.url("/bad")), json::object(), {}, fast()), ProtocolError);
    CHECK(calls == 1);
    CHECK_THROWS_AS(post_json(parse_url(mock.url("/text")), json::object(), {}, fast()), ProtocolError);
}

TEST_CASE("an unreachable host is retryable") {
    MockServer mock;
    mock.start();
    const auto url = parse_url(mock.url("/gone"));
    mock.stop();
    CHECK_THROWS_AS(post_json(url, json::object(), {}, fast(2)), RetryableError);
}
