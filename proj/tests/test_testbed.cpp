#include <doctest.h>

#include <chrono>
#include <thread>

#include "httpfuzz/testbed.hpp"
#include "httpfuzz/transport.hpp"

using namespace httpfuzz;
using namespace httpfuzz::testbed;

namespace {

Scenario scenario(const std::string& text) { return Scenario::parse(text); }

ExchangeResult send_form(int port, const std::string& path, const std::string& body,
                         const std::string& cookie = "") {
    std::string req = "POST " + path + " HTTP/1.1\r\nHost: t\r\n"
                      "Content-Type: application/x-www-form-urlencoded\r\n";
    if (!cookie.empty()) req += "Cookie: " + cookie + "\r\n";
    req += "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
    TcpTransport t("127.0.0.1", port, 3000);
    return t.roundtrip(req);
}

}  // namespace

TEST_CASE("scenario files load and validate") {
    auto sc = Scenario::load(std::filesystem::path(SCENARIOS_DIR) / "lste.json");
    REQUIRE(sc.sinks.size() == 2);
    CHECK(sc.sinks[0].behavior == SinkBehavior::HiddenBranch);
    CHECK(sc.sinks[0].trigger == "del");
    CHECK(sc.sinks[1].behavior == SinkBehavior::ValueSetGate);
    CHECK(sc.sinks[1].values.size() == 3);
    CHECK_FALSE(sc.session.has_value());

    auto sess = Scenario::load(std::filesystem::path(SCENARIOS_DIR) / "session.json");
    REQUIRE(sess.session.has_value());
    CHECK(sess.session->username == "admin");
    CHECK(sess.session->ttl_seconds == 60);

    CHECK_THROWS_AS(Scenario::load("/nonexistent.json"), InvalidScenario);
    CHECK_THROWS_AS(scenario("not json"), InvalidScenario);
    CHECK_THROWS_AS(scenario(R"({"sinks": "nope"})"), InvalidScenario);
    CHECK_THROWS_AS(scenario(R"({"sinks": [{"behavior": "static"}]})"), InvalidScenario);
    CHECK_THROWS_AS(scenario(R"({"sinks": [{"route": "/r", "behavior": "weird"}]})"),
                    InvalidScenario);
    CHECK_THROWS_AS(
        scenario(R"({"sinks": [], "session": {"username": "", "password": ""}})"),
        InvalidScenario);
}

TEST_CASE("matches_format implements scanf-style checks") {
    CHECK(matches_format("%d", "42"));
    CHECK(matches_format("%d", "-42"));
    CHECK_FALSE(matches_format("%u", "-42"));
    CHECK_FALSE(matches_format("%d", "x"));
    CHECK_FALSE(matches_format("%d", ""));
    CHECK(matches_format("%d:%d:%s", "1:22:host"));
    CHECK_FALSE(matches_format("%d:%d:%s", "1:22:"));
    CHECK_FALSE(matches_format("%d:%d:%s", "1:x:host"));
    CHECK(matches_format("v=%s", "v=anything here"));
    CHECK_FALSE(matches_format("v=%s", "w=x"));
    CHECK_FALSE(matches_format("%d", "42x"));
}

TEST_CASE("server binds an ephemeral port and serves the static sink") {
    Server server(scenario(R"({"sinks": [{"route": "/s", "behavior": "static"}]})"));
    REQUIRE(server.port() > 0);
    TcpTransport t("127.0.0.1", server.port(), 3000);
    CHECK(t.reachable());

    auto r = send_form(server.port(), "/s", "x=1");
    REQUIRE(r.ok());
    CHECK(r.response->status == 200);
    CHECK(r.response->body == "ok\n");

    auto missing = send_form(server.port(), "/other", "x=1");
    REQUIRE(missing.ok());
    CHECK(missing.response->status == 404);
    CHECK(server.count_notes("not_found") == 1);
}

TEST_CASE("binding an occupied port raises PortInUse") {
    Server first(scenario(R"({"sinks": [{"route": "/s", "behavior": "static"}]})"));
    CHECK_THROWS_AS(
        Server(scenario(R"({"sinks": [{"route": "/s", "behavior": "static"}]})"), first.port()),
        PortInUse);
}

TEST_CASE("echo sink prints the token a shell would") {
    Server server(scenario(
        R"({"sinks": [{"route": "/exec", "behavior": "echo_command", "param": "cmd"}]})"));
    auto hit = send_form(server.port(), "/exec", "cmd=ping%3Becho%20MK123%3B");
    REQUIRE(hit.ok());
    CHECK(hit.response->status == 200);
    CHECK(hit.response->body.find("executed: MK123") != std::string::npos);

    auto miss = send_form(server.port(), "/exec", "cmd=ping");
    REQUIRE(miss.ok());
    CHECK(miss.response->body == "ok\n");
    CHECK(server.count_notes("echo") == 1);
}

TEST_CASE("crash sink resets the connection above the threshold") {
    Server server(scenario(
        R"({"sinks": [{"route": "/n", "behavior": "crash_on_length", "param": "name",
            "threshold": 16}]})"));
    auto ok = send_form(server.port(), "/n", "name=short");
    REQUIRE(ok.ok());
    CHECK(ok.response->status == 200);

    auto crash = send_form(server.port(), "/n", "name=" + std::string(64, 'A'));
    CHECK_FALSE(crash.ok());
    CHECK(crash.error == TransportError::Reset);
    CHECK(server.count_notes("crash") == 1);
}

TEST_CASE("hidden branch answers only the trigger literal") {
    Server server(scenario(
        R"({"sinks": [{"route": "/w", "behavior": "hidden_branch", "param": "action",
            "trigger": "del"}]})"));
    auto plain = send_form(server.port(), "/w", "action=list");
    REQUIRE(plain.ok());
    CHECK(plain.response->body == "ok\n");

    auto hit = send_form(server.port(), "/w", "action=del");
    REQUIRE(hit.ok());
    CHECK(hit.response->body == "branch del\n");
    CHECK(server.count_notes("hidden:del") == 1);
}

TEST_CASE("value set gate distinguishes members and the error literal") {
    Server server(scenario(
        R"({"sinks": [{"route": "/g", "behavior": "value_set_gate", "param": "mode",
            "values": ["alpha", "beta", "boom"], "error_value": "boom"}]})"));
    auto member = send_form(server.port(), "/g", "mode=beta");
    REQUIRE(member.ok());
    CHECK(member.response->status == 200);
    CHECK(member.response->body == "mode beta\n");

    auto err = send_form(server.port(), "/g", "mode=boom");
    REQUIRE(err.ok());
    CHECK(err.response->status == 500);

    auto other = send_form(server.port(), "/g", "mode=zzz");
    REQUIRE(other.ok());
    CHECK(other.response->body == "ok\n");

    CHECK(server.count_notes("gate:beta") == 1);
    CHECK(server.count_notes("error_gate") == 1);
}

TEST_CASE("format gate accepts only matching values") {
    Server server(scenario(
        R"({"sinks": [{"route": "/f", "behavior": "format_gate", "param": "bind",
            "format": "%d:%d:%s"}]})"));
    auto good = send_form(server.port(), "/f", "bind=1:2:host");
    REQUIRE(good.ok());
    CHECK(good.response->status == 200);
    CHECK(good.response->body == "accepted\n");

    auto bad = send_form(server.port(), "/f", "bind=nope");
    REQUIRE(bad.ok());
    CHECK(bad.response->status == 400);
    CHECK(server.count_notes("format_ok") == 1);
}

TEST_CASE("session gate enforces login, cookies and expiry") {
    Server server(scenario(R"({
        "sinks": [{"route": "/p", "behavior": "session_gate", "param": "x"}],
        "session": {"login_route": "/login", "username": "admin", "password": "secret",
                    "ttl_seconds": 1}})"));

    auto denied = send_form(server.port(), "/login", "user=admin&pass=wrong");
    REQUIRE(denied.ok());
    CHECK(denied.response->status == 403);

    auto nocookie = send_form(server.port(), "/p", "x=1");
    REQUIRE(nocookie.ok());
    CHECK(nocookie.response->status == 401);

    auto login = send_form(server.port(), "/login", "user=admin&pass=secret");
    REQUIRE(login.ok());
    CHECK(login.response->status == 200);
    std::string setc = login.response->header("set-cookie").value_or("");
    REQUIRE(setc.rfind("sid=", 0) == 0);
    std::string cookie = setc;

    auto granted = send_form(server.port(), "/p", "x=1", cookie);
    REQUIRE(granted.ok());
    CHECK(granted.response->status == 200);
    CHECK(granted.response->body == "secret\n");

    auto forged = send_form(server.port(), "/p", "x=1", "sid=sforged");
    REQUIRE(forged.ok());
    CHECK(forged.response->status == 401);

    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    auto expired = send_form(server.port(), "/p", "x=1", cookie);
    REQUIRE(expired.ok());
    CHECK(expired.response->status == 401);

    CHECK(server.count_notes("login_ok") == 1);
    CHECK(server.count_notes("login_denied") == 1);
    CHECK(server.count_notes("unauthorized") == 3);
    CHECK(server.count_notes("session_ok") == 1);
}

TEST_CASE("the request log stores verbatim bytes") {
    Server server(scenario(R"({"sinks": [{"route": "/s", "behavior": "static"}]})"));
    std::string req = "GET /s?q=1 HTTP/1.1\r\nHost: t\r\nX-Probe: yes\r\n\r\n";
    TcpTransport t("127.0.0.1", server.port(), 3000);
    auto r = t.roundtrip(req);
    REQUIRE(r.ok());
    auto log = server.log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].raw == req);
    CHECK(log[0].route == "/s");
    CHECK(log[0].note.empty());
}

TEST_CASE("stop is idempotent and ends service") {
    auto* server = new Server(scenario(R"({"sinks": [{"route": "/s", "behavior": "static"}]})"));
    int port = server->port();
    server->stop();
    server->stop();
    delete server;
    TcpTransport t("127.0.0.1", port, 500);
    auto r = t.roundtrip("GET /s HTTP/1.1\r\nHost: t\r\n\r\n");
    CHECK_FALSE(r.ok());
}
