#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "httpfuzz/campaign.hpp"
#include "httpfuzz/testbed.hpp"

using namespace httpfuzz;

namespace {

const std::filesystem::path kScenarios = SCENARIOS_DIR;

Mutant fake_mutant(bool command_payload, const std::string& marker) {
    Mutant m;
    m.request = RawHttpRequest::parse("GET /r?x=1 HTTP/1.1\r\nHost: h\r\n\r\n");
    m.plan.template_id = "t1";
    m.plan.marker = marker;
    m.plan.command_payload = command_payload;
    return m;
}

ExchangeResult ok_response(int status, const std::string& body) {
    ExchangeResult r;
    HttpResponse resp;
    resp.status = status;
    resp.body = body;
    resp.headers = {{"Connection", "close"}};
    r.response = resp;
    return r;
}

ExchangeResult error_result(TransportError e) {
    ExchangeResult r;
    r.error = e;
    return r;
}

std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

CampaignConfig base_config(int port, const std::string& scenario_name) {
    CampaignConfig cfg;
    cfg.host = "127.0.0.1";
    cfg.port = port;
    cfg.seeds_dir = kScenarios / "seeds" / scenario_name;
    cfg.dictionary_file = DICTIONARY_FILE;
    cfg.enrichment = false;
    cfg.rng_seed = 7;
    cfg.transport_timeout_ms = 2000;
    return cfg;
}

}  // namespace

TEST_CASE("detect_anomalies flags echoed command markers") {
    auto m = fake_mutant(true, "MK42");
    auto hit = detect_anomalies(m, ok_response(200, "executed: MK42\n"), 200);
    REQUIRE(hit.has_value());
    CHECK(hit->kind == FindingKind::CommandInjection);
    CHECK(hit->route == "/r");
    CHECK(hit->evidence.find("MK42") != std::string::npos);

    CHECK_FALSE(detect_anomalies(m, ok_response(200, "ok\n"), 200).has_value());
    // marker in body without a command payload is no injection proof
    auto passive = fake_mutant(false, "MK42");
    CHECK_FALSE(detect_anomalies(passive, ok_response(200, "MK42"), 200).has_value());
}

TEST_CASE("detect_anomalies flags connection resets but not timeouts") {
    auto m = fake_mutant(false, "MK");
    auto reset = detect_anomalies(m, error_result(TransportError::Reset), 200);
    REQUIRE(reset.has_value());
    CHECK(reset->kind == FindingKind::ConnectionReset);

    CHECK_FALSE(detect_anomalies(m, error_result(TransportError::Timeout), 200).has_value());
    CHECK_FALSE(detect_anomalies(m, error_result(TransportError::ConnectFailed), 200).has_value());
}

TEST_CASE("detect_anomalies needs a healthy baseline for status findings") {
    auto m = fake_mutant(false, "MK");
    auto hit = detect_anomalies(m, ok_response(500, "boom"), 200);
    REQUIRE(hit.has_value());
    CHECK(hit->kind == FindingKind::AnomalousStatus);
    CHECK(hit->evidence == "status 500 vs baseline 200");

    CHECK_FALSE(detect_anomalies(m, ok_response(500, "boom"), 500).has_value());
    CHECK_FALSE(detect_anomalies(m, ok_response(500, "boom"), std::nullopt).has_value());
    CHECK_FALSE(detect_anomalies(m, ok_response(404, "gone"), 200).has_value());
}

TEST_CASE("campaign config files parse every key and reject unknown ones") {
    auto dir = fresh_dir("httpfuzz_cfg");
    auto file = dir / "campaign.conf";
    std::ofstream(file) << "target = 10.0.0.2:8080\n"
                           "seeds = /tmp/seeds\n"
                           "routes = /tmp/routes\n"
                           "enrichment = false\n"
                           "scheduler = roundrobin\n"
                           "# comment line\n"
                           "budget_seconds = 12.5\n"
                           "budget_executions = 300\n"
                           "rng_seed = 99\n"
                           "dictionary = /tmp/d.dict\n"
                           "executors = 4\n"
                           "queue_capacity = 16\n"
                           "stop_after_findings = 2\n"
                           "max_promotions = 8\n"
                           "rate_limit = 120.5\n"
                           "transport_timeout_ms = 750\n"
                           "scrub = sid=[0-9]+\n"
                           "scrub = date:.*\n"
                           "auth_login = /tmp/login.http\n"
                           "auth_token_pattern = sid=(s[0-9]+)\n"
                           "auth_interval_seconds = 5\n";
    auto cfg = load_campaign_config(file);
    CHECK(cfg.host == "10.0.0.2");
    CHECK(cfg.port == 8080);
    CHECK(cfg.seeds_dir == "/tmp/seeds");
    CHECK(cfg.routes_dir == "/tmp/routes");
    CHECK_FALSE(cfg.enrichment);
    CHECK(cfg.scheduler == SchedulerMode::RoundRobin);
    CHECK(cfg.budget_seconds == doctest::Approx(12.5));
    CHECK(cfg.budget_executions == 300);
    CHECK(cfg.rng_seed == 99);
    CHECK(cfg.executors == 4);
    CHECK(cfg.queue_capacity == 16);
    CHECK(cfg.stop_after_findings == 2);
    CHECK(cfg.max_promotions == 8);
    CHECK(cfg.rate_limit_rps == doctest::Approx(120.5));
    CHECK(cfg.transport_timeout_ms == 750);
    REQUIRE(cfg.scrub.patterns.size() == 2);
    REQUIRE(cfg.auth.has_value());
    CHECK(cfg.auth->login_request_file == "/tmp/login.http");
    CHECK(cfg.auth->token_pattern == "sid=(s[0-9]+)");
    CHECK(cfg.auth->check_interval_seconds == 5);

    std::ofstream(dir / "bad.conf") << "no_such_key = 1\n";
    CHECK_THROWS_AS(load_campaign_config(dir / "bad.conf"), std::runtime_error);
}

TEST_CASE("zero budget yields an empty report without touching the network") {
    auto cfg = base_config(1, "control");  // port 1: nothing listens, must not matter
    cfg.budget_executions = 0;
    cfg.budget_seconds = 0;
    auto report = run_campaign(cfg);
    CHECK(report.executions == 0);
    CHECK(report.findings.empty());
    CHECK(report.new_fingerprints == 0);
}

TEST_CASE("unreachable targets fail fast") {
    auto cfg = base_config(1, "control");
    cfg.budget_executions = 10;
    CHECK_THROWS_AS(run_campaign(cfg), TargetUnreachable);
}

TEST_CASE("identical configs reproduce the campaign exactly") {
    using testbed::Scenario;
    auto run_once = [&]() {
        testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
        auto cfg = base_config(server.port(), "anomaly");
        cfg.budget_executions = 250;
        return run_campaign(cfg);
    };
    auto a = run_once();
    auto b = run_once();
    CHECK(a.executions == b.executions);
    CHECK(a.new_fingerprints == b.new_fingerprints);
    CHECK(a.promotions == b.promotions);
    CHECK(a.findings.size() == b.findings.size());
    for (std::size_t i = 0; i < a.findings.size(); ++i) {
        CHECK(a.findings[i].kind == b.findings[i].kind);
        CHECK(a.findings[i].route == b.findings[i].route);
        CHECK(a.findings[i].execution_index == b.findings[i].execution_index);
        CHECK(a.findings[i].request_bytes == b.findings[i].request_bytes);
    }
    REQUIRE(a.per_template.size() == b.per_template.size());
    for (std::size_t i = 0; i < a.per_template.size(); ++i) {
        CHECK(a.per_template[i].id == b.per_template[i].id);
        CHECK(a.per_template[i].alpha == b.per_template[i].alpha);
        CHECK(a.per_template[i].beta == b.per_template[i].beta);
        CHECK(a.per_template[i].invocations == b.per_template[i].invocations);
    }
}

TEST_CASE("feedback bookkeeping conserves execution counts") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 200;
    auto report = run_campaign(cfg);
    CHECK(report.executions > 0);
    CHECK(report.executions <= 200);
    long invocations = 0, alpha = 0, beta = 0;
    for (const auto& row : report.per_template) {
        invocations += row.invocations;
        alpha += row.alpha - kPriorAlpha;
        beta += row.beta - kPriorBeta;
    }
    CHECK(invocations == report.executions);
    CHECK(alpha + beta == report.executions);
    // baseline probes are tracked separately from executions
    CHECK(report.baseline_requests > 0);
    CHECK(report.executions_per_second > 0.0);
}

TEST_CASE("campaigns on the anomaly scenario surface both finding kinds") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 3000;
    cfg.max_promotions = 0;  // keep the two seed routes in balance
    auto report = run_campaign(cfg);

    bool injection = false, reset = false;
    for (const auto& f : report.findings) {
        if (f.kind == FindingKind::CommandInjection && f.route == "/goform/exec") injection = true;
        if (f.kind == FindingKind::ConnectionReset && f.route == "/goform/name") reset = true;
        CHECK(f.occurrences >= 1);
    }
    CHECK(injection);
    CHECK(reset);
    // deduplicated by (kind, route): at most one entry per pair
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& f : report.findings)
        CHECK(pairs.insert({to_string(f.kind), f.route}).second);
    // echo server really printed the marker
    CHECK(server.count_notes("echo") > 0);
    CHECK(server.count_notes("crash") > 0);
}

TEST_CASE("control scenario produces no findings") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "control.json"));
    auto cfg = base_config(server.port(), "control");
    cfg.budget_executions = 400;
    auto report = run_campaign(cfg);
    CHECK(report.executions > 0);
    CHECK(report.findings.empty());
}

TEST_CASE("interesting mutants are promoted into the pool") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 600;
    auto report = run_campaign(cfg);
    CHECK(report.pool_initial == 2);
    CHECK(report.promotions > 0);
    CHECK(report.pool_final == report.pool_initial + report.promotions);
    CHECK(report.new_fingerprints > 0);

    // promotion cap is respected
    auto capped = base_config(server.port(), "anomaly");
    capped.budget_executions = 600;
    capped.max_promotions = 1;
    auto capped_report = run_campaign(capped);
    CHECK(capped_report.promotions <= 1);
}

TEST_CASE("stop_after_findings ends the campaign early") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 5000;
    cfg.stop_after_findings = 1;
    auto report = run_campaign(cfg);
    REQUIRE(!report.findings.empty());
    CHECK(report.executions_at_all_findings > 0);
    CHECK(report.executions_at_all_findings <= report.executions);
    CHECK(report.executions < 5000);
}

TEST_CASE("output directory receives report, pool and finding artifacts") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto out = fresh_dir("httpfuzz_out");
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 1500;
    cfg.output_dir = out;
    auto report = run_campaign(cfg);
    CHECK(std::filesystem::is_regular_file(out / "report.json"));
    CHECK(std::filesystem::is_regular_file(out / "pool.jsonl"));
    if (!report.findings.empty()) {
        REQUIRE(std::filesystem::is_directory(out / "findings"));
        std::size_t files = 0;
        for (const auto& e : std::filesystem::directory_iterator(out / "findings")) {
            ++files;
            CHECK(std::filesystem::file_size(e.path()) > 0);
        }
        CHECK(files == report.findings.size());
    }
    // the pool snapshot reloads
    auto pool = TemplatePool::load(out / "pool.jsonl");
    CHECK(pool.size() == static_cast<std::size_t>(report.pool_final));
    // report text mentions the executions
    CHECK(report.to_json().find("\"executions\"") != std::string::npos);
    CHECK(!report.summary().empty());
}

TEST_CASE("parallel executors keep counts consistent") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "anomaly.json"));
    auto cfg = base_config(server.port(), "anomaly");
    cfg.budget_executions = 400;
    cfg.executors = 4;
    auto report = run_campaign(cfg);
    CHECK(report.executions > 0);
    long invocations = 0;
    for (const auto& row : report.per_template) invocations += row.invocations;
    CHECK(invocations == report.executions);
}

TEST_CASE("session manager logs in, applies and refreshes tokens") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "session.json"));
    TcpTransport transport("127.0.0.1", server.port(), 2000);

    AuthConfig auth;
    auth.login_request_file = kScenarios / "session_login.http";
    auth.check_request_file = kScenarios / "session_check.http";
    auth.token_pattern = "sid=(s[0-9]+)";
    auth.check_interval_seconds = 0;

    SessionManager session(auth, &transport);
    CHECK(session.enabled());
    session.login();
    CHECK(session.token() == "s1");
    CHECK(session.logins() == 1);

    std::string applied = session.apply(
        "GET /goform/ping?x=1 HTTP/1.1\r\nHost: h\r\nCookie: sid=stale\r\n\r\n");
    CHECK(applied.find("Cookie: sid=s1\r\n") != std::string::npos);
    CHECK(applied.find("stale") == std::string::npos);
    auto r = transport.roundtrip(applied);
    REQUIRE(r.ok());
    CHECK(r.response->status == 200);

    // requests without a cookie line gain one
    std::string added = session.apply("GET /goform/ping?x=1 HTTP/1.1\r\nHost: h\r\n\r\n");
    CHECK(added.find("Cookie: sid=s1\r\n") != std::string::npos);

    session.invalidate();
    CHECK(session.logins() == 2);
    CHECK(session.token() == "s2");
}

TEST_CASE("wrong credentials raise LoginFailed") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "session.json"));
    TcpTransport transport("127.0.0.1", server.port(), 2000);

    auto dir = fresh_dir("httpfuzz_badlogin");
    std::string body = "user=admin&pass=nope";
    std::ofstream(dir / "login.http")
        << "POST /login HTTP/1.1\r\nHost: h\r\n"
           "Content-Type: application/x-www-form-urlencoded\r\n"
           "Content-Length: " << body.size() << "\r\n\r\n" << body;
    AuthConfig auth;
    auth.login_request_file = dir / "login.http";
    auth.token_pattern = "sid=(s[0-9]+)";
    SessionManager session(auth, &transport);
    CHECK_THROWS_AS(session.login(), LoginFailed);
}

TEST_CASE("authenticated campaign sustains its session") {
    using testbed::Scenario;
    testbed::Server server(Scenario::load(kScenarios / "session.json"));
    auto cfg = base_config(server.port(), "session");
    cfg.budget_executions = 300;
    AuthConfig auth;
    auth.login_request_file = kScenarios / "session_login.http";
    auth.token_pattern = "sid=(s[0-9]+)";
    auth.check_interval_seconds = 1;
    cfg.auth = auth;
    auto report = run_campaign(cfg);
    CHECK(report.executions > 0);
    CHECK(report.logins >= 1);
    CHECK(report.responses_ok > 0);
    CHECK(report.auth_success_rate > 0.9);
    CHECK(server.count_notes("session_ok") > 0);
}
