#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "httpfuzz/fingerprint.hpp"
#include "httpfuzz/llm_provider.hpp"
#include "httpfuzz/mutation.hpp"
#include "httpfuzz/scheduler.hpp"
#include "httpfuzz/template_store.hpp"
#include "httpfuzz/transport.hpp"

namespace httpfuzz {

class TargetUnreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LoginFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FindingKind { CommandInjection, ConnectionReset, AnomalousStatus };

std::string to_string(FindingKind k);

struct Finding {
    FindingKind kind = FindingKind::AnomalousStatus;
    std::string template_id;
    std::string marker;
    std::string route;
    std::string request_bytes;
    std::string response_summary;  // raw response or the transport error name
    std::string evidence;          // echoed marker / anomalous status
    long execution_index = 0;
    std::string timestamp;         // ISO-8601 UTC
    long occurrences = 1;          // repeats of the same (kind, route)
};

struct AuthConfig {
    std::filesystem::path login_request_file;
    std::filesystem::path check_request_file;  // optional; login request reused when empty
    int check_interval_seconds = 30;
    std::string token_pattern;  // first capture group is the session token
    std::string cookie_name = "sid";
};

/// Keeps the session token fresh: periodic validity checks plus reactive
/// re-login, with the current token substituted into outgoing requests.
class SessionManager {
public:
    SessionManager() = default;
    SessionManager(AuthConfig cfg, const TcpTransport* transport);

    bool enabled() const { return transport_ != nullptr; }
    const std::string& token() const { return token_; }

    void login();
    /// Periodic check; re-logs-in when the token is rejected.
    void tick();
    /// Called when a fuzzed request came back 401/403.
    void invalidate();
    std::string apply(std::string request_bytes) const;

    long logins() const { return logins_; }

private:
    bool token_valid();

    AuthConfig cfg_;
    const TcpTransport* transport_ = nullptr;
    std::string login_bytes_;
    std::string check_bytes_;
    std::string token_;
    long logins_ = 0;
    std::chrono::steady_clock::time_point last_check_{};
};

/// sent/result pair classification. `baseline_status` is the route's
/// un-mutated response status, when known.
std::optional<Finding> detect_anomalies(const Mutant& sent, const ExchangeResult& result,
                                        std::optional<int> baseline_status);

struct CampaignConfig {
    std::string host = "127.0.0.1";
    int port = 0;
    std::filesystem::path seeds_dir;
    std::filesystem::path routes_dir;
    bool enrichment = true;
    SchedulerMode scheduler = SchedulerMode::Stsa;
    double budget_seconds = 0.0;  // 0 = unlimited
    long budget_executions = 0;   // 0 = unlimited; both 0 = empty run
    std::uint64_t rng_seed = 1;
    std::filesystem::path dictionary_file;
    std::filesystem::path prompts_dir;
    std::filesystem::path mock_fixtures_dir;  // mock provider when set
    std::string provider_url;                 // remote provider when set
    ScrubConfig scrub;
    std::optional<AuthConfig> auth;
    int executors = 1;
    int queue_capacity = 64;
    long stop_after_findings = 0;  // stop once this many distinct findings exist
    long max_promotions = 64;
    double rate_limit_rps = 0.0;  // 0 = unthrottled
    int transport_timeout_ms = 5000;
    std::filesystem::path output_dir;  // report.json, findings/, pool.jsonl, feedback.jsonl
};

/// TOML-style key = value file mirroring the CLI flags.
CampaignConfig load_campaign_config(const std::filesystem::path& file);

struct TemplateReportRow {
    std::string id;
    std::string origin;
    long alpha = 0, beta = 0, invocations = 0, v = 0;
};

struct CampaignReport {
    long executions = 0;
    long baseline_requests = 0;
    double duration_seconds = 0.0;
    double executions_per_second = 0.0;
    long new_fingerprints = 0;
    long pool_initial = 0;
    long pool_final = 0;
    long promotions = 0;
    long logins = 0;
    long responses_ok = 0;            // any parsed response
    long responses_unauthorized = 0;  // 401/403
    double auth_success_rate = 1.0;   // share of responses that were not auth rejections
    long executions_at_all_findings = -1;  // -1 when stop_after_findings never hit
    std::vector<Finding> findings;
    std::vector<std::string> warnings;
    std::vector<TemplateReportRow> per_template;

    std::string to_json() const;
    void save(const std::filesystem::path& file) const;
    std::string summary() const;
};

CampaignReport run_campaign(const CampaignConfig& cfg);

}  // namespace httpfuzz
