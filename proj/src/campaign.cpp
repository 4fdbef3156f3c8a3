#include "httpfuzz/campaign.hpp"

#include <algorithm>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <fstream>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "httpfuzz/annotation.hpp"
#include "httpfuzz/enrichment.hpp"

namespace httpfuzz {

using nlohmann::json;

std::string to_string(FindingKind k) {
    switch (k) {
        case FindingKind::CommandInjection: return "command_injection";
        case FindingKind::ConnectionReset: return "connection_reset";
        case FindingKind::AnomalousStatus: return "anomalous_status";
    }
    return "?";
}

namespace {

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string response_raw(const HttpResponse& r) {
    std::ostringstream os;
    os << "HTTP/1.1 " << r.status << "\r\n";
    for (const auto& h : r.headers) os << h.name << ": " << h.value << "\r\n";
    os << "\r\n" << r.body;
    return os.str();
}

}  // namespace

SessionManager::SessionManager(AuthConfig cfg, const TcpTransport* transport)
    : cfg_(std::move(cfg)), transport_(transport) {
    login_bytes_ = slurp(cfg_.login_request_file);
    check_bytes_ = cfg_.check_request_file.empty() ? "" : slurp(cfg_.check_request_file);
}

void SessionManager::login() {
    if (!enabled()) return;
    ExchangeResult r = transport_->roundtrip(login_bytes_);
    if (!r.ok() || r.response->status >= 400)
        throw LoginFailed("login request rejected" +
                          (r.ok() ? " with status " + std::to_string(r.response->status)
                                  : " (" + to_string(*r.error) + ")"));
    std::string haystack = response_raw(*r.response);
    std::smatch m;
    if (!std::regex_search(haystack, m, std::regex(cfg_.token_pattern)) || m.size() < 2)
        throw LoginFailed("token pattern did not match the login response");
    token_ = m[1];
    ++logins_;
    last_check_ = std::chrono::steady_clock::now();
}

bool SessionManager::token_valid() {
    if (token_.empty()) return false;
    if (check_bytes_.empty()) return true;  // no dedicated check request configured
    ExchangeResult r = transport_->roundtrip(apply(check_bytes_));
    return r.ok() && r.response->status != 401 && r.response->status != 403;
}

void SessionManager::tick() {
    if (!enabled()) return;
    auto now = std::chrono::steady_clock::now();
    if (now - last_check_ < std::chrono::seconds(cfg_.check_interval_seconds)) return;
    last_check_ = now;
    if (!token_valid()) login();
}

void SessionManager::invalidate() {
    if (!enabled()) return;
    login();
}

std::string SessionManager::apply(std::string request_bytes) const {
    if (!enabled() || token_.empty()) return request_bytes;
    std::string needle = cfg_.cookie_name + "=";
    std::size_t pos = request_bytes.find(needle);
    if (pos != std::string::npos) {
        std::size_t vstart = pos + needle.size();
        std::size_t vend = request_bytes.find_first_of(";\r\n", vstart);
        if (vend == std::string::npos) vend = request_bytes.size();
        std::string out = request_bytes.substr(0, vstart) + token_ + request_bytes.substr(vend);
        return fix_content_length(std::move(out));
    }
    std::size_t head_end = request_bytes.find("\r\n\r\n");
    if (head_end == std::string::npos) return request_bytes;
    request_bytes.insert(head_end + 2, "Cookie: " + needle + token_ + "\r\n");
    return request_bytes;
}

std::optional<Finding> detect_anomalies(const Mutant& sent, const ExchangeResult& result,
                                        std::optional<int> baseline_status) {
    Finding f;
    f.template_id = sent.plan.template_id;
    f.marker = sent.plan.marker;
    f.route = sent.request.path();
    f.request_bytes = sent.request.serialize();
    f.timestamp = utc_timestamp();

    if (!result.ok()) {
        if (*result.error == TransportError::Reset) {
            f.kind = FindingKind::ConnectionReset;
            f.response_summary = to_string(*result.error);
            f.evidence = "peer aborted the connection mid-response";
            return f;
        }
        return std::nullopt;
    }

    const HttpResponse& resp = *result.response;
    if (sent.plan.command_payload && !sent.plan.marker.empty() &&
        resp.body.find(sent.plan.marker) != std::string::npos) {
        f.kind = FindingKind::CommandInjection;
        f.response_summary = response_raw(resp);
        f.evidence = "marker " + sent.plan.marker + " echoed in the response body";
        return f;
    }
    if (resp.status >= 500 && baseline_status && *baseline_status < 500) {
        f.kind = FindingKind::AnomalousStatus;
        f.response_summary = response_raw(resp);
        f.evidence = "status " + std::to_string(resp.status) + " vs baseline " +
                     std::to_string(*baseline_status);
        return f;
    }
    return std::nullopt;
}

CampaignConfig load_campaign_config(const std::filesystem::path& file) {
    std::ifstream f(file);
    if (!f) throw std::runtime_error("cannot read config " + file.string());
    CampaignConfig cfg;
    AuthConfig auth;
    bool has_auth = false;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            std::size_t b = s.find_first_not_of(" \t\"");
            std::size_t e = s.find_last_not_of(" \t\"");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        auto truthy = [&] { return value == "on" || value == "true" || value == "1"; };
        if (key == "target") {
            std::size_t colon = value.rfind(':');
            if (colon == std::string::npos) throw std::runtime_error("target must be host:port");
            cfg.host = value.substr(0, colon);
            cfg.port = std::stoi(value.substr(colon + 1));
        } else if (key == "seeds") cfg.seeds_dir = value;
        else if (key == "routes") cfg.routes_dir = value;
        else if (key == "enrichment") cfg.enrichment = truthy();
        else if (key == "scheduler") cfg.scheduler = scheduler_mode_from_string(value);
        else if (key == "budget_seconds") cfg.budget_seconds = std::stod(value);
        else if (key == "budget_executions") cfg.budget_executions = std::stol(value);
        else if (key == "rng_seed") cfg.rng_seed = std::stoull(value);
        else if (key == "dictionary") cfg.dictionary_file = value;
        else if (key == "prompts") cfg.prompts_dir = value;
        else if (key == "mock_fixtures") cfg.mock_fixtures_dir = value;
        else if (key == "provider_url") cfg.provider_url = value;
        else if (key == "scrub") cfg.scrub.patterns.push_back(value);
        else if (key == "executors") cfg.executors = std::stoi(value);
        else if (key == "queue_capacity") cfg.queue_capacity = std::stoi(value);
        else if (key == "stop_after_findings") cfg.stop_after_findings = std::stol(value);
        else if (key == "max_promotions") cfg.max_promotions = std::stol(value);
        else if (key == "rate_limit") cfg.rate_limit_rps = std::stod(value);
        else if (key == "transport_timeout_ms") cfg.transport_timeout_ms = std::stoi(value);
        else if (key == "output") cfg.output_dir = value;
        else if (key == "auth_login") { auth.login_request_file = value; has_auth = true; }
        else if (key == "auth_check") { auth.check_request_file = value; has_auth = true; }
        else if (key == "auth_interval_seconds") { auth.check_interval_seconds = std::stoi(value); has_auth = true; }
        else if (key == "auth_token_pattern") { auth.token_pattern = value; has_auth = true; }
        else if (key == "auth_cookie") { auth.cookie_name = value; has_auth = true; }
        else throw std::runtime_error("unknown config key: " + key);
    }
    if (has_auth) cfg.auth = std::move(auth);
    return cfg;
}

std::string CampaignReport::to_json() const {
    json doc;
    doc["executions"] = executions;
    doc["baseline_requests"] = baseline_requests;
    doc["duration_seconds"] = duration_seconds;
    doc["executions_per_second"] = executions_per_second;
    doc["new_fingerprints"] = new_fingerprints;
    doc["pool_initial"] = pool_initial;
    doc["pool_final"] = pool_final;
    doc["promotions"] = promotions;
    doc["logins"] = logins;
    doc["responses_ok"] = responses_ok;
    doc["responses_unauthorized"] = responses_unauthorized;
    doc["auth_success_rate"] = auth_success_rate;
    doc["executions_at_all_findings"] = executions_at_all_findings;
    doc["warnings"] = warnings;
    doc["findings"] = json::array();
    for (const auto& f : findings) {
        doc["findings"].push_back({{"kind", httpfuzz::to_string(f.kind)},
                                   {"template_id", f.template_id},
                                   {"marker", f.marker},
                                   {"route", f.route},
                                   {"evidence", f.evidence},
                                   {"execution_index", f.execution_index},
                                   {"timestamp", f.timestamp},
                                   {"occurrences", f.occurrences}});
    }
    doc["templates"] = json::array();
    for (const auto& row : per_template) {
        doc["templates"].push_back({{"id", row.id},
                                    {"origin", row.origin},
                                    {"alpha", row.alpha},
                                    {"beta", row.beta},
                                    {"invocations", row.invocations},
                                    {"v", row.v}});
    }
    return doc.dump(2);
}

void CampaignReport::save(const std::filesystem::path& file) const {
    std::ofstream f(file, std::ios::binary);
    f << to_json() << "\n";
}

std::string CampaignReport::summary() const {
    std::ostringstream os;
    os << "executions: " << executions << " (" << executions_per_second << "/s over "
       << duration_seconds << " s)\n";
    os << "pool: " << pool_initial << " -> " << pool_final << " templates (" << promotions
       << " promoted)\n";
    os << "new fingerprints: " << new_fingerprints << "\n";
    os << "findings: " << findings.size() << "\n";
    for (const auto& f : findings)
        os << "  [" << httpfuzz::to_string(f.kind) << "] " << f.route << " template "
           << f.template_id << " x" << f.occurrences << " (" << f.evidence << ")\n";
    return os.str();
}

namespace {

// Fallback payloads when no dictionary file is configured.
MutationDictionary builtin_dictionary() {
    MutationDictionary d;
    d.command_injection = {";echo {MARKER};", "`echo {MARKER}`", "|echo {MARKER}|",
                           "$(echo {MARKER})"};
    d.buffer_overflow = {std::string(128, 'A'), std::string(512, 'A'), std::string(2048, 'A')};
    d.integer_overflow = {"2147483648", "-2147483649", "18446744073709551616"};
    d.path_traversal = {"../../../../etc/passwd", "..%2f..%2f..%2fetc%2fpasswd"};
    d.special_characters = {"%00", "%0d%0a", "<>'\"&", "{{}}"};
    return d;
}

template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    void push(T item) {
        std::unique_lock lk(mutex_);
        not_full_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lk(mutex_);
        not_empty_.wait(lk, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lk(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::size_t capacity_;
    std::mutex mutex_;
    std::condition_variable not_full_, not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

struct Job {
    std::size_t index = 0;
    std::string bytes;
};

struct JobResult {
    std::size_t index = 0;
    ExchangeResult result;
};

/// Fixed pool of request executors fed through bounded queues.
class ExecutorPool {
public:
    ExecutorPool(const TcpTransport& transport, int executors, int capacity)
        : transport_(transport),
          jobs_(static_cast<std::size_t>(std::max(1, capacity))),
          results_(static_cast<std::size_t>(std::max(1, capacity))) {
        for (int i = 0; i < std::max(1, executors); ++i)
            workers_.emplace_back([this] { run(); });
    }

    ~ExecutorPool() {
        jobs_.close();
        results_.close();
        for (auto& w : workers_) w.join();
    }

    /// Executes a batch and returns results ordered by job index.
    std::vector<ExchangeResult> execute(std::vector<Job> batch) {
        std::vector<ExchangeResult> out(batch.size());
        std::size_t submitted = 0, collected = 0;
        while (collected < out.size()) {
            // submit in chunks no larger than the queue capacity to avoid
            // wedging the single submitter thread
            while (submitted < batch.size() && submitted - collected < workers_.size() + 8) {
                jobs_.push(std::move(batch[submitted]));
                ++submitted;
            }
            auto r = results_.pop();
            if (!r) break;
            out[r->index] = std::move(r->result);
            ++collected;
        }
        return out;
    }

private:
    void run() {
        while (auto job = jobs_.pop())
            results_.push({job->index, transport_.roundtrip(job->bytes)});
    }

    const TcpTransport& transport_;
    BoundedQueue<Job> jobs_;
    BoundedQueue<JobResult> results_;
    std::vector<std::thread> workers_;
};

}  // namespace

CampaignReport run_campaign(const CampaignConfig& cfg) {
    CampaignReport report;
    if (cfg.budget_seconds <= 0 && cfg.budget_executions <= 0) return report;

    auto t_start = std::chrono::steady_clock::now();
    auto deadline = t_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                  std::chrono::duration<double>(
                                      cfg.budget_seconds > 0 ? cfg.budget_seconds : 1e9));

    TcpTransport transport(cfg.host, cfg.port, cfg.transport_timeout_ms);
    if (!transport.reachable())
        throw TargetUnreachable(cfg.host + ":" + std::to_string(cfg.port) + " is not reachable");

    std::unique_ptr<LlmProvider> provider;
    std::unique_ptr<PromptLibrary> prompts;
    if (!cfg.prompts_dir.empty()) prompts = std::make_unique<PromptLibrary>(cfg.prompts_dir);
    if (prompts) {
        if (!cfg.mock_fixtures_dir.empty())
            provider = std::make_unique<MockProvider>(cfg.mock_fixtures_dir);
        else if (!cfg.provider_url.empty())
            provider = std::make_unique<RemoteProvider>(RemoteProvider::Options{cfg.provider_url});
    }
    PipelineAnnotator annotator(provider.get(), prompts.get());
    RuleBasedAnnotator rule_annotator;

    MutationDictionary dict = cfg.dictionary_file.empty()
                                  ? builtin_dictionary()
                                  : MutationDictionary::load(cfg.dictionary_file);

    TemplatePool pool;
    if (!cfg.seeds_dir.empty() && std::filesystem::is_directory(cfg.seeds_dir)) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(cfg.seeds_dir))
            if (e.path().extension() == ".http") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            try {
                auto req = RawHttpRequest::parse(slurp(file), ParseMode::Lenient);
                SeedTemplate tpl;
                tpl.annotated = annotator.annotate(req);
                tpl.origin = TemplateOrigin::Captured;
                pool.add_template(std::move(tpl));
            } catch (const std::exception& e) {
                report.warnings.push_back("seed " + file.filename().string() + ": " + e.what());
            }
        }
    }

    if (cfg.enrichment && !cfg.routes_dir.empty() && provider && prompts) {
        try {
            IngestResult ingest = ingest_static_analysis(cfg.routes_dir);
            for (const auto& w : ingest.warnings) report.warnings.push_back("routes: " + w);
            for (const auto& entry : ingest.entries) {
                auto ids = pool.ids_for_path(entry.url);
                std::optional<RawHttpRequest> reference;
                TemplateOrigin origin = TemplateOrigin::LlmGeneratedType1;
                if (!ids.empty()) {
                    reference = pool.get(ids.front()).annotated.source;
                    origin = TemplateOrigin::LlmGeneratedType0;
                }
                try {
                    std::vector<RawHttpRequest> packets;
                    try {
                        packets = generate_packets(entry, reference, *provider, *prompts);
                    } catch (const ProviderFailure&) {
                        if (!reference) throw;
                        packets = generate_packets(entry, std::nullopt, *provider, *prompts);
                        origin = TemplateOrigin::LlmGeneratedType1;
                    }
                    for (const auto& pkt : packets) {
                        try {
                            SeedTemplate tpl;
                            tpl.annotated = annotator.annotate(pkt);
                            tpl.origin = origin;
                            pool.add_template(std::move(tpl));
                        } catch (const DuplicateTemplate&) {
                        }
                    }
                } catch (const std::exception& e) {
                    report.warnings.push_back("packet generation " + entry.url + ": " + e.what());
                }
                try {
                    field_enrich(entry, entry.url, pool, *provider, *prompts);
                } catch (const std::exception& e) {
                    report.warnings.push_back("enrichment " + entry.url + ": " + e.what());
                }
            }
        } catch (const UnreadableDirectory& e) {
            report.warnings.push_back(std::string("routes dir: ") + e.what());
        }
    }
    report.pool_initial = static_cast<long>(pool.size());

    SessionManager session;
    if (cfg.auth) {
        session = SessionManager(*cfg.auth, &transport);
        session.login();
    }

    std::optional<FeedbackLog> feedback;
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        std::filesystem::create_directories(cfg.output_dir / "findings");
        feedback.emplace(cfg.output_dir / "feedback.jsonl");
    }

    // route -> status of the first un-mutated response
    std::map<std::string, int> baselines;
    auto ensure_baseline = [&](const SeedTemplate& tpl) {
        std::string route = tpl.annotated.source.path();
        if (baselines.count(route)) return;
        ExchangeResult r = transport.roundtrip(session.apply(tpl.annotated.source.serialize()));
        ++report.baseline_requests;
        if (r.ok()) {
            baselines[route] = r.response->status;
            pool.note_fingerprint(route, fingerprint_response(*r.response, cfg.scrub).key());
        }
    };

    ExecutorPool executors(transport, cfg.executors, cfg.queue_capacity);
    Scheduler scheduler(cfg.scheduler);
    std::mt19937_64 rng(cfg.rng_seed);

    std::set<std::pair<std::string, std::string>> distinct_findings;  // (kind, route)
    std::map<std::pair<std::string, std::string>, std::size_t> finding_index;
    long next_marker = 1;
    bool stop = false;

    struct Pending {
        std::string id;
        std::string route;
        Mutant mutant;
    };

    while (!stop) {
        if (cfg.budget_executions > 0 && report.executions >= cfg.budget_executions) break;
        if (std::chrono::steady_clock::now() >= deadline) break;
        if (cfg.rate_limit_rps > 0 && report.executions > 0) {
            auto pace_target = t_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                           std::chrono::duration<double>(
                                               static_cast<double>(report.executions) / cfg.rate_limit_rps));
            std::this_thread::sleep_until(std::min(pace_target, deadline));
        }
        session.tick();

        auto rows = snapshot_stats(pool);
        if (rows.empty()) break;
        auto ids = scheduler.round(rows, rng);

        std::vector<Pending> batch;
        std::vector<Job> jobs;
        for (const auto& id : ids) {
            if (cfg.budget_executions > 0 &&
                report.executions + static_cast<long>(batch.size()) >= cfg.budget_executions)
                break;
            const SeedTemplate& tpl = pool.get(id);
            ensure_baseline(tpl);
            Mutant m = mutate(tpl, rng(), dict, "T" + std::to_string(next_marker++));
            Pending p{id, tpl.annotated.source.path(), std::move(m)};
            jobs.push_back({batch.size(), session.apply(p.mutant.request.serialize())});
            batch.push_back(std::move(p));
        }
        if (batch.empty()) break;

        std::vector<ExchangeResult> results = executors.execute(std::move(jobs));

        bool saw_unauthorized = false;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Pending& p = batch[i];
            const ExchangeResult& r = results[i];
            ++report.executions;
            bool reward = false;
            bool new_fp = false;
            if (r.ok()) {
                ++report.responses_ok;
                if (r.response->status == 401 || r.response->status == 403) {
                    ++report.responses_unauthorized;
                    saw_unauthorized = true;
                }
                std::string key = fingerprint_response(*r.response, cfg.scrub).key();
                if (pool.note_fingerprint(p.route, key)) {
                    reward = true;
                    new_fp = true;
                    ++report.new_fingerprints;
                }
            }

            std::optional<int> baseline;
            if (auto it = baselines.find(p.route); it != baselines.end()) baseline = it->second;
            if (auto finding = detect_anomalies(p.mutant, r, baseline)) {
                finding->execution_index = report.executions;
                auto key = std::make_pair(httpfuzz::to_string(finding->kind), finding->route);
                // repeats of a known anomaly are not new behavior, no reward
                if (distinct_findings.insert(key).second) reward = true;
                auto it = finding_index.find(key);
                if (it == finding_index.end()) {
                    finding_index[key] = report.findings.size();
                    if (!cfg.output_dir.empty()) {
                        std::ofstream out(cfg.output_dir / "findings" /
                                              ("finding_" + std::to_string(report.findings.size()) +
                                               "_" + key.first + ".http"),
                                          std::ios::binary);
                        out << finding->request_bytes;
                    }
                    report.findings.push_back(std::move(*finding));
                } else {
                    ++report.findings[it->second].occurrences;
                }
            }

            pool.record_feedback(p.id, reward);
            if (feedback) feedback->append(p.id, reward);

            if (new_fp && r.ok() && r.response->status < 500 &&
                report.promotions < cfg.max_promotions) {
                try {
                    SeedTemplate promoted;
                    promoted.annotated = rule_annotator.annotate(p.mutant.request);
                    promoted.origin = TemplateOrigin::MutationPromoted;
                    const SeedTemplate& parent = pool.get(p.id);
                    for (const auto& f : promoted.annotated.fields) {
                        auto sp = parent.mutation_space.find(f.name);
                        if (sp != parent.mutation_space.end())
                            promoted.mutation_space[f.name] = sp->second;
                    }
                    pool.add_template(std::move(promoted));
                    ++report.promotions;
                } catch (const std::exception&) {
                    // unannotatable or duplicate mutants are simply not promoted
                }
            }

            if (cfg.stop_after_findings > 0 &&
                static_cast<long>(distinct_findings.size()) >= cfg.stop_after_findings) {
                report.executions_at_all_findings = report.executions;
                stop = true;
                break;
            }
        }
        if (saw_unauthorized) session.invalidate();
    }

    auto t_end = std::chrono::steady_clock::now();
    report.duration_seconds = std::chrono::duration<double>(t_end - t_start).count();
    report.executions_per_second =
        report.duration_seconds > 0 ? report.executions / report.duration_seconds : 0.0;
    report.pool_final = static_cast<long>(pool.size());
    report.logins = session.logins();
    report.auth_success_rate =
        report.responses_ok > 0
            ? 1.0 - static_cast<double>(report.responses_unauthorized) / report.responses_ok
            : 1.0;
    for (const auto& tpl : pool.templates())
        report.per_template.push_back({tpl.id, httpfuzz::to_string(tpl.origin), tpl.alpha, tpl.beta,
                                       tpl.invocation_count, tpl.mutation_space_size()});

    if (!cfg.output_dir.empty()) {
        report.save(cfg.output_dir / "report.json");
        pool.save(cfg.output_dir / "pool.jsonl");
    }
    return report;
}

}  // namespace httpfuzz
