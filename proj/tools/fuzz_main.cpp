#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "httpfuzz/annotation.hpp"
#include "httpfuzz/campaign.hpp"
#include "httpfuzz/enrichment.hpp"

using namespace httpfuzz;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void split_target(const std::string& target, CampaignConfig& cfg) {
    auto colon = target.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--target must be host:port");
    cfg.host = target.substr(0, colon);
    cfg.port = std::stoi(target.substr(colon + 1));
}

std::unique_ptr<LlmProvider> make_provider(const std::string& provider,
                                           const std::string& mock_fixtures) {
    if (provider.empty()) return nullptr;
    if (provider == "mock") {
        if (mock_fixtures.empty())
            throw CLI::ValidationError("--provider mock needs --mock-fixtures DIR");
        return std::make_unique<MockProvider>(mock_fixtures);
    }
    return std::make_unique<RemoteProvider>(RemoteProvider::Options{provider});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"protocol-aware HTTP fuzzer"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a fuzzing campaign");
    std::string target, config_file, scheduler = "stsa", provider, budget;
    CampaignConfig cfg;
    std::string seeds, routes, dictionary, prompts_dir, mock_fixtures, output;
    std::vector<std::string> scrub;
    std::string auth_login, auth_check, auth_token_pattern, auth_cookie = "sid";
    int auth_interval = 30;
    run->add_option("--config", config_file, "key = value config file");
    run->add_option("--target", target, "host:port");
    run->add_option("--seeds", seeds, "directory of captured .http seeds");
    run->add_option("--routes", routes, "directory of static-analysis route JSON");
    run->add_option("--scheduler", scheduler)->check(CLI::IsMember({"stsa", "thompson", "roundrobin"}));
    run->add_option("--budget", budget, "time budget, e.g. 60s or 2m");
    run->add_option("--budget-executions", cfg.budget_executions);
    run->add_option("--provider", provider, "mock | remote base URL");
    run->add_option("--mock-fixtures", mock_fixtures);
    run->add_option("--prompts", prompts_dir);
    run->add_option("--dictionary", dictionary);
    run->add_option("--seed", cfg.rng_seed, "rng seed");
    run->add_option("--executors", cfg.executors);
    run->add_option("--queue-capacity", cfg.queue_capacity);
    run->add_option("--stop-after-findings", cfg.stop_after_findings);
    run->add_option("--rate-limit", cfg.rate_limit_rps, "max requests per second");
    run->add_option("--scrub", scrub, "regex scrubbed from bodies before fingerprinting");
    run->add_option("--output", output, "report/findings directory");
    run->add_option("--auth-login", auth_login, "raw login request file");
    run->add_option("--auth-check", auth_check, "raw session check request file");
    run->add_option("--auth-interval", auth_interval, "session check interval seconds");
    run->add_option("--auth-token-pattern", auth_token_pattern, "regex, group 1 = token");
    run->add_option("--auth-cookie", auth_cookie, "cookie carrying the session token");
    bool no_enrichment = false;
    run->add_flag("--no-enrichment", no_enrichment, "disable seed template enrichment");

    // annotate
    auto* annotate = app.add_subcommand("annotate", "annotate one raw request file");
    std::string annotate_file, a_prompts, a_mock;
    annotate->add_option("file", annotate_file)->required();
    annotate->add_option("--prompts", a_prompts);
    annotate->add_option("--mock-fixtures", a_mock);

    // enrich
    auto* enrich = app.add_subcommand("enrich", "enrich a saved template pool");
    std::string e_pool, e_routes, e_prompts, e_provider, e_mock;
    enrich->add_option("--pool", e_pool, "pool JSONL, updated in place")->required();
    enrich->add_option("--routes", e_routes)->required();
    enrich->add_option("--prompts", e_prompts)->required();
    enrich->add_option("--provider", e_provider, "mock | remote base URL")->required();
    enrich->add_option("--mock-fixtures", e_mock);

    // replay
    auto* replay = app.add_subcommand("replay", "send one persisted finding");
    std::string r_file, r_target;
    replay->add_option("file", r_file)->required();
    replay->add_option("--target", r_target, "host:port")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (!config_file.empty()) cfg = load_campaign_config(config_file);
            if (!target.empty()) split_target(target, cfg);
            if (!seeds.empty()) cfg.seeds_dir = seeds;
            if (!routes.empty()) cfg.routes_dir = routes;
            if (!dictionary.empty()) cfg.dictionary_file = dictionary;
            if (!prompts_dir.empty()) cfg.prompts_dir = prompts_dir;
            if (!output.empty()) cfg.output_dir = output;
            if (no_enrichment) cfg.enrichment = false;
            cfg.scheduler = scheduler_mode_from_string(scheduler);
            for (const auto& s : scrub) cfg.scrub.patterns.push_back(s);
            if (!budget.empty()) {
                double mult = 1.0;
                std::string num = budget;
                if (budget.back() == 's') num.pop_back();
                else if (budget.back() == 'm') { num.pop_back(); mult = 60.0; }
                cfg.budget_seconds = std::stod(num) * mult;
            }
            if (provider == "mock") cfg.mock_fixtures_dir = mock_fixtures;
            else if (!provider.empty()) cfg.provider_url = provider;
            if (!auth_login.empty()) {
                AuthConfig auth;
                auth.login_request_file = auth_login;
                auth.check_request_file = auth_check;
                auth.check_interval_seconds = auth_interval;
                auth.token_pattern = auth_token_pattern;
                auth.cookie_name = auth_cookie;
                cfg.auth = std::move(auth);
            }
            CampaignReport report = run_campaign(cfg);
            std::cout << report.summary();
            if (!cfg.output_dir.empty())
                std::cout << "report: " << (cfg.output_dir / "report.json").string() << "\n";
            return report.findings.empty() ? 0 : 2;
        }

        if (*annotate) {
            auto req = RawHttpRequest::parse(slurp(annotate_file), ParseMode::Lenient);
            std::unique_ptr<PromptLibrary> prompts;
            std::unique_ptr<LlmProvider> prov;
            if (!a_prompts.empty()) {
                prompts = std::make_unique<PromptLibrary>(a_prompts);
                prov = make_provider(a_mock.empty() ? "" : "mock", a_mock);
            }
            PipelineAnnotator annotator(prov.get(), prompts.get());
            AnnotatedRequest ann = annotator.annotate(req);
            std::cout << ann.annotated_bytes() << "\n---\n";
            for (const auto& f : ann.fields)
                std::cout << f.name << "\t" << to_string(f.location) << "\t"
                          << to_string(f.value_type) << "\t" << f.offset << "\t" << f.length
                          << "\t" << f.current_value << "\n";
            return 0;
        }

        if (*enrich) {
            TemplatePool pool = TemplatePool::load(e_pool);
            PromptLibrary prompts(e_prompts);
            auto prov = make_provider(e_provider, e_mock);
            IngestResult ingest = ingest_static_analysis(e_routes);
            for (const auto& w : ingest.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& entry : ingest.entries) {
                try {
                    EnrichOutcome out = field_enrich(entry, entry.url, pool, *prov, prompts);
                    std::cout << entry.url << ": enriched " << out.enriched_ids.size()
                              << " templates, " << out.unmatched_keys.size()
                              << " unmatched keys\n";
                } catch (const std::exception& e) {
                    std::cerr << entry.url << ": " << e.what() << "\n";
                }
            }
            pool.save(e_pool);
            return 0;
        }

        if (*replay) {
            CampaignConfig tcfg;
            split_target(r_target, tcfg);
            TcpTransport transport(tcfg.host, tcfg.port);
            ExchangeResult r = transport.roundtrip(slurp(r_file));
            if (r.ok()) {
                std::cout << "status " << r.response->status << "\n" << r.response->body;
                return 0;
            }
            std::cout << "transport error: " << to_string(*r.error) << "\n";
            return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
