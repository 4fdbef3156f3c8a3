#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "httpfuzz/enrichment.hpp"

using namespace httpfuzz;

namespace {

const std::filesystem::path kRoutes = std::filesystem::path(FIXTURES_DIR) / "routes";

RouteCodeEntry entry_for(const std::string& url) {
    auto ingest = ingest_static_analysis(kRoutes);
    for (const auto& e : ingest.entries)
        if (e.url == url) return e;
    FAIL("route fixture missing: " << url);
    return {};
}

struct Mocked {
    MockProvider provider{std::filesystem::path(PROMPTS_DIR) / "fixtures"};
    PromptLibrary prompts{PROMPTS_DIR};
};

SeedTemplate seed_with_field(const std::string& url, const std::string& body) {
    std::string raw = "POST " + url + " HTTP/1.1\r\nHost: h\r\n"
                      "Content-Type: application/x-www-form-urlencoded\r\n"
                      "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
    SeedTemplate tpl;
    RuleBasedAnnotator rules;
    tpl.annotated = rules.annotate(RawHttpRequest::parse(raw));
    for (const auto& f : tpl.annotated.fields) tpl.mutation_space[f.name];
    return tpl;
}

}  // namespace

TEST_CASE("ingest reads route fixtures and reports skips") {
    auto result = ingest_static_analysis(kRoutes);
    REQUIRE(result.entries.size() == 2);
    CHECK(result.warnings.empty());
    auto wl = entry_for("/goform/fromSetWirelessRepeat");
    CHECK(wl.function_name == "fromSetWirelessRepeat");
    CHECK(wl.routing_mode == RoutingMode::TableBased);
    CHECK(wl.code.find("websGetVar") != std::string::npos);
    CHECK(entry_for("/goform/fromSetIpBind").routing_mode == RoutingMode::FileBased);

    CHECK_THROWS_AS(ingest_static_analysis("/nonexistent/routes"), UnreadableDirectory);

    auto dir = std::filesystem::temp_directory_path() / "httpfuzz_routes_bad";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "broken.json") << "{not json";
    std::ofstream(dir / "empty_url.json") << R"({"url":"","code":"int f();"})";
    auto bad = ingest_static_analysis(dir);
    CHECK(bad.entries.empty());
    CHECK(bad.warnings.size() == 2);
}

TEST_CASE("extract_potential_values returns the handler's comparison set") {
    Mocked m;
    auto pv = extract_potential_values(entry_for("/goform/fromSetWirelessRepeat"), m.provider,
                                       m.prompts);
    REQUIRE(pv.values.count("wl_mode") == 1);
    CHECK(pv.values.at("wl_mode") == std::vector<std::string>{"ap", "apclient", "wips"});
    CHECK(pv.format_specs.empty());
}

TEST_CASE("extract_potential_values surfaces scanf format constraints") {
    Mocked m;
    auto pv = extract_potential_values(entry_for("/goform/fromSetIpBind"), m.provider, m.prompts);
    CHECK(pv.values.empty());
    REQUIRE(pv.format_specs.count("bind_list") == 1);
    CHECK(pv.format_specs.at("bind_list") == "%d:%d:%s");
}

TEST_CASE("non-JSON provider output is rejected, not repaired") {
    auto dir = std::filesystem::temp_directory_path() / "httpfuzz_enrich_bad";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "bad.json")
        << R"([{"kind":"field_value_extract","payload":"int f();","answer":"not json at all"}])";
    MockProvider provider(dir);
    PromptLibrary prompts{PROMPTS_DIR};
    RouteCodeEntry e{"/x", "f", "int f();", RoutingMode::TableBased};
    CHECK_THROWS_AS(extract_potential_values(e, provider, prompts), MalformedProviderOutput);
}

TEST_CASE("instantiate_format fills conversion specs with minimal values") {
    CHECK(instantiate_format("%d:%d:%s") == "1:1:a");
    CHECK(instantiate_format("%u-%i") == "1-1");
    CHECK(instantiate_format("plain") == "plain");
    CHECK(instantiate_format("%x") == "%x");  // unknown specs pass through
    CHECK(instantiate_format("") == "");
}

TEST_CASE("generate_packets splits on the delimiter and drops bad chunks") {
    Mocked m;
    auto packets = generate_packets(entry_for("/goform/fromSetWirelessRepeat"), std::nullopt,
                                    m.provider, m.prompts);
    REQUIRE(packets.size() == 1);
    CHECK(packets[0].path() == "/goform/fromSetWirelessRepeat");
    CHECK(packets[0].body() == "wl_mode=ap");
}

TEST_CASE("generate_packets drops hallucinated chunks and keeps parseable ones") {
    auto dir = std::filesystem::temp_directory_path() / "httpfuzz_enrich_chunks";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "mix.json")
        << R"([{"kind":"packet_from_code","payload":"int g();",)"
        << R"("answer":"sorry, here is the packet\r\n-+-+-+-+\r\nGET /ok?a=1 HTTP/1.1\r\nHost: h\r\n\r\n"},)"
        << R"({"kind":"packet_from_code","payload":"int h();","answer":"no packet here"}])";
    MockProvider provider(dir);
    PromptLibrary prompts{PROMPTS_DIR};

    RouteCodeEntry mixed{"/ok", "g", "int g();", RoutingMode::TableBased};
    auto packets = generate_packets(mixed, std::nullopt, provider, prompts);
    REQUIRE(packets.size() == 1);
    CHECK(packets[0].path() == "/ok");

    RouteCodeEntry hopeless{"/no", "h", "int h();", RoutingMode::TableBased};
    CHECK_THROWS_AS(generate_packets(hopeless, std::nullopt, provider, prompts),
                    AllOutputsInvalid);
}

TEST_CASE("field_enrich adds exactly the handler's candidate values") {
    Mocked m;
    TemplatePool pool;
    auto id = pool.add_template(seed_with_field("/goform/fromSetWirelessRepeat", "wl_mode=auto"));

    auto outcome = field_enrich(entry_for("/goform/fromSetWirelessRepeat"),
                                "/goform/fromSetWirelessRepeat", pool, m.provider, m.prompts);
    CHECK(outcome.enriched_ids == std::vector<std::string>{id});
    CHECK(outcome.unmatched_keys.empty());
    CHECK(pool.get(id).mutation_space.at("wl_mode") ==
          std::vector<std::string>{"ap", "apclient", "wips"});

    // idempotent: a second pass adds nothing
    field_enrich(entry_for("/goform/fromSetWirelessRepeat"), "/goform/fromSetWirelessRepeat",
                 pool, m.provider, m.prompts);
    CHECK(pool.get(id).mutation_space.at("wl_mode").size() == 3);
}

TEST_CASE("field_enrich instantiates format specs as seed values") {
    Mocked m;
    TemplatePool pool;
    auto id = pool.add_template(seed_with_field("/goform/fromSetIpBind", "bind_list=0:0:none"));
    auto outcome = field_enrich(entry_for("/goform/fromSetIpBind"), "/goform/fromSetIpBind", pool,
                                m.provider, m.prompts);
    CHECK(outcome.enriched_ids == std::vector<std::string>{id});
    CHECK(pool.get(id).mutation_space.at("bind_list") == std::vector<std::string>{"1:1:a"});
}

TEST_CASE("field_enrich reports keys with no matching template") {
    Mocked m;
    TemplatePool pool;  // empty: nothing registered for the url
    auto outcome = field_enrich(entry_for("/goform/fromSetWirelessRepeat"),
                                "/goform/fromSetWirelessRepeat", pool, m.provider, m.prompts);
    CHECK(outcome.enriched_ids.empty());
    CHECK(outcome.unmatched_keys == std::vector<std::string>{"wl_mode"});

    // template exists for the route but lacks the field
    auto id = pool.add_template(seed_with_field("/goform/fromSetWirelessRepeat", "other=1"));
    auto outcome2 = field_enrich(entry_for("/goform/fromSetWirelessRepeat"),
                                 "/goform/fromSetWirelessRepeat", pool, m.provider, m.prompts);
    CHECK(outcome2.enriched_ids.empty());
    CHECK(outcome2.unmatched_keys == std::vector<std::string>{"wl_mode"});
    CHECK(pool.get(id).mutation_space.count("wl_mode") == 0);
}
