#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "httpfuzz/codec.hpp"
#include "httpfuzz/mutation.hpp"

using namespace httpfuzz;

namespace {

const std::set<std::string> kBoundary = {"0",          "-1",          "2147483647",
                                         "4294967295", "-2147483648", "99999999999999999999"};

SeedTemplate make_template(const std::string& raw) {
    auto req = RawHttpRequest::parse(raw, ParseMode::Lenient);
    RuleBasedAnnotator rules;
    SeedTemplate tpl;
    tpl.id = "t0";
    tpl.annotated = rules.annotate(req);
    return tpl;
}

MutationDictionary dict() { return MutationDictionary::load(DICTIONARY_FILE); }

}  // namespace

TEST_CASE("dictionary loads all sections with decoded escapes") {
    auto d = dict();
    CHECK(!d.command_injection.empty());
    CHECK(!d.buffer_overflow.empty());
    CHECK(!d.integer_overflow.empty());
    CHECK(!d.path_traversal.empty());
    CHECK(!d.special_characters.empty());
    for (const auto& p : d.command_injection)
        CHECK(p.find("{MARKER}") != std::string::npos);
    // {REPEAT:A:64} style payloads expand to the full run
    bool has_long_run = false;
    for (const auto& p : d.buffer_overflow)
        if (p.size() >= 64 && p == std::string(p.size(), p[0])) has_long_run = true;
    CHECK(has_long_run);
}

TEST_CASE("dictionary rejects command payloads without the marker slot") {
    auto f = std::filesystem::temp_directory_path() / "httpfuzz_bad.dict";
    std::ofstream(f) << "[command_injection]\n;reboot;\n";
    CHECK_THROWS_AS(MutationDictionary::load(f), std::runtime_error);
}

TEST_CASE("boundary operator emits boundary integers only") {
    auto d = dict();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i)
        CHECK(kBoundary.count(apply_operator("7", ValueType::Int, MutationOperator::Boundary, {},
                                             d, "M", rng)) == 1);
    CHECK_THROWS_AS(
        apply_operator("x", ValueType::Str, MutationOperator::Boundary, {}, d, "M", rng),
        IncompatibleOperator);
}

TEST_CASE("context pick draws from the mutation space") {
    auto d = dict();
    std::mt19937_64 rng(2);
    std::vector<std::string> space = {"alpha", "beta", "gamma"};
    std::set<std::string> seen;
    for (int i = 0; i < 100; ++i)
        seen.insert(apply_operator("x", ValueType::Str, MutationOperator::ContextPick, space, d,
                                   "M", rng));
    CHECK(seen == std::set<std::string>{"alpha", "beta", "gamma"});
    CHECK_THROWS_AS(
        apply_operator("x", ValueType::Str, MutationOperator::ContextPick, {}, d, "M", rng),
        IncompatibleOperator);
}

TEST_CASE("dictionary inject appends and substitutes the campaign marker") {
    auto d = dict();
    d.buffer_overflow.clear();
    d.integer_overflow.clear();
    d.path_traversal.clear();
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        std::string out = apply_operator("base", ValueType::Str,
                                         MutationOperator::DictionaryInject, {}, d, "MK77", rng);
        CHECK(out.rfind("base", 0) == 0);
        CHECK(out.find("MK77") != std::string::npos);
        CHECK(out.find("{MARKER}") == std::string::npos);
    }
}

TEST_CASE("special chars inserts a sequence without dropping the value") {
    auto d = dict();
    std::mt19937_64 rng(4);
    bool grew = false;
    for (int i = 0; i < 50; ++i) {
        std::string out = apply_operator("abc", ValueType::Str, MutationOperator::SpecialChars,
                                         {}, d, "M", rng);
        if (out.size() > 3) grew = true;
    }
    CHECK(grew);
}

TEST_CASE("havoc explores both shorter and longer outputs") {
    auto d = dict();
    std::mt19937_64 rng(5);
    bool shorter = false, longer = false;
    for (int i = 0; i < 1000; ++i) {
        std::string out =
            apply_operator("12345678", ValueType::Str, MutationOperator::Havoc, {}, d, "M", rng);
        if (out.size() < 8) shorter = true;
        if (out.size() > 8) longer = true;
    }
    CHECK(shorter);
    CHECK(longer);
}

TEST_CASE("operator schedule weights context picks higher") {
    auto tpl = make_template("GET /s?k=val HTTP/1.1\r\nHost: h\r\n\r\n");
    REQUIRE(tpl.annotated.fields.size() == 1);
    const auto& field = tpl.annotated.fields[0];

    auto without = schedule_operators(tpl, field);
    CHECK(without.count(MutationOperator::ContextPick) == 0);

    tpl.mutation_space["k"] = {"a", "b"};
    auto with = schedule_operators(tpl, field);
    REQUIRE(with.count(MutationOperator::ContextPick) == 1);
    double total = 0.0;
    for (const auto& [op, w] : with) {
        total += w;
        if (op != MutationOperator::ContextPick)
            CHECK(with.at(MutationOperator::ContextPick) == doctest::Approx(3.0 * w));
    }
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("mutate is deterministic in the seed") {
    auto tpl = make_template("POST /p HTTP/1.1\r\nHost: h\r\nContent-Length: 11\r\n\r\na=1&b=2&c=3");
    tpl.mutation_space["a"] = {"x1", "x2"};
    auto d = dict();
    auto m1 = mutate(tpl, 42, d, "MK");
    auto m2 = mutate(tpl, 42, d, "MK");
    CHECK(m1.request.serialize() == m2.request.serialize());
    REQUIRE(m1.plan.edits.size() == m2.plan.edits.size());
    for (std::size_t i = 0; i < m1.plan.edits.size(); ++i) {
        CHECK(m1.plan.edits[i].field == m2.plan.edits[i].field);
        CHECK(m1.plan.edits[i].op == m2.plan.edits[i].op);
        CHECK(m1.plan.edits[i].payload == m2.plan.edits[i].payload);
    }
    bool any_differs = false;
    for (std::uint64_t s = 100; s < 110; ++s)
        if (mutate(tpl, s, d, "MK").request.serialize() != m1.request.serialize())
            any_differs = true;
    CHECK(any_differs);
}

TEST_CASE("mutants keep framing valid in every region") {
    auto d = dict();
    std::vector<std::string> raws = {
        "GET /api/device/42/status?verbose=1&name=bob HTTP/1.1\r\nHost: h\r\n"
        "Cookie: sid=abc9\r\nX-Trace: t123\r\n\r\n",
        "POST /form HTTP/1.1\r\nHost: h\r\nContent-Type: application/x-www-form-urlencoded\r\n"
        "Content-Length: 11\r\n\r\na=1&b=2&c=3",
    };
    for (const auto& raw : raws) {
        auto tpl = make_template(raw);
        for (std::uint64_t s = 0; s < 200; ++s) {
            auto m = mutate(tpl, s, d, "MK");
            std::string bytes = m.request.serialize();
            CAPTURE(s);
            auto reparsed = RawHttpRequest::parse(bytes, ParseMode::Strict);
            CHECK(reparsed.path().substr(0, 1) == "/");
            // header block stays single-line per header
            std::size_t body_off = reparsed.spans().body_off;
            for (std::size_t i = 0; i + 1 < body_off; ++i)
                if (bytes[i] == '\r') CHECK(bytes[i + 1] == '\n');
        }
    }
}

TEST_CASE("mutation count distribution favors single-field edits") {
    auto tpl = make_template("POST /p HTTP/1.1\r\nHost: h\r\nContent-Length: 15\r\n\r\na=1&b=2&c=3&d=4");
    auto d = dict();
    int singles = 0, total = 2000;
    for (int s = 0; s < total; ++s) {
        auto m = mutate(tpl, static_cast<std::uint64_t>(s), d, "MK");
        REQUIRE(m.plan.edits.size() >= 1);
        REQUIRE(m.plan.edits.size() <= 3);
        if (m.plan.edits.size() == 1) ++singles;
    }
    double frac = double(singles) / total;
    CHECK(frac == doctest::Approx(0.7).epsilon(0.08));
}

TEST_CASE("boundary value -1 is reachable through mutate") {
    auto tpl = make_template("GET /s?n=5 HTTP/1.1\r\nHost: h\r\n\r\n");
    auto d = dict();
    bool found = false;
    for (std::uint64_t s = 0; s < 500 && !found; ++s) {
        auto m = mutate(tpl, s, d, "MK");
        for (const auto& e : m.plan.edits)
            if (e.op == MutationOperator::Boundary && e.payload == "-1") found = true;
    }
    CHECK(found);
}

TEST_CASE("command payload mutants are flagged and carry the marker") {
    auto tpl = make_template("GET /s?cmd=ls HTTP/1.1\r\nHost: h\r\n\r\n");
    auto d = dict();
    bool saw_command = false;
    for (std::uint64_t s = 0; s < 400; ++s) {
        auto m = mutate(tpl, s, d, "MK9");
        if (m.plan.command_payload) {
            saw_command = true;
            CHECK(m.request.serialize().find("MK9") != std::string::npos);
        }
    }
    CHECK(saw_command);
}

TEST_CASE("encoded fields stay decodable after mutation") {
    auto tpl = make_template("GET /s?tok=YWxpY2U6cHc= HTTP/1.1\r\nHost: h\r\n\r\n");
    REQUIRE(tpl.annotated.fields.size() == 1);
    REQUIRE(tpl.annotated.fields[0].value_type == ValueType::Base64);
    auto d = dict();
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto m = mutate(tpl, s, d, "MK");
        auto req = RawHttpRequest::parse(m.request.serialize(), ParseMode::Lenient);
        std::string q = req.query();
        REQUIRE(q.rfind("tok=", 0) == 0);
        CHECK(base64_decode(q.substr(4)).has_value());
    }
}

TEST_CASE("templates without fields pass through unmodified") {
    auto tpl = make_template("GET /plain HTTP/1.1\r\nHost: h\r\n\r\n");
    REQUIRE(tpl.annotated.fields.empty());
    auto d = dict();
    auto m = mutate(tpl, 9, d, "MK");
    CHECK(m.request.serialize() == tpl.annotated.source.original());
    CHECK(m.plan.edits.empty());
}
