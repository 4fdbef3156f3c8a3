#include <doctest.h>

#include <algorithm>

#include "httpfuzz/codec.hpp"
#include "httpfuzz/fingerprint.hpp"

using namespace httpfuzz;

namespace {

HttpResponse response(int status, std::string body,
                      std::vector<HeaderField> headers = {{"Content-Type", "text/html"},
                                                          {"Connection", "close"}}) {
    HttpResponse r;
    r.status = status;
    r.body = std::move(body);
    r.headers = std::move(headers);
    return r;
}

}  // namespace

TEST_CASE("scrub_body removes every pattern match") {
    ScrubConfig scrub;
    scrub.patterns = {"sid=[0-9a-f]+", "[0-9]{2}:[0-9]{2}:[0-9]{2}"};
    CHECK(scrub_body("sid=deadbeef ok 12:30:59", scrub) == " ok ");
    CHECK(scrub_body("nothing to do", scrub) == "nothing to do");
    CHECK(scrub_body("", scrub) == "");
}

TEST_CASE("fingerprints are deterministic") {
    ScrubConfig scrub;
    auto a = fingerprint_response(response(200, "hello world"), scrub);
    auto b = fingerprint_response(response(200, "hello world"), scrub);
    CHECK(a.status == 200);
    CHECK(a.body_hash == b.body_hash);
    CHECK(a.length_bucket == b.length_bucket);
    CHECK(a.header_shape == b.header_shape);
    CHECK(a.key() == b.key());
    CHECK(a.body_hash == fnv1a64("hello world"));
}

TEST_CASE("scrub-equivalent bodies collapse to one fingerprint") {
    ScrubConfig scrub;
    scrub.patterns = {"token=[A-Za-z0-9]+"};
    auto a = fingerprint_response(response(200, "welcome token=abc123 end"), scrub);
    auto b = fingerprint_response(response(200, "welcome token=zzz999 end"), scrub);
    CHECK(a.key() == b.key());
    // without scrubbing they differ
    ScrubConfig none;
    CHECK(fingerprint_response(response(200, "welcome token=abc123 end"), none).key() !=
          fingerprint_response(response(200, "welcome token=zzz999 end"), none).key());
}

TEST_CASE("status changes always change the fingerprint") {
    ScrubConfig scrub;
    auto ok = fingerprint_response(response(200, "same body"), scrub);
    auto err = fingerprint_response(response(500, "same body"), scrub);
    CHECK(ok.key() != err.key());
    CHECK(ok.body_hash == err.body_hash);
}

TEST_CASE("length buckets follow floor of log2(len + 1)") {
    ScrubConfig scrub;
    CHECK(fingerprint_response(response(200, ""), scrub).length_bucket == 0);
    CHECK(fingerprint_response(response(200, "x"), scrub).length_bucket == 1);
    CHECK(fingerprint_response(response(200, std::string(6, 'x')), scrub).length_bucket == 2);
    CHECK(fingerprint_response(response(200, std::string(7, 'x')), scrub).length_bucket == 3);
    CHECK(fingerprint_response(response(200, std::string(1000, 'x')), scrub).length_bucket == 9);
}

TEST_CASE("header shape ignores order, case and values") {
    ScrubConfig scrub;
    auto a = fingerprint_response(response(200, "b", {{"A", "1"}, {"B", "2"}}), scrub);
    auto b = fingerprint_response(response(200, "b", {{"b", "9"}, {"a", "8"}}), scrub);
    auto c = fingerprint_response(response(200, "b", {{"a", "1"}, {"c", "2"}}), scrub);
    CHECK(a.header_shape == b.header_shape);
    CHECK(a.header_shape != c.header_shape);
}

TEST_CASE("key encodes all four dimensions") {
    ScrubConfig scrub;
    auto fp = fingerprint_response(response(404, "not found"), scrub);
    std::string key = fp.key();
    CHECK(key.find("404") == 0);
    // bucket for len 9 is floor(log2(10)) = 3
    CHECK(fp.length_bucket == 3);
    CHECK(std::count(key.begin(), key.end(), ':') == 3);
}
