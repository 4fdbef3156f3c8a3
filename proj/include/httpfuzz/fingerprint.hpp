#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "httpfuzz/transport.hpp"

namespace httpfuzz {

/// Regexes whose matches are blanked out of the body before hashing, so
/// volatile tokens (timestamps, ids) do not inflate the fingerprint count.
struct ScrubConfig {
    std::vector<std::string> patterns;
};

struct ResponseFingerprint {
    int status = 0;
    std::uint64_t body_hash = 0;
    int length_bucket = 0;       // floor(log2(body_size + 1))
    std::uint64_t header_shape = 0;  // hash of the sorted header-name set

    std::string key() const;

    bool operator==(const ResponseFingerprint&) const = default;
};

std::string scrub_body(std::string body, const ScrubConfig& scrub);

ResponseFingerprint fingerprint_response(const HttpResponse& resp, const ScrubConfig& scrub);

}  // namespace httpfuzz
