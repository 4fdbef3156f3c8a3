#include "httpfuzz/fingerprint.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

#include "httpfuzz/codec.hpp"

namespace httpfuzz {

std::string scrub_body(std::string body, const ScrubConfig& scrub) {
    for (const auto& pattern : scrub.patterns) {
        std::regex re(pattern);
        body = std::regex_replace(body, re, "");
    }
    return body;
}

std::string ResponseFingerprint::key() const {
    std::ostringstream os;
    os << status << ':' << body_hash << ':' << length_bucket << ':' << header_shape;
    return os.str();
}

ResponseFingerprint fingerprint_response(const HttpResponse& resp, const ScrubConfig& scrub) {
    ResponseFingerprint fp;
    fp.status = resp.status;

    std::string body = scrub_body(resp.body, scrub);
    fp.body_hash = fnv1a64(body);
    fp.length_bucket = static_cast<int>(std::floor(std::log2(static_cast<double>(body.size()) + 1.0)));

    std::vector<std::string> names;
    names.reserve(resp.headers.size());
    for (const auto& h : resp.headers) {
        std::string n = h.name;
        std::transform(n.begin(), n.end(), n.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        names.push_back(std::move(n));
    }
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    std::string joined;
    for (const auto& n : names) {
        joined += n;
        joined += '\n';
    }
    fp.header_shape = fnv1a64(joined);
    return fp;
}

}  // namespace httpfuzz
