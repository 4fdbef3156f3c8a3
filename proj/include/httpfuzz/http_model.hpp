#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace httpfuzz {

class MalformedRequest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ParamKind { Path, QueryString, Body, Header, Cookie };

enum class SubFormat { KeyValue, Json, Xml, FormData, MultipartFormData, Raw, Custom };

/// Location of a parameter inside a request, restricted to the
/// kind/sub-format pairs that actually occur in HTTP traffic.
struct ParamLocation {
    ParamKind kind = ParamKind::Body;
    SubFormat format = SubFormat::KeyValue;

    bool operator==(const ParamLocation&) const = default;
};

bool valid_location(ParamLocation loc);
std::string to_string(ParamLocation loc);
ParamLocation param_location_from_string(std::string_view s);

std::string to_string(ParamKind k);
std::string to_string(SubFormat f);

struct HeaderField {
    std::string name;
    std::string value;
};

enum class ParseMode { Strict, Lenient };

/// Byte spans of the mutable regions inside the original request bytes.
/// Only meaningful for pristine parse output; a rendered request must be
/// re-parsed to obtain fresh spans.
struct SourceSpans {
    std::size_t path_off = 0, path_len = 0;
    std::size_t query_off = 0, query_len = 0;         // query without '?'
    std::vector<std::pair<std::size_t, std::size_t>> header_values;  // aligned with headers()
    std::size_t body_off = 0;                          // offset of body bytes
};

/// One HTTP/1.1 request, parsed losslessly. Unmodified requests serialize
/// back to their exact source bytes; edits re-render with the original
/// header order and a recomputed Content-Length.
class RawHttpRequest {
public:
    RawHttpRequest() = default;  // empty placeholder; fill via parse()

    static RawHttpRequest parse(std::string_view bytes, ParseMode mode = ParseMode::Strict);

    const std::string& method() const { return method_; }
    const std::string& path() const { return path_; }
    const std::string& query() const { return query_; }
    const std::string& version() const { return version_; }
    const std::vector<HeaderField>& headers() const { return headers_; }
    const std::string& body() const { return body_; }  // chunked transfer already decoded
    const std::string& original() const { return original_; }
    bool chunked() const { return chunked_; }
    bool modified() const { return modified_; }
    const SourceSpans& spans() const { return spans_; }

    /// Request target as it appears on the request line.
    std::string target() const;

    /// First header with the given name, case-insensitive.
    std::optional<std::string> header(std::string_view name) const;

    std::string serialize() const;

    RawHttpRequest with_body(std::string new_body) const;
    RawHttpRequest with_header(std::string_view name, std::string value) const;

    /// Re-render with CRLF endings and a correct Content-Length, then
    /// re-parse strictly. Used to normalize provider-generated packets.
    RawHttpRequest canonicalize() const;

    bool structurally_equal(const RawHttpRequest& other) const;

private:
    std::string render() const;

    std::string method_, path_, query_, version_;
    std::vector<HeaderField> headers_;
    std::string body_;
    std::string original_;
    bool chunked_ = false;
    bool modified_ = false;
    SourceSpans spans_;
};

/// Replace [offset, offset+length) with `replacement`.
struct SpanEdit {
    std::size_t offset = 0;
    std::size_t length = 0;
    std::string replacement;
};

/// Apply non-overlapping span edits to a byte string. Edits may be given in
/// any order; overlap throws.
std::string apply_span_edits(std::string_view original, std::vector<SpanEdit> edits);

/// Rewrite the Content-Length header value (if present) to match the actual
/// body byte count. Everything else is untouched.
std::string fix_content_length(std::string bytes);

}  // namespace httpfuzz
