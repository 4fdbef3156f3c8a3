#include "httpfuzz/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "httpfuzz/codec.hpp"

namespace httpfuzz {

namespace {

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

// Headers whose values are protocol structure rather than parameters.
const std::set<std::string> kStructuralHeaders = {
    "host", "content-length", "content-type", "transfer-encoding", "connection",
    "accept", "accept-encoding", "accept-language", "accept-charset", "cache-control",
    "pragma", "upgrade", "origin", "referer", "user-agent", "keep-alive", "te",
    "trailer", "expect", "date", "content-disposition"};

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Collector that accumulates fields with absolute offsets into the request.
struct FieldSink {
    std::vector<FieldDescriptor> fields;

    void emit(std::string name, ParamLocation loc, std::string_view bytes, std::size_t off,
              std::size_t len, std::optional<ValueType> forced_type = std::nullopt) {
        if (len == 0) return;
        FieldDescriptor fd;
        fd.name = std::move(name);
        fd.location = loc;
        fd.offset = off;
        fd.length = len;
        fd.current_value.assign(bytes.substr(off, len));
        fd.value_type = forced_type ? *forced_type : classify_value(fd.current_value);
        fields.push_back(std::move(fd));
    }
};

// ---------------------------------------------------------------------------
// JSON scanning with byte-accurate spans. Scalars (strings, numbers,
// booleans) become fields; structural tokens are never marked.
// ---------------------------------------------------------------------------

class JsonScanner {
public:
    JsonScanner(std::string_view bytes, std::size_t off, std::size_t len, ParamKind kind,
                FieldSink& sink)
        : bytes_(bytes), pos_(off), end_(off + len), kind_(kind), sink_(sink) {}

    bool scan(const std::string& prefix) {
        skip_ws();
        bool ok = value(prefix);
        skip_ws();
        return ok && pos_ == end_;
    }

private:
    void skip_ws() {
        while (pos_ < end_ && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    }

    bool value(const std::string& name) {
        if (pos_ >= end_) return false;
        char c = bytes_[pos_];
        if (c == '{') return object(name);
        if (c == '[') return array(name);
        if (c == '"') {
            auto span = string_span();
            if (!span) return false;
            sink_.emit(name, {kind_, SubFormat::Json}, bytes_, span->first, span->second);
            return true;
        }
        if (c == 't' || c == 'f') return literal(name, c == 't' ? "true" : "false", true);
        if (c == 'n') return literal(name, "null", false);
        return number(name);
    }

    bool literal(const std::string& name, std::string_view word, bool annotate) {
        if (bytes_.substr(pos_, word.size()) != word) return false;
        if (annotate)
            sink_.emit(name, {kind_, SubFormat::Json}, bytes_, pos_, word.size(), ValueType::Str);
        pos_ += word.size();
        return true;
    }

    bool number(const std::string& name) {
        std::size_t start = pos_;
        if (pos_ < end_ && (bytes_[pos_] == '-' || bytes_[pos_] == '+')) ++pos_;
        while (pos_ < end_ && (std::isdigit(static_cast<unsigned char>(bytes_[pos_])) ||
                               bytes_[pos_] == '.' || bytes_[pos_] == 'e' || bytes_[pos_] == 'E' ||
                               bytes_[pos_] == '-' || bytes_[pos_] == '+'))
            ++pos_;
        if (pos_ == start) return false;
        sink_.emit(name, {kind_, SubFormat::Json}, bytes_, start, pos_ - start);
        return true;
    }

    // Returns the span of the string contents, quotes excluded.
    std::optional<std::pair<std::size_t, std::size_t>> string_span() {
        if (bytes_[pos_] != '"') return std::nullopt;
        std::size_t start = ++pos_;
        while (pos_ < end_ && bytes_[pos_] != '"') {
            if (bytes_[pos_] == '\\') ++pos_;
            ++pos_;
        }
        if (pos_ >= end_) return std::nullopt;
        std::size_t len = pos_ - start;
        ++pos_;  // closing quote
        return std::make_pair(start, len);
    }

    bool object(const std::string& prefix) {
        ++pos_;  // '{'
        skip_ws();
        if (pos_ < end_ && bytes_[pos_] == '}') {
            ++pos_;
            return true;
        }
        while (pos_ < end_) {
            skip_ws();
            auto key = string_span();
            if (!key) return false;
            std::string key_name(bytes_.substr(key->first, key->second));
            skip_ws();
            if (pos_ >= end_ || bytes_[pos_] != ':') return false;
            ++pos_;
            skip_ws();
            std::string child = prefix.empty() ? key_name : prefix + "." + key_name;
            if (!value(child)) return false;
            skip_ws();
            if (pos_ < end_ && bytes_[pos_] == ',') {
                ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= end_ || bytes_[pos_] != '}') return false;
        ++pos_;
        return true;
    }

    bool array(const std::string& prefix) {
        ++pos_;  // '['
        skip_ws();
        if (pos_ < end_ && bytes_[pos_] == ']') {
            ++pos_;
            return true;
        }
        int i = 0;
        while (pos_ < end_) {
            skip_ws();
            if (!value(prefix + "[" + std::to_string(i++) + "]")) return false;
            skip_ws();
            if (pos_ < end_ && bytes_[pos_] == ',') {
                ++pos_;
                continue;
            }
            break;
        }
        if (pos_ >= end_ || bytes_[pos_] != ']') return false;
        ++pos_;
        return true;
    }

    std::string_view bytes_;
    std::size_t pos_, end_;
    ParamKind kind_;
    FieldSink& sink_;
};

// ---------------------------------------------------------------------------
// XML scanning: text nodes and attribute values become fields; tags and
// attribute names stay untouched.
// ---------------------------------------------------------------------------

void scan_xml(std::string_view bytes, std::size_t off, std::size_t len, ParamKind kind,
              FieldSink& sink) {
    std::size_t pos = off, end = off + len;
    std::string current_tag;
    while (pos < end) {
        if (bytes[pos] == '<') {
            std::size_t close = bytes.find('>', pos);
            if (close == std::string_view::npos || close >= end) return;
            std::string_view tag = bytes.substr(pos + 1, close - pos - 1);
            if (!tag.empty() && tag.front() != '/' && tag.front() != '?' && tag.front() != '!') {
                std::size_t name_end = tag.find_first_of(" \t/");
                current_tag.assign(tag.substr(0, name_end));
                // Attributes: name="value"
                std::size_t apos = pos + 1;
                while (apos < close) {
                    std::size_t eq = bytes.find('=', apos);
                    if (eq == std::string_view::npos || eq >= close) break;
                    std::size_t q1 = eq + 1;
                    if (q1 >= close || (bytes[q1] != '"' && bytes[q1] != '\'')) {
                        apos = eq + 1;
                        continue;
                    }
                    char quote = bytes[q1];
                    std::size_t q2 = bytes.find(quote, q1 + 1);
                    if (q2 == std::string_view::npos || q2 > close) break;
                    std::size_t ns = eq;
                    while (ns > apos && !std::isspace(static_cast<unsigned char>(bytes[ns - 1]))) --ns;
                    sink.emit(std::string(bytes.substr(ns, eq - ns)), {kind, SubFormat::Xml},
                              bytes, q1 + 1, q2 - q1 - 1);
                    apos = q2 + 1;
                }
            }
            pos = close + 1;
        } else {
            std::size_t next = bytes.find('<', pos);
            if (next == std::string_view::npos || next > end) next = end;
            std::size_t s = pos, e = next;
            while (s < e && std::isspace(static_cast<unsigned char>(bytes[s]))) ++s;
            while (e > s && std::isspace(static_cast<unsigned char>(bytes[e - 1]))) --e;
            if (e > s)
                sink.emit(current_tag.empty() ? "xml_text" : current_tag, {kind, SubFormat::Xml},
                          bytes, s, e - s);
            pos = next;
        }
    }
}

// A leaf value the standard rules cannot decompose further: colon/pipe joined
// atoms, or a word-number pair joined by a dash.
bool is_composite_custom(std::string_view v) {
    static const std::regex sep(R"(^[A-Za-z0-9_.]+([:|][A-Za-z0-9_.:|\-]+)+$)");
    static const std::regex dash(R"(^[A-Za-z]+-[0-9]+$)");
    std::string s(v);
    return std::regex_match(s, sep) || std::regex_match(s, dash);
}

void scan_value(const std::string& key, std::string_view bytes, std::size_t off, std::size_t len,
                ParamKind kind, SubFormat plain_format, FieldSink& sink) {
    std::string_view v = bytes.substr(off, len);
    if (!v.empty() && (v.front() == '{' || v.front() == '[')) {
        FieldSink trial;
        JsonScanner js(bytes, off, len, kind, trial);
        if (js.scan(key)) {
            for (auto& f : trial.fields) sink.fields.push_back(std::move(f));
            return;
        }
    }
    if (!v.empty() && v.front() == '<') {
        FieldSink trial;
        scan_xml(bytes, off, len, kind, trial);
        if (!trial.fields.empty()) {
            for (auto& f : trial.fields) sink.fields.push_back(std::move(f));
            return;
        }
    }
    sink.emit(key, {kind, plain_format}, bytes, off, len);
}

void scan_pairs(std::string_view bytes, std::size_t off, std::size_t len, char sep, ParamKind kind,
                SubFormat plain_format, FieldSink& sink) {
    std::size_t pos = off, end = off + len;
    while (pos < end) {
        std::size_t amp = bytes.find(sep, pos);
        if (amp == std::string_view::npos || amp > end) amp = end;
        std::string_view pair = bytes.substr(pos, amp - pos);
        std::size_t skip = 0;
        while (skip < pair.size() && pair[skip] == ' ') ++skip;
        pair.remove_prefix(skip);
        std::size_t eq = pair.find('=');
        if (eq != std::string_view::npos && eq > 0) {
            std::string key(pair.substr(0, eq));
            std::size_t voff = pos + skip + eq + 1;
            scan_value(key, bytes, voff, pair.size() - eq - 1, kind, plain_format, sink);
        }
        pos = amp + 1;
    }
}

void scan_cookie_header(std::string_view bytes, std::size_t off, std::size_t len, FieldSink& sink) {
    scan_pairs(bytes, off, len, ';', ParamKind::Cookie, SubFormat::KeyValue, sink);
}

void scan_multipart(std::string_view bytes, std::size_t off, std::size_t len,
                    const std::string& boundary, FieldSink& sink) {
    const std::string delim = "--" + boundary;
    std::size_t end = off + len;
    std::size_t pos = bytes.find(delim, off);
    while (pos != std::string_view::npos && pos < end) {
        std::size_t part_start = pos + delim.size();
        if (bytes.substr(part_start, 2) == "--") break;  // final delimiter
        while (part_start < end && (bytes[part_start] == '\r' || bytes[part_start] == '\n'))
            ++part_start;
        std::size_t next = bytes.find(delim, part_start);
        if (next == std::string_view::npos || next > end) break;
        std::size_t part_end = next;
        while (part_end > part_start &&
               (bytes[part_end - 1] == '\r' || bytes[part_end - 1] == '\n'))
            --part_end;

        // Part headers end at a blank line.
        std::size_t hdr_end = bytes.find("\r\n\r\n", part_start);
        std::size_t body_start;
        if (hdr_end != std::string_view::npos && hdr_end < part_end) {
            body_start = hdr_end + 4;
        } else {
            hdr_end = part_end;
            body_start = part_end;
        }
        std::string_view part_headers = bytes.substr(part_start, hdr_end - part_start);

        std::string part_name = "part";
        // name= / filename= attribute values in the part headers are the only
        // annotatable header content; boundary lines never are.
        for (std::string_view attr : {std::string_view("name=\""), std::string_view("filename=\"")}) {
            std::size_t a = part_headers.find(attr);
            if (a == std::string_view::npos) continue;
            std::size_t vstart = part_start + a + attr.size();
            std::size_t vend = bytes.find('"', vstart);
            if (vend == std::string_view::npos || vend > hdr_end) continue;
            std::string value(bytes.substr(vstart, vend - vstart));
            if (attr[0] == 'n') {
                part_name = value;
                sink.emit(value + "_name", {ParamKind::Body, SubFormat::MultipartFormData}, bytes,
                          vstart, vend - vstart, ValueType::Str);
            } else {
                sink.emit(part_name + "_filename", {ParamKind::Body, SubFormat::MultipartFormData},
                          bytes, vstart, vend - vstart, ValueType::Str);
            }
        }
        if (body_start < part_end)
            scan_value(part_name, bytes, body_start, part_end - body_start, ParamKind::Body,
                       SubFormat::MultipartFormData, sink);
        pos = next;
    }
}

std::optional<std::string> multipart_boundary(const RawHttpRequest& req) {
    auto ct = req.header("Content-Type");
    if (!ct) return std::nullopt;
    std::string lct = lower(*ct);
    if (lct.find("multipart/form-data") == std::string::npos) return std::nullopt;
    std::size_t b = lct.find("boundary=");
    if (b == std::string::npos) return std::nullopt;
    std::string boundary = ct->substr(b + 9);
    if (!boundary.empty() && boundary.front() == '"') {
        boundary.erase(0, 1);
        if (auto q = boundary.find('"'); q != std::string::npos) boundary.erase(q);
    } else if (auto sc = boundary.find(';'); sc != std::string::npos) {
        boundary.erase(sc);
    }
    return boundary;
}

}  // namespace

std::string to_string(ValueType t) {
    switch (t) {
        case ValueType::Int: return "int";
        case ValueType::Str: return "str";
        case ValueType::Base32: return "base32";
        case ValueType::Base64: return "base64";
        case ValueType::UrlEncoded: return "urlencoded";
        case ValueType::HexEncoded: return "hex";
    }
    return "?";
}

ValueType value_type_from_string(std::string_view s) {
    if (s == "int") return ValueType::Int;
    if (s == "str") return ValueType::Str;
    if (s == "base32") return ValueType::Base32;
    if (s == "base64") return ValueType::Base64;
    if (s == "urlencoded") return ValueType::UrlEncoded;
    if (s == "hex") return ValueType::HexEncoded;
    throw std::invalid_argument("bad ValueType: " + std::string(s));
}

ValueType classify_value(std::string_view v) {
    if (v.empty()) return ValueType::Str;
    {
        std::string_view t = v;
        if (t.front() == '-') t.remove_prefix(1);
        if (all_digits(t)) return ValueType::Int;
    }
    if (v.find('%') != std::string_view::npos) {
        bool ok = true, any = false;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] != '%') continue;
            any = true;
            if (i + 2 >= v.size() || !std::isxdigit(static_cast<unsigned char>(v[i + 1])) ||
                !std::isxdigit(static_cast<unsigned char>(v[i + 2]))) {
                ok = false;
                break;
            }
        }
        if (ok && any) return ValueType::UrlEncoded;
    }
    if (v.size() >= 8 && v.size() % 8 == 0 &&
        v.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ234567=") == std::string_view::npos &&
        base32_decode(v))
        return ValueType::Base32;
    if (v.size() >= 8 && v.size() % 4 == 0 &&
        v.find_first_not_of(
            "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/=") ==
            std::string_view::npos &&
        v.find_first_of("+/=") != std::string_view::npos && base64_decode(v))
        return ValueType::Base64;
    if (v.size() >= 8 && v.size() % 2 == 0 &&
        v.find_first_not_of("0123456789abcdefABCDEF") == std::string_view::npos &&
        v.find_first_of("abcdefABCDEF") != std::string_view::npos)
        return ValueType::HexEncoded;
    return ValueType::Str;
}

std::string strip_markers(std::string_view annotated) {
    std::string out;
    out.reserve(annotated.size());
    std::size_t pos = 0;
    while (pos < annotated.size()) {
        std::size_t m = annotated.find(kMarker, pos);
        if (m == std::string_view::npos) {
            out.append(annotated.substr(pos));
            break;
        }
        out.append(annotated.substr(pos, m - pos));
        pos = m + kMarker.size();
    }
    return out;
}

bool markers_balanced(std::string_view annotated) {
    std::size_t count = 0, pos = 0;
    while ((pos = annotated.find(kMarker, pos)) != std::string_view::npos) {
        ++count;
        pos += kMarker.size();
    }
    return count % 2 == 0;
}

AnnotatedRequest make_annotated(const RawHttpRequest& req, std::vector<FieldDescriptor> fields) {
    std::sort(fields.begin(), fields.end(),
              [](const FieldDescriptor& a, const FieldDescriptor& b) { return a.offset < b.offset; });
    const std::string& bytes = req.original();
    std::size_t body_off = req.spans().body_off;

    std::size_t prev_end = 0;
    for (const auto& f : fields) {
        if (f.offset < prev_end || f.offset + f.length > bytes.size())
            throw std::invalid_argument("overlapping or out-of-range field span");
        if (f.offset < body_off && f.offset + f.length > body_off)
            throw std::invalid_argument("field straddles header/body boundary");
        prev_end = f.offset + f.length;
    }

    auto annotate_range = [&](std::size_t from, std::size_t to) {
        std::string out;
        std::size_t pos = from;
        for (const auto& f : fields) {
            if (f.offset < from || f.offset >= to) continue;
            out.append(bytes, pos, f.offset - pos);
            out.append(kMarker);
            out.append(bytes, f.offset, f.length);
            out.append(kMarker);
            pos = f.offset + f.length;
        }
        out.append(bytes, pos, to - pos);
        return out;
    };

    AnnotatedRequest ann;
    ann.header_annotated = annotate_range(0, body_off);
    ann.content_annotated = annotate_range(body_off, bytes.size());
    ann.fields = std::move(fields);
    ann.source = req;
    return ann;
}

RuleBasedAnnotator::Result RuleBasedAnnotator::annotate_with_hints(const RawHttpRequest& req) const {
    const std::string& bytes = req.original();
    const SourceSpans& spans = req.spans();
    FieldSink sink;

    // Path segments that look like values (ids, encoded blobs).
    {
        std::size_t pos = spans.path_off, end = spans.path_off + spans.path_len;
        int ordinal = 0;
        while (pos < end) {
            if (bytes[pos] == '/') {
                ++pos;
                continue;
            }
            std::size_t seg_end = bytes.find('/', pos);
            if (seg_end == std::string::npos || seg_end > end) seg_end = end;
            ++ordinal;
            std::string_view seg(bytes.data() + pos, seg_end - pos);
            if (classify_value(seg) != ValueType::Str)
                sink.emit("path_seg_" + std::to_string(ordinal),
                          {ParamKind::Path, SubFormat::KeyValue}, bytes, pos, seg.size());
            pos = seg_end;
        }
    }

    if (spans.query_len > 0)
        scan_pairs(bytes, spans.query_off, spans.query_len, '&', ParamKind::QueryString,
                   SubFormat::KeyValue, sink);

    for (std::size_t i = 0; i < req.headers().size(); ++i) {
        const auto& h = req.headers()[i];
        auto [voff, vlen] = spans.header_values[i];
        if (vlen == 0) continue;
        std::string name = lower(h.name);
        if (name == "cookie") {
            scan_cookie_header(bytes, voff, vlen, sink);
        } else if (!kStructuralHeaders.count(name)) {
            sink.emit(h.name, {ParamKind::Header, SubFormat::KeyValue}, bytes, voff, vlen);
        }
    }

    if (!req.body().empty() && !req.chunked()) {
        std::size_t boff = spans.body_off, blen = bytes.size() - boff;
        auto ct = req.header("Content-Type");
        std::string lct = ct ? lower(*ct) : "";
        if (auto boundary = multipart_boundary(req)) {
            scan_multipart(bytes, boff, blen, *boundary, sink);
        } else if (lct.find("json") != std::string::npos ||
                   (lct.empty() && (bytes[boff] == '{' || bytes[boff] == '['))) {
            JsonScanner js(bytes, boff, blen, ParamKind::Body, sink);
            js.scan("");
        } else if (lct.find("xml") != std::string::npos || (lct.empty() && bytes[boff] == '<')) {
            scan_xml(bytes, boff, blen, ParamKind::Body, sink);
        } else if (lct.find("x-www-form-urlencoded") != std::string::npos ||
                   (lct.empty() && req.body().find('=') != std::string::npos)) {
            scan_pairs(bytes, boff, blen, '&', ParamKind::Body, SubFormat::FormData, sink);
        } else if (bytes[boff] == '{' || bytes[boff] == '[') {
            JsonScanner js(bytes, boff, blen, ParamKind::Body, sink);
            js.scan("");
        } else if (bytes[boff] == '<') {
            scan_xml(bytes, boff, blen, ParamKind::Body, sink);
        } else if (req.body().find('=') != std::string::npos) {
            scan_pairs(bytes, boff, blen, '&', ParamKind::Body, SubFormat::FormData, sink);
        }
    }

    Result result;
    result.annotated = make_annotated(req, std::move(sink.fields));
    for (std::size_t i = 0; i < result.annotated.fields.size(); ++i) {
        const auto& f = result.annotated.fields[i];
        if (f.value_type == ValueType::Str && is_composite_custom(f.current_value))
            result.composite_fields.push_back(i);
    }
    return result;
}

AnnotatedRequest RuleBasedAnnotator::annotate(const RawHttpRequest& req) const {
    return annotate_with_hints(req).annotated;
}

LlmAnnotator::LlmAnnotator(LlmProvider& provider, const PromptLibrary& prompts)
    : provider_(provider), prompts_(prompts) {}

namespace {

// Extracts (local offset, length) spans from a marked string; throws
// UnbalancedMarkers on grammar violations.
std::vector<std::pair<std::size_t, std::size_t>> marked_spans(std::string_view annotated,
                                                              std::string_view expected_plain) {
    if (!markers_balanced(annotated)) throw UnbalancedMarkers("odd marker count");
    if (strip_markers(annotated) != expected_plain)
        throw UnbalancedMarkers("marker strip does not reconstruct source");
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t pos = 0, removed = 0;
    while (true) {
        std::size_t open = annotated.find(kMarker, pos);
        if (open == std::string_view::npos) break;
        std::size_t close = annotated.find(kMarker, open + kMarker.size());
        if (close == std::string_view::npos) throw UnbalancedMarkers("unclosed marker");
        std::size_t plain_off = open - removed;
        std::size_t len = close - open - kMarker.size();
        if (len == 0) throw UnbalancedMarkers("empty marked span");
        spans.emplace_back(plain_off, len);
        removed += 2 * kMarker.size();
        pos = close + kMarker.size();
    }
    return spans;
}

}  // namespace

AnnotatedRequest LlmAnnotator::annotate(const RawHttpRequest& req) const {
    const std::string& bytes = req.original();
    std::size_t body_off = req.spans().body_off;
    std::string header_part = bytes.substr(0, body_off);
    std::string content_part = bytes.substr(body_off);

    std::string header_out = provider_.complete(prompts_.build(PromptKind::HeaderAnnotate, header_part));
    std::string content_out =
        content_part.empty() ? ""
                             : provider_.complete(prompts_.build(PromptKind::ContentAnnotate, content_part));

    auto hspans = marked_spans(header_out, header_part);
    auto cspans = marked_spans(content_out, content_part);

    // Resolve names/locations by matching against the rule engine's view.
    RuleBasedAnnotator rules;
    auto rule_fields = rules.annotate(req).fields;

    std::vector<FieldDescriptor> fields;
    auto add = [&](std::size_t off, std::size_t len) {
        FieldDescriptor fd;
        fd.offset = off;
        fd.length = len;
        fd.current_value = bytes.substr(off, len);
        fd.value_type = classify_value(fd.current_value);
        fd.name = "field_" + std::to_string(off);
        fd.location = off < body_off ? ParamLocation{ParamKind::Header, SubFormat::Raw}
                                     : ParamLocation{ParamKind::Body, SubFormat::Custom};
        for (const auto& rf : rule_fields) {
            if (off >= rf.offset && off + len <= rf.offset + rf.length) {
                fd.name = rf.name;
                fd.location = rf.location;
                break;
            }
        }
        fields.push_back(std::move(fd));
    };
    for (auto [off, len] : hspans) add(off, len);
    for (auto [off, len] : cspans) add(body_off + off, len);
    return make_annotated(req, std::move(fields));
}

PipelineAnnotator::PipelineAnnotator(LlmProvider* provider, const PromptLibrary* prompts)
    : provider_(provider), prompts_(prompts) {}

AnnotatedRequest PipelineAnnotator::annotate(const RawHttpRequest& req) const {
    auto result = rule_.annotate_with_hints(req);
    if (!provider_ || !prompts_ || result.composite_fields.empty())
        return std::move(result.annotated);

    std::vector<FieldDescriptor> fields = result.annotated.fields;
    // Replace composite values from the back so indexes stay valid.
    for (auto it = result.composite_fields.rbegin(); it != result.composite_fields.rend(); ++it) {
        const FieldDescriptor parent = fields[*it];
        std::vector<std::pair<std::size_t, std::size_t>> sub;
        try {
            std::string out =
                provider_->complete(prompts_->build(PromptKind::ContentAnnotate, parent.current_value));
            sub = marked_spans(out, parent.current_value);
        } catch (const ProviderFailure&) {
            continue;  // keep the whole-value field
        } catch (const UnbalancedMarkers&) {
            continue;
        }
        if (sub.empty()) continue;
        std::vector<FieldDescriptor> subs;
        int n = 0;
        for (auto [off, len] : sub) {
            FieldDescriptor fd;
            fd.name = parent.name + "_" + std::to_string(++n);
            fd.location = {parent.location.kind, SubFormat::Custom};
            fd.offset = parent.offset + off;
            fd.length = len;
            fd.current_value = parent.current_value.substr(off, len);
            fd.value_type = classify_value(fd.current_value);
            subs.push_back(std::move(fd));
        }
        fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(*it));
        fields.insert(fields.begin() + static_cast<std::ptrdiff_t>(*it),
                      std::make_move_iterator(subs.begin()), std::make_move_iterator(subs.end()));
    }
    return make_annotated(req, std::move(fields));
}

AnnotationMetrics measure_annotation(const AnnotatedRequest& predicted,
                                     const AnnotatedRequest& truth) {
    if (predicted.source.original() != truth.source.original())
        throw MismatchedSource("annotations cover different requests");

    auto spans = [](const AnnotatedRequest& a) {
        std::set<std::pair<std::size_t, std::size_t>> s;
        for (const auto& f : a.fields) s.insert({f.offset, f.length});
        return s;
    };
    auto p = spans(predicted), t = spans(truth);

    std::size_t missed = 0, spurious = 0;
    for (const auto& span : t)
        if (!p.count(span)) ++missed;
    for (const auto& span : p)
        if (!t.count(span)) ++spurious;

    AnnotationMetrics m;
    m.false_negative_rate = t.empty() ? 0.0 : static_cast<double>(missed) / static_cast<double>(t.size());
    m.false_positive_rate =
        p.empty() ? 0.0 : static_cast<double>(spurious) / static_cast<double>(p.size());
    return m;
}

AnnotatedRequest load_truth_annotation(const RawHttpRequest& req,
                                       const std::filesystem::path& truth_file) {
    std::ifstream f(truth_file);
    if (!f) throw std::runtime_error("cannot read " + truth_file.string());
    std::vector<FieldDescriptor> fields;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string name, loc, type, off, len;
        if (!std::getline(ss, name, '\t') || !std::getline(ss, loc, '\t') ||
            !std::getline(ss, type, '\t') || !std::getline(ss, off, '\t') ||
            !std::getline(ss, len, '\t'))
            throw std::runtime_error("bad truth row in " + truth_file.string() + ": " + line);
        FieldDescriptor fd;
        fd.name = name;
        fd.location = param_location_from_string(loc);
        fd.value_type = value_type_from_string(type);
        fd.offset = std::stoul(off);
        fd.length = std::stoul(len);
        fd.current_value = req.original().substr(fd.offset, fd.length);
        fields.push_back(std::move(fd));
    }
    return make_annotated(req, std::move(fields));
}

}  // namespace httpfuzz
