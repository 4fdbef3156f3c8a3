#include "httpfuzz/http_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

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

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Returns [line, bytes consumed incl. terminator]; also reports whether the
// terminator was CRLF.
struct Line {
    std::string_view text;
    std::size_t consumed = 0;
    bool crlf = false;
    bool terminated = false;
};

Line next_line(std::string_view in, std::size_t pos) {
    Line ln;
    std::size_t nl = in.find('\n', pos);
    if (nl == std::string_view::npos) {
        ln.text = in.substr(pos);
        ln.consumed = in.size() - pos;
        return ln;
    }
    ln.terminated = true;
    std::size_t end = nl;
    if (end > pos && in[end - 1] == '\r') {
        --end;
        ln.crlf = true;
    }
    ln.text = in.substr(pos, end - pos);
    ln.consumed = nl + 1 - pos;
    return ln;
}

}  // namespace

bool valid_location(ParamLocation loc) {
    switch (loc.kind) {
        case ParamKind::Path:
        case ParamKind::Header:
        case ParamKind::Cookie:
            return loc.format == SubFormat::KeyValue || loc.format == SubFormat::Raw ||
                   loc.format == SubFormat::Custom;
        case ParamKind::QueryString:
            return loc.format == SubFormat::KeyValue || loc.format == SubFormat::Json ||
                   loc.format == SubFormat::Xml || loc.format == SubFormat::Raw ||
                   loc.format == SubFormat::Custom;
        case ParamKind::Body:
            return loc.format == SubFormat::FormData || loc.format == SubFormat::Json ||
                   loc.format == SubFormat::Xml || loc.format == SubFormat::MultipartFormData ||
                   loc.format == SubFormat::Raw || loc.format == SubFormat::Custom;
    }
    return false;
}

std::string to_string(ParamKind k) {
    switch (k) {
        case ParamKind::Path: return "path";
        case ParamKind::QueryString: return "query";
        case ParamKind::Body: return "body";
        case ParamKind::Header: return "header";
        case ParamKind::Cookie: return "cookie";
    }
    return "?";
}

std::string to_string(SubFormat f) {
    switch (f) {
        case SubFormat::KeyValue: return "keyvalue";
        case SubFormat::Json: return "json";
        case SubFormat::Xml: return "xml";
        case SubFormat::FormData: return "formdata";
        case SubFormat::MultipartFormData: return "multipart";
        case SubFormat::Raw: return "raw";
        case SubFormat::Custom: return "custom";
    }
    return "?";
}

std::string to_string(ParamLocation loc) {
    return to_string(loc.kind) + ":" + to_string(loc.format);
}

ParamLocation param_location_from_string(std::string_view s) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("bad ParamLocation: " + std::string(s));
    std::string_view k = s.substr(0, colon), f = s.substr(colon + 1);
    ParamLocation loc;
    if (k == "path") loc.kind = ParamKind::Path;
    else if (k == "query") loc.kind = ParamKind::QueryString;
    else if (k == "body") loc.kind = ParamKind::Body;
    else if (k == "header") loc.kind = ParamKind::Header;
    else if (k == "cookie") loc.kind = ParamKind::Cookie;
    else throw std::invalid_argument("bad ParamKind: " + std::string(k));
    if (f == "keyvalue") loc.format = SubFormat::KeyValue;
    else if (f == "json") loc.format = SubFormat::Json;
    else if (f == "xml") loc.format = SubFormat::Xml;
    else if (f == "formdata") loc.format = SubFormat::FormData;
    else if (f == "multipart") loc.format = SubFormat::MultipartFormData;
    else if (f == "raw") loc.format = SubFormat::Raw;
    else if (f == "custom") loc.format = SubFormat::Custom;
    else throw std::invalid_argument("bad SubFormat: " + std::string(f));
    return loc;
}

RawHttpRequest RawHttpRequest::parse(std::string_view bytes, ParseMode mode) {
    RawHttpRequest req;
    req.original_.assign(bytes);

    Line rl = next_line(bytes, 0);
    if (!rl.terminated) {
        if (mode == ParseMode::Strict || rl.text.empty())
            throw MalformedRequest("missing request line terminator");
    }
    if (mode == ParseMode::Strict && rl.terminated && !rl.crlf)
        throw MalformedRequest("request line not CRLF-terminated");

    std::string_view line = rl.text;
    std::size_t sp1 = line.find(' ');
    std::size_t sp2 = line.rfind(' ');
    if (sp1 == std::string_view::npos || sp2 == sp1)
        throw MalformedRequest("malformed request line");
    req.method_.assign(line.substr(0, sp1));
    std::string_view tgt = line.substr(sp1 + 1, sp2 - sp1 - 1);
    req.version_.assign(line.substr(sp2 + 1));
    if (req.method_.empty() || tgt.empty() || req.version_.rfind("HTTP/", 0) != 0)
        throw MalformedRequest("malformed request line");

    std::size_t qmark = tgt.find('?');
    std::size_t tgt_off = sp1 + 1;
    if (qmark == std::string_view::npos) {
        req.path_.assign(tgt);
        req.spans_.path_off = tgt_off;
        req.spans_.path_len = tgt.size();
        req.spans_.query_off = req.spans_.query_len = 0;
    } else {
        req.path_.assign(tgt.substr(0, qmark));
        req.query_.assign(tgt.substr(qmark + 1));
        req.spans_.path_off = tgt_off;
        req.spans_.path_len = qmark;
        req.spans_.query_off = tgt_off + qmark + 1;
        req.spans_.query_len = req.query_.size();
    }

    std::size_t pos = rl.consumed;
    bool saw_terminator = false;
    while (pos < bytes.size()) {
        Line hl = next_line(bytes, pos);
        if (!hl.terminated) {
            if (mode == ParseMode::Strict)
                throw MalformedRequest("unterminated header line");
        } else if (mode == ParseMode::Strict && !hl.crlf) {
            throw MalformedRequest("header line not CRLF-terminated");
        }
        if (hl.text.empty()) {
            pos += hl.consumed;
            saw_terminator = true;
            break;
        }
        std::size_t colon = hl.text.find(':');
        if (colon == std::string_view::npos)
            throw MalformedRequest("header line without colon");
        std::string_view name = hl.text.substr(0, colon);
        std::string_view value = trim(hl.text.substr(colon + 1));
        std::size_t value_off = pos + (value.empty() ? colon + 1 : static_cast<std::size_t>(value.data() - bytes.data() - pos));
        req.headers_.push_back({std::string(name), std::string(value)});
        req.spans_.header_values.emplace_back(value_off, value.size());
        pos += hl.consumed;
        if (!hl.terminated) break;
    }
    if (!saw_terminator && mode == ParseMode::Strict)
        throw MalformedRequest("missing header terminator");

    req.spans_.body_off = pos;
    std::string_view rest = bytes.substr(std::min(pos, bytes.size()));

    auto te = req.header("Transfer-Encoding");
    if (te && iequals(trim(*te), "chunked")) {
        req.chunked_ = true;
        // Decode chunked body; original bytes keep the encoded form.
        std::size_t p = 0;
        while (true) {
            Line cl = next_line(rest, p);
            if (!cl.terminated) throw MalformedRequest("truncated chunk size line");
            std::size_t sz = 0;
            auto sv = cl.text.substr(0, cl.text.find(';'));
            auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), sz, 16);
            if (ec != std::errc() || ptr == sv.data())
                throw MalformedRequest("bad chunk size");
            p += cl.consumed;
            if (sz == 0) break;
            if (p + sz > rest.size()) throw MalformedRequest("truncated chunk");
            req.body_.append(rest.substr(p, sz));
            p += sz;
            Line term = next_line(rest, p);
            if (!term.text.empty()) throw MalformedRequest("missing chunk terminator");
            p += term.consumed;
        }
    } else if (auto cl = req.header("Content-Length")) {
        std::size_t n = 0;
        auto sv = trim(*cl);
        auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), n);
        if (ec != std::errc() || ptr != sv.data() + sv.size())
            throw MalformedRequest("bad Content-Length value");
        if (mode == ParseMode::Strict) {
            if (rest.size() != n)
                throw MalformedRequest("Content-Length does not match body size");
            req.body_.assign(rest);
        } else {
            // Lenient: trust the bytes that are actually there.
            req.body_.assign(rest);
        }
    } else {
        req.body_.assign(rest);
    }
    return req;
}

std::string RawHttpRequest::target() const {
    return query_.empty() ? path_ : path_ + "?" + query_;
}

std::optional<std::string> RawHttpRequest::header(std::string_view name) const {
    for (const auto& h : headers_)
        if (iequals(h.name, name)) return h.value;
    return std::nullopt;
}

std::string RawHttpRequest::render() const {
    std::string out = method_ + " " + target() + " " + version_ + "\r\n";
    bool has_cl = false;
    for (const auto& h : headers_) {
        if (iequals(h.name, "Content-Length")) {
            if (chunked_) continue;  // superseded by Transfer-Encoding
            has_cl = true;
            out += h.name + ": " + std::to_string(body_.size()) + "\r\n";
        } else {
            out += h.name + ": " + h.value + "\r\n";
        }
    }
    if (!has_cl && !chunked_ && !body_.empty())
        out += "Content-Length: " + std::to_string(body_.size()) + "\r\n";
    out += "\r\n";
    if (chunked_) {
        if (!body_.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%zx", body_.size());
            out += buf;
            out += "\r\n" + body_ + "\r\n";
        }
        out += "0\r\n\r\n";
    } else {
        out += body_;
    }
    return out;
}

std::string RawHttpRequest::serialize() const {
    return modified_ ? render() : original_;
}

RawHttpRequest RawHttpRequest::with_body(std::string new_body) const {
    RawHttpRequest r = *this;
    r.body_ = std::move(new_body);
    r.modified_ = true;
    return r;
}

RawHttpRequest RawHttpRequest::with_header(std::string_view name, std::string value) const {
    RawHttpRequest r = *this;
    r.modified_ = true;
    for (auto& h : r.headers_) {
        if (iequals(h.name, name)) {
            h.value = std::move(value);
            return r;
        }
    }
    r.headers_.push_back({std::string(name), std::move(value)});
    return r;
}

RawHttpRequest RawHttpRequest::canonicalize() const {
    RawHttpRequest tmp = *this;
    tmp.modified_ = true;
    return parse(tmp.render(), ParseMode::Strict);
}

bool RawHttpRequest::structurally_equal(const RawHttpRequest& other) const {
    if (method_ != other.method_ || path_ != other.path_ || query_ != other.query_ ||
        version_ != other.version_ || body_ != other.body_ || chunked_ != other.chunked_)
        return false;
    if (headers_.size() != other.headers_.size()) return false;
    for (std::size_t i = 0; i < headers_.size(); ++i)
        if (headers_[i].name != other.headers_[i].name ||
            headers_[i].value != other.headers_[i].value)
            return false;
    return true;
}

std::string apply_span_edits(std::string_view original, std::vector<SpanEdit> edits) {
    std::sort(edits.begin(), edits.end(),
              [](const SpanEdit& a, const SpanEdit& b) { return a.offset < b.offset; });
    std::string out;
    out.reserve(original.size());
    std::size_t pos = 0;
    for (const auto& e : edits) {
        if (e.offset < pos || e.offset + e.length > original.size())
            throw std::invalid_argument("overlapping or out-of-range span edit");
        out.append(original.substr(pos, e.offset - pos));
        out.append(e.replacement);
        pos = e.offset + e.length;
    }
    out.append(original.substr(pos));
    return out;
}

std::string fix_content_length(std::string bytes) {
    std::size_t hdr_end = bytes.find("\r\n\r\n");
    std::size_t body_off;
    if (hdr_end != std::string::npos) {
        body_off = hdr_end + 4;
    } else {
        hdr_end = bytes.find("\n\n");
        if (hdr_end == std::string::npos) return bytes;
        body_off = hdr_end + 2;
    }
    std::size_t body_len = bytes.size() - body_off;

    // Scan header lines for Content-Length.
    std::size_t pos = bytes.find('\n') + 1;  // skip request line
    while (pos < hdr_end + 1) {
        std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos || eol >= body_off) break;
        std::size_t line_end = (eol > pos && bytes[eol - 1] == '\r') ? eol - 1 : eol;
        std::string_view ln(bytes.data() + pos, line_end - pos);
        std::size_t colon = ln.find(':');
        if (colon != std::string_view::npos && iequals(ln.substr(0, colon), "Content-Length")) {
            std::size_t val_off = pos + colon + 1;
            while (val_off < line_end && (bytes[val_off] == ' ' || bytes[val_off] == '\t'))
                ++val_off;
            bytes.replace(val_off, line_end - val_off, std::to_string(body_len));
            break;
        }
        pos = eol + 1;
    }
    return bytes;
}

}  // namespace httpfuzz
