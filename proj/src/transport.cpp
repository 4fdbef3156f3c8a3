#include "httpfuzz/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

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

int open_connection(const std::string& host, int port, int timeout_ms) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;

    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
        setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
        if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    return fd;
}

bool send_all(int fd, std::string_view data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

// Reads status line + headers + a Content-Length or EOF delimited body.
std::optional<HttpResponse> parse_response(const std::string& raw) {
    std::size_t head_end = raw.find("\r\n\r\n");
    std::size_t body_off;
    if (head_end != std::string::npos) {
        body_off = head_end + 4;
    } else {
        head_end = raw.find("\n\n");
        if (head_end == std::string::npos) return std::nullopt;
        body_off = head_end + 2;
    }

    HttpResponse resp;
    std::string_view head(raw.data(), head_end);
    std::size_t line_end = head.find('\n');
    std::string_view status_line =
        head.substr(0, line_end == std::string_view::npos ? head.size() : line_end);
    if (!status_line.empty() && status_line.back() == '\r') status_line.remove_suffix(1);
    std::size_t sp = status_line.find(' ');
    if (sp == std::string_view::npos || status_line.substr(0, 5) != "HTTP/") return std::nullopt;
    std::string_view rest = status_line.substr(sp + 1);
    int status = 0;
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + std::min<std::size_t>(3, rest.size()),
                                   status);
    if (ec != std::errc{}) return std::nullopt;
    resp.status = status;

    std::size_t pos = line_end == std::string_view::npos ? head.size() : line_end + 1;
    while (pos < head.size()) {
        std::size_t eol = head.find('\n', pos);
        std::string_view line = head.substr(pos, eol == std::string_view::npos ? head.size() - pos
                                                                               : eol - pos);
        pos = eol == std::string_view::npos ? head.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::size_t colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        std::string_view value = line.substr(colon + 1);
        while (!value.empty() && (value.front() == ' ' || value.front() == '\t'))
            value.remove_prefix(1);
        resp.headers.push_back({std::string(line.substr(0, colon)), std::string(value)});
    }
    resp.body = raw.substr(body_off);
    return resp;
}

}  // namespace

std::optional<std::string> HttpResponse::header(std::string_view name) const {
    for (const auto& h : headers)
        if (iequals(h.name, name)) return h.value;
    return std::nullopt;
}

std::string to_string(TransportError e) {
    switch (e) {
        case TransportError::ConnectFailed: return "connect_failed";
        case TransportError::Timeout: return "timeout";
        case TransportError::Reset: return "reset";
    }
    return "unknown";
}

TcpTransport::TcpTransport(std::string host, int port, int timeout_ms)
    : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

bool TcpTransport::reachable() const {
    int fd = open_connection(host_, port_, timeout_ms_);
    if (fd < 0) return false;
    close(fd);
    return true;
}

ExchangeResult TcpTransport::roundtrip(const std::string& request_bytes) const {
    ExchangeResult result;
    int fd = open_connection(host_, port_, timeout_ms_);
    if (fd < 0) {
        result.error = TransportError::ConnectFailed;
        return result;
    }
    if (!send_all(fd, request_bytes)) {
        close(fd);
        result.error = TransportError::Reset;
        return result;
    }

    std::string raw;
    std::optional<std::size_t> expect_total;  // head size + Content-Length, once known
    char buf[4096];
    for (;;) {
        ssize_t n = recv(fd, buf, sizeof(buf), 0);
        if (n > 0) {
            raw.append(buf, static_cast<std::size_t>(n));
            if (!expect_total) {
                std::size_t head_end = raw.find("\r\n\r\n");
                std::size_t body_off = head_end + 4;
                if (head_end == std::string::npos) {
                    head_end = raw.find("\n\n");
                    body_off = head_end + 2;
                }
                if (head_end != std::string::npos) {
                    auto partial = parse_response(raw);
                    if (partial) {
                        if (auto cl = partial->header("Content-Length")) {
                            std::size_t len = 0;
                            auto [p, ec] = std::from_chars(cl->data(), cl->data() + cl->size(), len);
                            if (ec == std::errc{}) expect_total = body_off + len;
                        }
                    }
                }
            }
            if (expect_total && raw.size() >= *expect_total) break;
            continue;
        }
        if (n == 0) break;  // orderly close
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            close(fd);
            if (raw.empty()) {
                result.error = TransportError::Timeout;
                return result;
            }
            break;
        }
        // ECONNRESET and friends: the peer aborted the connection.
        close(fd);
        if (auto resp = parse_response(raw); resp && expect_total && raw.size() >= *expect_total) {
            result.response = std::move(*resp);
            return result;
        }
        result.error = TransportError::Reset;
        return result;
    }
    close(fd);

    if (raw.empty()) {
        result.error = TransportError::Reset;
        return result;
    }
    auto resp = parse_response(raw);
    if (!resp) {
        result.error = TransportError::Reset;
        return result;
    }
    if (expect_total && raw.size() > *expect_total)
        resp->body.resize(resp->body.size() - (raw.size() - *expect_total));
    result.response = std::move(*resp);
    return result;
}

}  // namespace httpfuzz
