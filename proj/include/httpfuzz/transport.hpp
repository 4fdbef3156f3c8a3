#pragma once

#include <optional>
#include <string>
#include <vector>

#include "httpfuzz/http_model.hpp"

namespace httpfuzz {

struct HttpResponse {
    int status = 0;
    std::vector<HeaderField> headers;
    std::string body;

    std::optional<std::string> header(std::string_view name) const;
};

enum class TransportError { ConnectFailed, Timeout, Reset };

std::string to_string(TransportError e);

struct ExchangeResult {
    std::optional<HttpResponse> response;
    std::optional<TransportError> error;

    bool ok() const { return response.has_value(); }
};

/// One-shot request/response over plaintext TCP. Abrupt closes and RSTs are
/// reported as TransportError::Reset.
class TcpTransport {
public:
    TcpTransport(std::string host, int port, int timeout_ms = 5000);

    ExchangeResult roundtrip(const std::string& request_bytes) const;
    bool reachable() const;

    const std::string& host() const { return host_; }
    int port() const { return port_; }

private:
    std::string host_;
    int port_;
    int timeout_ms_;
};

}  // namespace httpfuzz
