#include "httpfuzz/testbed.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "httpfuzz/codec.hpp"
#include "httpfuzz/http_model.hpp"

namespace httpfuzz::testbed {

using nlohmann::json;

SinkBehavior sink_behavior_from_string(const std::string& s) {
    if (s == "static") return SinkBehavior::Static;
    if (s == "echo_command") return SinkBehavior::EchoCommand;
    if (s == "crash_on_length") return SinkBehavior::CrashOnLength;
    if (s == "hidden_branch") return SinkBehavior::HiddenBranch;
    if (s == "value_set_gate") return SinkBehavior::ValueSetGate;
    if (s == "session_gate") return SinkBehavior::SessionGate;
    if (s == "format_gate") return SinkBehavior::FormatGate;
    throw InvalidScenario("unknown sink behavior: " + s);
}

Scenario Scenario::parse(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw InvalidScenario("scenario is not a JSON object");
    Scenario sc;
    if (!doc.contains("sinks") || !doc["sinks"].is_array())
        throw InvalidScenario("scenario has no sinks array");
    for (const auto& s : doc["sinks"]) {
        SinkSpec spec;
        spec.route = s.value("route", "");
        if (spec.route.empty()) throw InvalidScenario("sink without a route");
        spec.behavior = sink_behavior_from_string(s.value("behavior", "static"));
        spec.param = s.value("param", "");
        spec.trigger = s.value("trigger", "");
        if (s.contains("values"))
            for (const auto& v : s["values"]) spec.values.push_back(v.get<std::string>());
        spec.error_value = s.value("error_value", "");
        spec.threshold = s.value("threshold", 0u);
        spec.format = s.value("format", "");
        spec.session_required = s.value("session_required", false);
        sc.sinks.push_back(std::move(spec));
    }
    if (doc.contains("session")) {
        const auto& s = doc["session"];
        SessionSpec sess;
        sess.login_route = s.value("login_route", sess.login_route);
        sess.user_param = s.value("user_param", sess.user_param);
        sess.pass_param = s.value("pass_param", sess.pass_param);
        sess.username = s.value("username", "");
        sess.password = s.value("password", "");
        sess.ttl_seconds = s.value("ttl_seconds", sess.ttl_seconds);
        sess.cookie_name = s.value("cookie_name", sess.cookie_name);
        if (sess.username.empty() || sess.password.empty())
            throw InvalidScenario("session block needs username and password");
        sc.session = std::move(sess);
    }
    return sc;
}

Scenario Scenario::load(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw InvalidScenario("cannot read scenario file: " + file.string());
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

bool matches_format(const std::string& format, const std::string& value) {
    std::size_t fi = 0, vi = 0;
    while (fi < format.size()) {
        if (format[fi] == '%' && fi + 1 < format.size()) {
            char conv = format[fi + 1];
            if (conv == 'd' || conv == 'i' || conv == 'u') {
                std::size_t start = vi;
                if (conv != 'u' && vi < value.size() && value[vi] == '-') ++vi;
                std::size_t digits = vi;
                while (vi < value.size() && std::isdigit(static_cast<unsigned char>(value[vi])))
                    ++vi;
                if (vi == digits) return false;
                (void)start;
                fi += 2;
                continue;
            }
            if (conv == 's') {
                // greedy up to the next literal byte of the format
                char stop = fi + 2 < format.size() ? format[fi + 2] : '\0';
                std::size_t start = vi;
                while (vi < value.size() && (stop == '\0' || value[vi] != stop)) ++vi;
                if (vi == start) return false;
                fi += 2;
                continue;
            }
        }
        if (vi >= value.size() || value[vi] != format[fi]) return false;
        ++fi;
        ++vi;
    }
    return vi == value.size();
}

namespace {

std::string make_response(int status, const std::string& body,
                          const std::vector<std::string>& extra_headers = {}) {
    const char* reason = status == 200   ? "OK"
                         : status == 400 ? "Bad Request"
                         : status == 401 ? "Unauthorized"
                         : status == 403 ? "Forbidden"
                         : status == 404 ? "Not Found"
                         : status == 500 ? "Internal Server Error"
                                         : "Status";
    std::ostringstream os;
    os << "HTTP/1.1 " << status << ' ' << reason << "\r\n";
    os << "Content-Type: text/plain\r\n";
    for (const auto& h : extra_headers) os << h << "\r\n";
    os << "Content-Length: " << body.size() << "\r\n";
    os << "Connection: close\r\n\r\n";
    os << body;
    return os.str();
}

void add_pair(std::map<std::string, std::string>& params, std::string_view chunk, char eq) {
    std::size_t e = chunk.find(eq);
    if (e == std::string_view::npos) return;
    std::string_view k = chunk.substr(0, e);
    std::string_view v = chunk.substr(e + 1);
    while (!k.empty() && k.front() == ' ') k.remove_prefix(1);
    auto dk = url_decode(k);
    auto dv = url_decode(v);
    params[dk ? *dk : std::string(k)] = dv ? *dv : std::string(v);
}

void scan_pairs(std::map<std::string, std::string>& params, std::string_view text, char sep) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find(sep, pos);
        std::string_view chunk =
            text.substr(pos, next == std::string_view::npos ? text.size() - pos : next - pos);
        if (!chunk.empty()) add_pair(params, chunk, '=');
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
}

void scan_json(std::map<std::string, std::string>& params, const json& doc,
               const std::string& prefix) {
    if (!doc.is_object()) return;
    for (const auto& [key, val] : doc.items()) {
        std::string name = prefix.empty() ? key : prefix + "." + key;
        if (val.is_string())
            params[name] = val.get<std::string>();
        else if (val.is_number_integer())
            params[name] = std::to_string(val.get<long long>());
        else if (val.is_number())
            params[name] = std::to_string(val.get<double>());
        else if (val.is_boolean())
            params[name] = val.get<bool>() ? "true" : "false";
        else if (val.is_object())
            scan_json(params, val, name);
    }
}

void scan_multipart(std::map<std::string, std::string>& params, std::string_view body,
                    const std::string& boundary) {
    std::string sep = "--" + boundary;
    std::size_t pos = 0;
    while ((pos = body.find(sep, pos)) != std::string_view::npos) {
        pos += sep.size();
        if (body.substr(pos, 2) == "--") break;
        std::size_t head_end = body.find("\r\n\r\n", pos);
        if (head_end == std::string_view::npos) break;
        std::string_view head = body.substr(pos, head_end - pos);
        std::size_t part_end = body.find(sep, head_end);
        if (part_end == std::string_view::npos) break;
        std::string_view content = body.substr(head_end + 4, part_end - head_end - 4);
        while (!content.empty() && (content.back() == '\n' || content.back() == '\r'))
            content.remove_suffix(1);
        std::size_t np = head.find("name=\"");
        if (np != std::string_view::npos) {
            np += 6;
            std::size_t nq = head.find('"', np);
            if (nq != std::string_view::npos)
                params[std::string(head.substr(np, nq - np))] = std::string(content);
        }
        pos = part_end;
    }
}

std::map<std::string, std::string> extract_params(const RawHttpRequest& req) {
    std::map<std::string, std::string> params;
    scan_pairs(params, req.query(), '&');
    if (auto cookie = req.header("Cookie")) scan_pairs(params, *cookie, ';');

    std::string ctype = req.header("Content-Type").value_or("");
    std::string_view body = req.body();
    if (body.empty()) return params;
    if (ctype.find("json") != std::string::npos) {
        json doc = json::parse(body, nullptr, false);
        if (!doc.is_discarded()) scan_json(params, doc, "");
    } else if (ctype.find("multipart/form-data") != std::string::npos) {
        std::size_t bp = ctype.find("boundary=");
        if (bp != std::string::npos) scan_multipart(params, body, ctype.substr(bp + 9));
    } else {
        scan_pairs(params, body, '&');
    }
    return params;
}

// The token a naive `system("... echo X ...")` would print.
std::optional<std::string> echoed_token(const std::string& value) {
    std::size_t pos = value.find("echo ");
    if (pos == std::string::npos) return std::nullopt;
    pos += 5;
    while (pos < value.size() && value[pos] == ' ') ++pos;
    std::size_t end = pos;
    static const std::string kDelims = ";`|&\"'\r\n ";
    while (end < value.size() && kDelims.find(value[end]) == std::string::npos) ++end;
    if (end == pos) return std::nullopt;
    return value.substr(pos, end - pos);
}

}  // namespace

Server::Server(Scenario scenario, int port) : scenario_(std::move(scenario)) {
    listen_fd_ = socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        close(listen_fd_);
        throw PortInUse("cannot bind port " + std::to_string(port));
    }
    socklen_t len = sizeof(addr);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (listen(listen_fd_, 64) != 0) {
        close(listen_fd_);
        throw std::runtime_error("listen() failed");
    }
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
    if (!running_.exchange(false)) return;
    shutdown(listen_fd_, SHUT_RDWR);
    close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::lock_guard<std::mutex> lk(workers_mutex_);
    for (auto& t : workers_)
        if (t.joinable()) t.join();
    workers_.clear();
}

void Server::accept_loop() {
    while (running_) {
        int fd = accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        std::lock_guard<std::mutex> lk(workers_mutex_);
        // reap finished threads opportunistically
        workers_.emplace_back([this, fd] { handle_connection(fd); });
        if (workers_.size() > 256) {
            for (auto& t : workers_)
                if (t.joinable()) t.join();
            workers_.clear();
        }
    }
}

void Server::append_log(std::string raw, std::string route, std::string note) {
    std::lock_guard<std::mutex> lk(log_mutex_);
    log_.push_back({std::move(raw), std::move(route), std::move(note)});
}

std::vector<Server::LogEntry> Server::log() const {
    std::lock_guard<std::mutex> lk(log_mutex_);
    return log_;
}

std::size_t Server::count_notes(const std::string& note_substring) const {
    std::lock_guard<std::mutex> lk(log_mutex_);
    std::size_t n = 0;
    for (const auto& e : log_)
        if (e.note.find(note_substring) != std::string::npos) ++n;
    return n;
}

void Server::handle_connection(int fd) {
    timeval tv{5, 0};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));

    std::string raw;
    char buf[4096];
    std::size_t expect = std::string::npos;
    while (running_) {
        if (expect == std::string::npos) {
            std::size_t head_end = raw.find("\r\n\r\n");
            if (head_end != std::string::npos) {
                std::size_t cl = 0;
                std::string lower;
                lower.reserve(head_end);
                for (std::size_t i = 0; i < head_end; ++i)
                    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i])));
                std::size_t cp = lower.find("content-length:");
                if (cp != std::string::npos) {
                    cp += 15;
                    while (cp < lower.size() && lower[cp] == ' ') ++cp;
                    while (cp < lower.size() && std::isdigit(static_cast<unsigned char>(lower[cp])))
                        cl = cl * 10 + static_cast<std::size_t>(lower[cp++] - '0');
                }
                expect = head_end + 4 + cl;
            }
        }
        if (expect != std::string::npos && raw.size() >= expect) break;
        ssize_t n = recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        raw.append(buf, static_cast<std::size_t>(n));
    }
    if (raw.empty() || expect == std::string::npos || raw.size() < expect) {
        close(fd);
        return;
    }
    raw.resize(expect);

    std::optional<RawHttpRequest> req;
    try {
        req = RawHttpRequest::parse(raw, ParseMode::Lenient);
    } catch (const MalformedRequest&) {
        append_log(raw, "", "unparseable");
        std::string resp = make_response(400, "bad request\n");
        send(fd, resp.data(), resp.size(), MSG_NOSIGNAL);
        close(fd);
        return;
    }

    std::string path(req->path());
    auto params = extract_params(*req);

    std::string note;
    std::string resp;
    bool abort_connection = false;

    auto param_of = [&](const SinkSpec& s) -> std::string {
        auto it = params.find(s.param);
        return it == params.end() ? std::string() : it->second;
    };

    // login route, when sessions are configured
    if (scenario_.session && path == scenario_.session->login_route) {
        const auto& sess = *scenario_.session;
        if (params[sess.user_param] == sess.username && params[sess.pass_param] == sess.password) {
            std::string token;
            {
                std::lock_guard<std::mutex> lk(session_mutex_);
                token = "s" + std::to_string(++next_session_);
                sessions_[token] = std::chrono::steady_clock::now() +
                                   std::chrono::seconds(sess.ttl_seconds);
            }
            note = "login_ok";
            resp = make_response(200, "welcome\n",
                                 {"Set-Cookie: " + sess.cookie_name + "=" + token});
        } else {
            note = "login_denied";
            resp = make_response(403, "denied\n");
        }
    } else {
        const SinkSpec* sink = nullptr;
        for (const auto& s : scenario_.sinks)
            if (s.route == path) {
                sink = &s;
                break;
            }
        if (!sink) {
            note = "not_found";
            resp = make_response(404, "not found\n");
        } else {
            bool session_ok = true;
            bool needs_session =
                sink->session_required || sink->behavior == SinkBehavior::SessionGate;
            if (needs_session) {
                session_ok = false;
                if (scenario_.session) {
                    auto it = params.find(scenario_.session->cookie_name);
                    if (it != params.end()) {
                        std::lock_guard<std::mutex> lk(session_mutex_);
                        auto s = sessions_.find(it->second);
                        if (s != sessions_.end() && s->second > std::chrono::steady_clock::now())
                            session_ok = true;
                    }
                }
            }
            if (!session_ok) {
                note = "unauthorized";
                resp = make_response(401, "unauthorized\n");
            } else {
                std::string value = param_of(*sink);
                switch (sink->behavior) {
                    case SinkBehavior::Static:
                        resp = make_response(200, "ok\n");
                        break;
                    case SinkBehavior::SessionGate:
                        note = "session_ok";
                        resp = make_response(200, "secret\n");
                        break;
                    case SinkBehavior::EchoCommand:
                        if (auto token = echoed_token(value)) {
                            note = "echo";
                            resp = make_response(200, "executed: " + *token + "\n");
                        } else {
                            resp = make_response(200, "ok\n");
                        }
                        break;
                    case SinkBehavior::CrashOnLength:
                        if (value.size() > sink->threshold) {
                            note = "crash";
                            abort_connection = true;
                        } else {
                            resp = make_response(200, "ok\n");
                        }
                        break;
                    case SinkBehavior::HiddenBranch:
                        if (!value.empty() && value == sink->trigger) {
                            note = "hidden:" + sink->trigger;
                            resp = make_response(200, "branch " + sink->trigger + "\n");
                        } else {
                            resp = make_response(200, "ok\n");
                        }
                        break;
                    case SinkBehavior::ValueSetGate:
                        if (!value.empty() && value == sink->error_value) {
                            note = "error_gate";
                            resp = make_response(500, "internal error\n");
                        } else if (!value.empty() &&
                                   std::find(sink->values.begin(), sink->values.end(), value) !=
                                       sink->values.end()) {
                            note = "gate:" + value;
                            resp = make_response(200, "mode " + value + "\n");
                        } else {
                            resp = make_response(200, "ok\n");
                        }
                        break;
                    case SinkBehavior::FormatGate:
                        if (!value.empty() && matches_format(sink->format, value)) {
                            note = "format_ok";
                            resp = make_response(200, "accepted\n");
                        } else {
                            resp = make_response(400, "bad format\n");
                        }
                        break;
                }
            }
        }
    }

    append_log(std::move(raw), path, note);
    if (abort_connection) {
        linger lg{1, 0};  // RST on close, no FIN
        setsockopt(fd, SOL_SOCKET, SO_LINGER, &lg, sizeof(lg));
        close(fd);
        return;
    }
    send(fd, resp.data(), resp.size(), MSG_NOSIGNAL);
    close(fd);
}

}  // namespace httpfuzz::testbed
