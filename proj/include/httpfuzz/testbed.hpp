#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace httpfuzz::testbed {

class PortInUse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidScenario : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SinkBehavior {
    Static,        // plain 200 "ok", a control route
    EchoCommand,   // simulated shell: echoes the token following "echo " in the parameter
    CrashOnLength, // aborts the connection (RST) when the parameter exceeds threshold bytes
    HiddenBranch,  // distinct response only when the parameter equals the trigger literal
    ValueSetGate,  // distinct response per literal in the value set; error_value returns 500
    SessionGate,   // requires a valid login session
    FormatGate,    // accepts only values matching a scanf-style format
};

SinkBehavior sink_behavior_from_string(const std::string& s);

struct SinkSpec {
    std::string route;
    SinkBehavior behavior = SinkBehavior::Static;
    std::string param;                 // the inspected request parameter
    std::string trigger;               // HiddenBranch literal
    std::vector<std::string> values;   // ValueSetGate literals
    std::string error_value;           // ValueSetGate literal answered with a 500
    std::size_t threshold = 0;         // CrashOnLength byte limit
    std::string format;                // FormatGate scanf-style spec, e.g. "%d:%d:%s"
    bool session_required = false;
};

struct SessionSpec {
    std::string login_route = "/login";
    std::string user_param = "user";
    std::string pass_param = "pass";
    std::string username;
    std::string password;
    int ttl_seconds = 60;
    std::string cookie_name = "sid";
};

struct Scenario {
    std::vector<SinkSpec> sinks;
    std::optional<SessionSpec> session;

    static Scenario load(const std::filesystem::path& file);
    static Scenario parse(const std::string& json_text);
};

/// True when `value` matches the scanf-style `format` exactly (%d/%i/%u
/// integer fields, %s greedy non-delimiter text, other bytes literal).
bool matches_format(const std::string& format, const std::string& value);

/// A mock vulnerable HTTP server. Port 0 binds an ephemeral port.
class Server {
public:
    struct LogEntry {
        std::string raw;    // the request bytes, verbatim
        std::string route;
        std::string note;   // which sink condition fired, empty otherwise
    };

    Server(Scenario scenario, int port = 0);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    int port() const { return port_; }
    void stop();

    std::vector<LogEntry> log() const;
    std::size_t count_notes(const std::string& note_substring) const;

private:
    void accept_loop();
    void handle_connection(int fd);
    void append_log(std::string raw, std::string route, std::string note);

    Scenario scenario_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex workers_mutex_;

    mutable std::mutex log_mutex_;
    std::vector<LogEntry> log_;

    std::mutex session_mutex_;
    std::map<std::string, std::chrono::steady_clock::time_point> sessions_;
    std::uint64_t next_session_ = 0;
};

}  // namespace httpfuzz::testbed
