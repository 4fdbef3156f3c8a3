#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace httpfuzz {

class ProviderFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedProviderOutput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PromptKind { HeaderAnnotate, ContentAnnotate, PacketFromCode, FieldValueExtract };

std::string to_string(PromptKind k);

struct ChatMessage {
    std::string role;
    std::string text;
};

struct ChatExchange {
    PromptKind kind = PromptKind::ContentAnnotate;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

/// Delimiter separating individual packets in a PacketFromCode completion.
inline constexpr std::string_view kPacketDelimiter = "-+-+-+-+";

/// Collapses whitespace runs so fixture lookups survive formatting drift.
std::string normalize_payload(std::string_view payload);

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string complete(const ChatExchange& exchange) = 0;
};

/// Instruction templates and few-shot exemplars, loaded from data files so
/// operators can tune them without rebuilding.
class PromptLibrary {
public:
    explicit PromptLibrary(std::filesystem::path dir);

    /// payload becomes the final user message; `reference` (for
    /// PacketFromCode) is appended after a REFERENCE PACKET separator.
    ChatExchange build(PromptKind kind, std::string_view payload,
                       std::optional<std::string_view> reference = std::nullopt) const;

private:
    struct KindData {
        std::string instruction;
        std::vector<std::pair<std::string, std::string>> exemplars;
    };
    std::map<PromptKind, KindData> kinds_;
};

/// Deterministic provider backed by checked-in fixtures; keyed by
/// (kind, normalized payload). Unknown payloads raise ProviderFailure.
class MockProvider : public LlmProvider {
public:
    explicit MockProvider(const std::filesystem::path& fixtures_dir);
    std::string complete(const ChatExchange& exchange) override;

private:
    std::map<std::pair<std::string, std::string>, std::string> answers_;
};

/// OpenAI-compatible chat-completions client. The endpoint is any
/// conforming server; the API key comes from an environment variable.
class RemoteProvider : public LlmProvider {
public:
    struct Options {
        std::string base_url;                 // e.g. http://host:port
        std::string model = "gpt-4o";
        std::string api_key_env = "LLM_API_KEY";
        int max_attempts = 3;
        int initial_backoff_ms = 200;
        int timeout_seconds = 60;
    };
    explicit RemoteProvider(Options opts);
    std::string complete(const ChatExchange& exchange) override;

private:
    Options opts_;
    std::mutex transport_mutex_;  // serializes the rate-limited transport
};

}  // namespace httpfuzz
