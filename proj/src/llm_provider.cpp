#include "httpfuzz/llm_provider.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace httpfuzz {

using nlohmann::json;

std::string to_string(PromptKind k) {
    switch (k) {
        case PromptKind::HeaderAnnotate: return "header_annotate";
        case PromptKind::ContentAnnotate: return "content_annotate";
        case PromptKind::PacketFromCode: return "packet_from_code";
        case PromptKind::FieldValueExtract: return "field_value_extract";
    }
    return "?";
}

std::string normalize_payload(std::string_view payload) {
    std::string out;
    bool in_ws = false;
    for (char c : payload) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out += ' ';
        in_ws = false;
        out += c;
    }
    return out;
}

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

constexpr PromptKind kAllKinds[] = {PromptKind::HeaderAnnotate, PromptKind::ContentAnnotate,
                                    PromptKind::PacketFromCode, PromptKind::FieldValueExtract};

}  // namespace

PromptLibrary::PromptLibrary(std::filesystem::path dir) {
    for (PromptKind k : kAllKinds) {
        KindData data;
        data.instruction = slurp(dir / (to_string(k) + ".txt"));
        json ex = json::parse(slurp(dir / "examples" / (to_string(k) + ".json")));
        for (const auto& e : ex)
            data.exemplars.emplace_back(e.at("question").get<std::string>(),
                                        e.at("answer").get<std::string>());
        if (data.exemplars.size() < 2)
            throw std::runtime_error("prompt kind " + to_string(k) + " needs >=2 exemplars");
        kinds_.emplace(k, std::move(data));
    }
}

ChatExchange PromptLibrary::build(PromptKind kind, std::string_view payload,
                                  std::optional<std::string_view> reference) const {
    const KindData& data = kinds_.at(kind);
    ChatExchange ex;
    ex.kind = kind;
    ex.temperature = 0.0;
    ex.messages.push_back({"system", data.instruction});
    for (const auto& [q, a] : data.exemplars) {
        ex.messages.push_back({"user", q});
        ex.messages.push_back({"assistant", a});
    }
    std::string final_payload(payload);
    if (reference) {
        final_payload += "\n\nREFERENCE PACKET:\n";
        final_payload += *reference;
    }
    ex.messages.push_back({"user", final_payload});
    return ex;
}

MockProvider::MockProvider(const std::filesystem::path& fixtures_dir) {
    if (!std::filesystem::is_directory(fixtures_dir))
        throw std::runtime_error("mock fixtures dir missing: " + fixtures_dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(fixtures_dir)) {
        if (entry.path().extension() != ".json") continue;
        json doc = json::parse(slurp(entry.path()));
        for (const auto& item : doc) {
            answers_[{item.at("kind").get<std::string>(),
                      normalize_payload(item.at("payload").get<std::string>())}] =
                item.at("answer").get<std::string>();
        }
    }
}

std::string MockProvider::complete(const ChatExchange& exchange) {
    if (exchange.temperature != 0.0)
        throw ProviderFailure("framework calls must use temperature 0");
    if (exchange.messages.empty() || exchange.messages.back().role != "user")
        throw ProviderFailure("exchange must end with a user message");
    auto key = std::make_pair(to_string(exchange.kind),
                              normalize_payload(exchange.messages.back().text));
    auto it = answers_.find(key);
    if (it == answers_.end())
        throw ProviderFailure("no mock fixture for payload: " + key.second.substr(0, 80));
    return it->second;
}

RemoteProvider::RemoteProvider(Options opts) : opts_(std::move(opts)) {
    if (opts_.base_url.empty()) throw std::invalid_argument("remote provider needs a base URL");
}

std::string RemoteProvider::complete(const ChatExchange& exchange) {
    std::lock_guard lock(transport_mutex_);

    json body;
    body["model"] = opts_.model;
    body["temperature"] = exchange.temperature;
    body["messages"] = json::array();
    for (const auto& m : exchange.messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.text}});

    httplib::Client client(opts_.base_url);
    client.set_connection_timeout(opts_.timeout_seconds);
    client.set_read_timeout(opts_.timeout_seconds);
    httplib::Headers headers;
    if (const char* key = std::getenv(opts_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);

    int backoff = opts_.initial_backoff_ms;
    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProviderFailure("provider status " + std::to_string(res->status));
        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
            throw MalformedProviderOutput("unparseable completion response");
        return doc["choices"][0]["message"]["content"].get<std::string>();
    }
    throw ProviderFailure("provider unreachable after retries: " + last_error);
}

}  // namespace httpfuzz
