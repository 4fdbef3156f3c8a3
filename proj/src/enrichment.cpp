#include "httpfuzz/enrichment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace httpfuzz {

using nlohmann::json;

IngestResult ingest_static_analysis(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw UnreadableDirectory("not a directory: " + dir.string());
    IngestResult result;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream f(file);
        json doc = json::parse(f, nullptr, false);
        if (doc.is_discarded()) {
            result.warnings.push_back(file.filename().string() + ": unparseable JSON");
            continue;
        }
        RouteCodeEntry e;
        e.url = doc.value("url", "");
        e.function_name = doc.value("function_name", "");
        e.code = doc.value("code", "");
        std::string mode = doc.value("routing_mode", "table");
        e.routing_mode = mode == "file" ? RoutingMode::FileBased : RoutingMode::TableBased;
        if (e.url.empty() || e.code.empty()) {
            result.warnings.push_back(file.filename().string() + ": missing url or code, skipped");
            continue;
        }
        result.entries.push_back(std::move(e));
    }
    return result;
}

std::vector<RawHttpRequest> generate_packets(const RouteCodeEntry& entry,
                                             const std::optional<RawHttpRequest>& reference,
                                             LlmProvider& provider, const PromptLibrary& prompts) {
    std::optional<std::string> ref_bytes;
    std::optional<std::string_view> ref_view;
    if (reference) {
        ref_bytes = reference->serialize();
        ref_view = *ref_bytes;
    }
    std::string completion =
        provider.complete(prompts.build(PromptKind::PacketFromCode, entry.code, ref_view));

    std::vector<RawHttpRequest> packets;
    std::size_t chunks = 0;
    std::size_t pos = 0;
    while (pos <= completion.size()) {
        std::size_t delim = completion.find(kPacketDelimiter, pos);
        std::string chunk = completion.substr(
            pos, delim == std::string::npos ? std::string::npos : delim - pos);
        pos = delim == std::string::npos ? completion.size() + 1 : delim + kPacketDelimiter.size();

        // Trim surrounding whitespace; normalize bare-LF provider text.
        std::size_t b = chunk.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        std::size_t e = chunk.find_last_not_of(" \t\r\n");
        chunk = chunk.substr(b, e - b + 1);
        ++chunks;
        try {
            packets.push_back(RawHttpRequest::parse(chunk, ParseMode::Lenient).canonicalize());
        } catch (const MalformedRequest&) {
            // strict parse-or-drop: hallucinated chunks are never repaired
        }
    }
    if (chunks > 0 && packets.empty())
        throw AllOutputsInvalid("no provider chunk parsed as a request for " + entry.url);
    return packets;
}

PotentialValues extract_potential_values(const RouteCodeEntry& entry, LlmProvider& provider,
                                         const PromptLibrary& prompts) {
    std::string completion =
        provider.complete(prompts.build(PromptKind::FieldValueExtract, entry.code));
    json doc = json::parse(completion, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw MalformedProviderOutput("field-value extraction output is not a JSON object");
    PotentialValues pv;
    if (doc.contains("values")) {
        for (const auto& [key, list] : doc["values"].items())
            for (const auto& v : list) pv.values[key].push_back(v.get<std::string>());
    }
    if (doc.contains("formats")) {
        for (const auto& [key, spec] : doc["formats"].items())
            pv.format_specs[key] = spec.get<std::string>();
    }
    return pv;
}

std::string instantiate_format(const std::string& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (spec[i] == '%' && i + 1 < spec.size()) {
            char c = spec[i + 1];
            if (c == 'd' || c == 'i' || c == 'u') {
                out += "1";
                ++i;
                continue;
            }
            if (c == 's') {
                out += "a";
                ++i;
                continue;
            }
        }
        out += spec[i];
    }
    return out;
}

EnrichOutcome field_enrich(const RouteCodeEntry& entry, const std::string& url,
                           TemplatePool& pool, LlmProvider& provider,
                           const PromptLibrary& prompts) {
    PotentialValues pv = extract_potential_values(entry, provider, prompts);

    EnrichOutcome outcome;
    std::vector<std::string> ids = pool.ids_for_path(url);
    if (ids.empty()) {
        for (const auto& [key, _] : pv.values) outcome.unmatched_keys.push_back(key);
        for (const auto& [key, _] : pv.format_specs) outcome.unmatched_keys.push_back(key);
        return outcome;
    }

    for (const auto& id : ids) {
        const SeedTemplate& tpl = pool.get(id);
        bool touched = false;
        for (const auto& [key, values] : pv.values) {
            if (!tpl.find_field(key)) {
                if (std::find(outcome.unmatched_keys.begin(), outcome.unmatched_keys.end(), key) ==
                    outcome.unmatched_keys.end())
                    outcome.unmatched_keys.push_back(key);
                continue;
            }
            pool.extend_mutation_space(id, key, values);
            touched = true;
        }
        for (const auto& [key, spec] : pv.format_specs) {
            if (!tpl.find_field(key)) {
                if (std::find(outcome.unmatched_keys.begin(), outcome.unmatched_keys.end(), key) ==
                    outcome.unmatched_keys.end())
                    outcome.unmatched_keys.push_back(key);
                continue;
            }
            pool.extend_mutation_space(id, key, {instantiate_format(spec)});
            touched = true;
        }
        if (touched) outcome.enriched_ids.push_back(id);
    }
    return outcome;
}

}  // namespace httpfuzz
