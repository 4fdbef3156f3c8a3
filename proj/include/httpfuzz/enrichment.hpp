#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "httpfuzz/llm_provider.hpp"
#include "httpfuzz/template_store.hpp"

namespace httpfuzz {

class UnreadableDirectory : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AllOutputsInvalid : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RoutingMode { TableBased, FileBased };

/// One statically-extracted route handler: URL, handler name and its
/// decompiled C-like source.
struct RouteCodeEntry {
    std::string url;
    std::string function_name;
    std::string code;
    RoutingMode routing_mode = RoutingMode::TableBased;
};

struct IngestResult {
    std::vector<RouteCodeEntry> entries;
    std::vector<std::string> warnings;  // skipped files with the reason
};

/// Reads `routes/*.json` fixtures ({url, function_name, code, routing_mode}).
IngestResult ingest_static_analysis(const std::filesystem::path& dir);

/// Candidate assignments per request parameter, plus scanf-style format
/// constraints, both extracted from the handler code.
struct PotentialValues {
    std::map<std::string, std::vector<std::string>> values;
    std::map<std::string, std::string> format_specs;
};

/// Type-0 (with reference packet) / Type-1 (code only) packet generation.
/// Provider chunks that do not parse are dropped, never repaired.
std::vector<RawHttpRequest> generate_packets(const RouteCodeEntry& entry,
                                             const std::optional<RawHttpRequest>& reference,
                                             LlmProvider& provider, const PromptLibrary& prompts);

PotentialValues extract_potential_values(const RouteCodeEntry& entry, LlmProvider& provider,
                                         const PromptLibrary& prompts);

/// A concrete value satisfying a scanf-like format spec such as "%d:%d:%s".
std::string instantiate_format(const std::string& format_spec);

struct EnrichOutcome {
    std::vector<std::string> enriched_ids;
    std::vector<std::string> unmatched_keys;  // code parameters with no template field
};

/// Field value enrichment: extracts potential values for `entry` and extends
/// the mutation spaces of every template registered under `url`. Returns the
/// enriched template ids (empty when no template matches).
EnrichOutcome field_enrich(const RouteCodeEntry& entry, const std::string& url,
                           TemplatePool& pool, LlmProvider& provider,
                           const PromptLibrary& prompts);

}  // namespace httpfuzz
