#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "httpfuzz/template_store.hpp"

namespace httpfuzz {

class IncompatibleOperator : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MutationOperator { Boundary, ContextPick, SpecialChars, DictionaryInject, Havoc };

std::string to_string(MutationOperator op);

/// Payload lists grouped by section headers in the dictionary file.
/// Command-injection payloads must carry the {MARKER} placeholder.
struct MutationDictionary {
    std::vector<std::string> command_injection;
    std::vector<std::string> buffer_overflow;
    std::vector<std::string> integer_overflow;
    std::vector<std::string> path_traversal;
    std::vector<std::string> special_characters;  // multi-byte sequences beyond \0 \n \r \t

    static MutationDictionary load(const std::filesystem::path& file);
};

struct PlannedEdit {
    std::string field;
    MutationOperator op = MutationOperator::Havoc;
    std::string payload;  // the new field value (before region escaping)
};

struct MutationPlan {
    std::string template_id;
    std::vector<PlannedEdit> edits;
    std::string marker;  // campaign-scoped, embedded in injection payloads
    bool command_payload = false;
};

struct Mutant {
    RawHttpRequest request;
    MutationPlan plan;
};

/// Single-operator contract; encoded value types must be decoded first.
std::string apply_operator(std::string_view value, ValueType type, MutationOperator op,
                           const std::vector<std::string>& mutation_space,
                           const MutationDictionary& dict, std::string_view marker,
                           std::mt19937_64& rng);

/// Normalized operator weights for one field. ContextPick weight is positive
/// iff the field has candidate values.
std::map<MutationOperator, double> schedule_operators(const SeedTemplate& tpl,
                                                      const FieldDescriptor& field);

/// Produces one concrete test request from a template. Deterministic in
/// (template, rng_seed, dictionary, marker). Templates without fields are
/// returned unmodified.
Mutant mutate(const SeedTemplate& tpl, std::uint64_t rng_seed, const MutationDictionary& dict,
              std::string marker);

}  // namespace httpfuzz
