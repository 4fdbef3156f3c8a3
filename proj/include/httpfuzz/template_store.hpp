#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "httpfuzz/annotation.hpp"

namespace httpfuzz {

class DuplicateTemplate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownTemplate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownField : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform Beta prior; invocation counts are defined relative to it.
inline constexpr long kPriorAlpha = 1;
inline constexpr long kPriorBeta = 1;

enum class TemplateOrigin { Captured, LlmGeneratedType0, LlmGeneratedType1, MutationPromoted };

std::string to_string(TemplateOrigin o);
TemplateOrigin template_origin_from_string(std::string_view s);

struct SeedTemplate {
    std::string id;
    AnnotatedRequest annotated;
    std::map<std::string, std::vector<std::string>> mutation_space;
    long alpha = kPriorAlpha;
    long beta = kPriorBeta;
    long invocation_count = 0;
    TemplateOrigin origin = TemplateOrigin::Captured;
    double last_score = 0.0;  // derived, persisted for observability only

    /// v_i: total candidate values across all fields.
    long mutation_space_size() const;

    const FieldDescriptor* find_field(std::string_view name) const;
};

class TemplatePool {
public:
    const std::vector<SeedTemplate>& templates() const { return templates_; }
    std::size_t size() const { return templates_.size(); }

    bool exists(const std::string& id) const;
    const SeedTemplate& get(const std::string& id) const;
    SeedTemplate& get_mutable(const std::string& id);

    /// Stores the template with prior stats (unless carry_stats) and returns
    /// its id; duplicates of (annotated bytes, mutation space) are rejected.
    std::string add_template(SeedTemplate tpl, bool carry_stats = false);

    void record_feedback(const std::string& id, bool rewarded);

    /// Appends novel values to a field's candidate list, order-preserving.
    /// Returns the number of genuinely new values.
    std::size_t extend_mutation_space(const std::string& id, const std::string& field,
                                      const std::vector<std::string>& values);

    std::vector<std::string> ids_for_path(std::string_view path) const;

    /// Records a response fingerprint for a route; true when never seen.
    bool note_fingerprint(const std::string& route, const std::string& fingerprint_key);
    bool fingerprint_seen(const std::string& route, const std::string& fingerprint_key) const;

    void save(const std::filesystem::path& file) const;
    static TemplatePool load(const std::filesystem::path& file);

private:
    std::string dedup_key(const SeedTemplate& tpl) const;

    std::vector<SeedTemplate> templates_;
    std::map<std::string, std::size_t> index_;
    std::set<std::string> dedup_;
    std::set<std::pair<std::string, std::string>> seen_fingerprints_;
    long next_id_ = 0;
};

/// Append-only feedback log (JSON lines), replayable to reconstruct stats.
class FeedbackLog {
public:
    explicit FeedbackLog(const std::filesystem::path& file);
    void append(const std::string& id, bool rewarded);

private:
    std::filesystem::path file_;
};

void replay_feedback_log(TemplatePool& pool, const std::filesystem::path& file);

}  // namespace httpfuzz
