#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "httpfuzz/http_model.hpp"
#include "httpfuzz/llm_provider.hpp"

namespace httpfuzz {

/// Marker token wrapping mutable spans in annotated requests.
inline constexpr std::string_view kMarker = "$##$";

class UnbalancedMarkers : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MismatchedSource : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ValueType { Int, Str, Base32, Base64, UrlEncoded, HexEncoded };

std::string to_string(ValueType t);
ValueType value_type_from_string(std::string_view s);

/// Total classifier: Int, then valid percent-escapes, then the encoded
/// alphabets with length constraints, falling back to Str.
ValueType classify_value(std::string_view value);

struct FieldDescriptor {
    std::string name;
    ParamLocation location;
    ValueType value_type = ValueType::Str;
    std::size_t offset = 0;  // span into the unannotated request bytes
    std::size_t length = 0;
    std::string current_value;
};

struct AnnotatedRequest {
    std::string header_annotated;   // request line + headers + blank line
    std::string content_annotated;  // body
    std::vector<FieldDescriptor> fields;
    RawHttpRequest source;

    std::string annotated_bytes() const { return header_annotated + content_annotated; }
};

std::string strip_markers(std::string_view annotated);
bool markers_balanced(std::string_view annotated);

/// Builds the two annotated strings from a field list; fields must be sorted,
/// non-overlapping, and must not straddle the header/body boundary.
AnnotatedRequest make_annotated(const RawHttpRequest& req, std::vector<FieldDescriptor> fields);

class AnnotationProvider {
public:
    virtual ~AnnotationProvider() = default;
    virtual AnnotatedRequest annotate(const RawHttpRequest& req) const = 0;
};

/// Deterministic annotator covering the standard grammars: key-value query
/// strings and form bodies, JSON, XML, multipart, path segments, cookies and
/// non-structural header values.
class RuleBasedAnnotator : public AnnotationProvider {
public:
    struct Result {
        AnnotatedRequest annotated;
        std::vector<std::size_t> composite_fields;  // indexes of values the rules cannot decompose
    };
    Result annotate_with_hints(const RawHttpRequest& req) const;
    AnnotatedRequest annotate(const RawHttpRequest& req) const override;
};

/// Annotates via two provider calls (header prompt + content prompt) and
/// validates the marker grammar of each completion.
class LlmAnnotator : public AnnotationProvider {
public:
    LlmAnnotator(LlmProvider& provider, const PromptLibrary& prompts);
    AnnotatedRequest annotate(const RawHttpRequest& req) const override;

private:
    LlmProvider& provider_;
    const PromptLibrary& prompts_;
};

/// Rule-based pass first; composite custom values are handed to the LLM for
/// sub-value splitting. Provider failures fall back to the rule result.
class PipelineAnnotator : public AnnotationProvider {
public:
    PipelineAnnotator(LlmProvider* provider, const PromptLibrary* prompts);
    AnnotatedRequest annotate(const RawHttpRequest& req) const override;

private:
    RuleBasedAnnotator rule_;
    LlmProvider* provider_;  // may be null: rule-only
    const PromptLibrary* prompts_;
};

struct AnnotationMetrics {
    double false_negative_rate = 0.0;
    double false_positive_rate = 0.0;
};

/// Span-level comparison of a predicted annotation against ground truth over
/// the same source request.
AnnotationMetrics measure_annotation(const AnnotatedRequest& predicted,
                                     const AnnotatedRequest& truth);

/// Reads a `.truth` sidecar (tab-separated: name, location, type, offset,
/// length) into an AnnotatedRequest over `req`.
AnnotatedRequest load_truth_annotation(const RawHttpRequest& req,
                                       const std::filesystem::path& truth_file);

}  // namespace httpfuzz
