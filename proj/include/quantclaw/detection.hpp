#pragma once

// Task detection: a keyword/structural-cue rule engine with a pluggable classifier
// behind it. The hybrid detector always yields a label.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace quantclaw::detection {

inline constexpr std::string_view kUnknownCategory = "unknown";

/// Lowercase, trimmed form used for every category id.
std::string normalize_category_id(std::string_view id);

class CategoryRegistry {
public:
    /// Ids are normalized; throws Error(Validation) on empty or duplicate ids.
    explicit CategoryRegistry(std::vector<std::string> ids);

    /// code, compliance, terminal, safety, rewriting, content-generation, research,
    /// comprehension, retrieval, analysis, unknown.
    static CategoryRegistry defaults();

    bool contains(std::string_view id) const;
    const std::vector<std::string>& ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
};

enum class StructuralCue { CodeFence, ShellPrompt, QuestionForm, Url, InlineCode };

std::string_view to_string(StructuralCue cue);
StructuralCue parse_cue(std::string_view name);
bool cue_matches(StructuralCue cue, std::string_view query);

struct DetectionRule {
    std::string id;
    std::string category;
    std::vector<std::string> keyword_patterns;  // literal words/phrases; '*' and '?' wildcards per word
    std::vector<StructuralCue> structural_cues;
    int priority = 0;
    int min_hits = 1;
};

/// Validated rules, held in descending priority order.
class RuleSet {
public:
    RuleSet() = default;
    RuleSet(std::vector<DetectionRule> rules, const CategoryRegistry& registry);

    const std::vector<DetectionRule>& rules() const { return rules_; }

    static RuleSet from_json(const nlohmann::json& j, const CategoryRegistry& registry);
    nlohmann::json to_json() const;

private:
    std::vector<DetectionRule> rules_;
};

RuleSet load_rules(const std::filesystem::path& path, const CategoryRegistry& registry);

enum class DetectionStage { Rule, Classifier, Fallback };

std::string_view to_string(DetectionStage stage);
DetectionStage parse_stage(std::string_view name);

struct DetectionResult {
    std::string category;
    double confidence = 0.0;
    DetectionStage stage = DetectionStage::Fallback;
    std::optional<std::string> rule_id;  // set for Rule results
    double elapsed_s = 0.0;
};

nlohmann::json to_json(const DetectionResult& r);
DetectionResult detection_result_from_json(const nlohmann::json& j);

/// Number of keyword patterns and cues of `rule` that match `query`.
int count_rule_hits(const DetectionRule& rule, std::string_view query);

/// First rule (by descending priority) reaching its min_hits, or nothing.
std::optional<DetectionResult> rule_detect(std::string_view query, const RuleSet& rules);

struct ClassifierLabel {
    std::string category;
    double confidence = 0.0;
};

/// Model-backed detector. Implementations throw Error(DetectionBackend) when the
/// backend is unreachable or times out and Error(Protocol) on malformed replies.
class ClassifierClient {
public:
    virtual ~ClassifierClient() = default;
    virtual ClassifierLabel label(std::string_view query) = 0;
};

/// Embedding endpoint used by the centroid classifier.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<double> embed(std::string_view text) = 0;
};

/// Throws Error(Protocol) when the client names a category outside the registry.
DetectionResult classifier_detect(std::string_view query, ClassifierClient& client, const CategoryRegistry& registry);

/// rule_detect, then the classifier, then `fallback_category` with confidence 0.
/// `client` may be null (rules plus fallback only). Never throws on backend failure.
DetectionResult hybrid_detect(std::string_view query, const RuleSet& rules, ClassifierClient* client,
                              const CategoryRegistry& registry, std::string_view fallback_category);

}  // namespace quantclaw::detection
