#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quantclaw/analytics.hpp"
#include "quantclaw/precision.hpp"

namespace quantclaw::profile {

/// Scores are stored in the unit the source dataset uses.
enum class ScoreUnit { Fraction, Percent };

std::string_view to_string(ScoreUnit unit);
ScoreUnit parse_unit(std::string_view name);
double score_upper_bound(ScoreUnit unit);

struct VariantMetrics {
    double score = 0.0;
    double cost_usd = 0.0;   // per task
    double latency_s = 0.0;  // per task
    std::optional<double> best_score;

    void validate(ScoreUnit unit, std::string_view where) const;
};

struct SensitivityProfile {
    std::string task_category;
    VariantMetrics high;
    VariantMetrics low;
    double rel_degradation = 0.0;
    SensitivityGroup group = SensitivityGroup::Moderate;
};

/// Builds a profile, deriving degradation and group from the metrics.
SensitivityProfile make_profile(std::string category, VariantMetrics high, VariantMetrics low,
                                const SensitivityThresholds& thresholds);

struct ProfileSet {
    ScoreUnit unit = ScoreUnit::Fraction;
    SensitivityThresholds thresholds;
    PrecisionLevel high_precision = PrecisionLevel::BF16;
    PrecisionLevel low_precision = PrecisionLevel::NVFP4;
    std::optional<PricingRule> pricing;
    std::vector<SensitivityProfile> tasks;

    const SensitivityProfile* find(std::string_view category) const;
};

/// Parses and validates a profile set. Degradation and group are always recomputed
/// from the metrics; stored values are ignored.
ProfileSet profiles_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProfileSet& set);
ProfileSet load_profiles(const std::filesystem::path& path);

/// One benchmark trial of one task at one precision.
struct TrialRow {
    std::string task;
    PrecisionLevel precision = PrecisionLevel::BF16;
    VariantMetrics metrics;
};

/// Aggregates trials per (task, precision): score/cost/latency means, best score kept
/// separately. Every task must have exactly two arms of different bit widths.
ProfileSet build_profiles(std::span<const TrialRow> rows, ScoreUnit unit, const SensitivityThresholds& thresholds,
                          std::optional<PricingRule> pricing = std::nullopt);

/// Results file: {unit, thresholds?, pricing?, rows:[{task, precision, score, cost_usd, latency_s}]}.
ProfileSet build_profiles_from_results(const nlohmann::json& results);

nlohmann::json to_json(const PricingRule& rule);
PricingRule pricing_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace quantclaw::profile
