#pragma once

// Precision routing: maps a detected task category to a precision tier using the
// sensitivity profiles, the active mode and operator overrides.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quantclaw/detection.hpp"
#include "quantclaw/precision.hpp"
#include "quantclaw/profiles.hpp"

namespace quantclaw::routing {

enum class RoutingMode { LatencyOriented, CostOriented };

std::string_view to_string(RoutingMode mode);
/// Accepts "LatencyOriented"/"latency" and "CostOriented"/"cost".
RoutingMode parse_mode(std::string_view name);

enum class Rationale { OverrideRule, HighSensitivity, LowSensitivity, ModeEvaluation, NoProfileDefault };

std::string_view to_string(Rationale r);
Rationale parse_rationale(std::string_view name);

struct PolicyConfig {
    double epsilon_score = 0.01;  // max acceptable relative score drop
    double tau_latency = 0.05;    // min relative latency reduction
    double tau_cost = 0.05;       // min relative cost reduction
    std::map<std::string, PrecisionLevel> overrides;

    /// Range checks only; override targets are checked against the registry and pool by RoutingControl.
    void validate() const;
};

/// Highest and lowest precision the serving pool offers.
struct PrecisionTiers {
    PrecisionLevel highest = PrecisionLevel::BF16;
    PrecisionLevel lowest = PrecisionLevel::NVFP4;
};

struct PrecisionChoice {
    PrecisionLevel precision = PrecisionLevel::BF16;
    Rationale rationale = Rationale::NoProfileDefault;
    double expected_rel_score_drop = 0.0;
    double expected_rel_gain = 0.0;  // latency or cost, per mode

    bool operator==(const PrecisionChoice&) const = default;
};

/// Relative latency or cost reduction of the low arm; 0 when the high arm's metric is not positive.
double mode_gain(const profile::SensitivityProfile& p, RoutingMode mode);

/// Precedence: override, High group, Low group, Moderate via mode evaluation,
/// and the highest tier when the category has no profile. Total and deterministic.
PrecisionChoice decide(std::string_view category, const profile::ProfileSet& profiles, RoutingMode mode,
                       const PolicyConfig& policy, const PrecisionTiers& tiers);

struct RoutingDecision {
    std::string request_id;
    std::string task_category;
    detection::DetectionStage stage = detection::DetectionStage::Fallback;
    double detection_confidence = 0.0;
    PrecisionLevel precision = PrecisionLevel::BF16;
    std::string variant_id;  // empty when no variant could be selected
    RoutingMode mode = RoutingMode::LatencyOriented;
    Rationale rationale = Rationale::NoProfileDefault;
    double expected_rel_score_drop = 0.0;
    double expected_rel_gain = 0.0;
    std::int64_t timestamp_ms = 0;
    std::string requested_model;
};

nlohmann::json to_json(const RoutingDecision& d);
RoutingDecision decision_from_json(const nlohmann::json& j);

/// Immutable per-request view of everything routing depends on.
struct RoutingSnapshot {
    std::shared_ptr<const profile::ProfileSet> profiles;
    std::shared_ptr<const detection::RuleSet> rules;
    RoutingMode mode = RoutingMode::LatencyOriented;
    PolicyConfig policy;
    std::uint64_t version = 0;
};

/// Holds the current snapshot. Readers copy a shared_ptr; writers build a new snapshot
/// and swap it in whole, so a reader never sees a mix of old and new state.
class RoutingControl {
public:
    RoutingControl(RoutingSnapshot initial, detection::CategoryRegistry registry, std::vector<PrecisionLevel> pool_levels);

    std::shared_ptr<const RoutingSnapshot> snapshot() const;

    void set_mode(RoutingMode mode);
    /// nullopt clears. Throws Error(Validation) for unregistered categories or
    /// precisions the pool does not serve.
    void set_override(std::string_view category, std::optional<PrecisionLevel> precision);
    void replace_data(std::shared_ptr<const profile::ProfileSet> profiles,
                      std::shared_ptr<const detection::RuleSet> rules);

    /// Maps "16-bit"-style tier labels or format names onto a level the pool serves.
    PrecisionLevel resolve_precision(std::string_view text) const;

    const detection::CategoryRegistry& registry() const { return registry_; }
    PrecisionTiers tiers() const { return tiers_; }

private:
    template <typename Mutator>
    void mutate(Mutator&& m);

    detection::CategoryRegistry registry_;
    std::vector<PrecisionLevel> pool_levels_;
    PrecisionTiers tiers_;
    mutable std::mutex pointer_mutex_;  // guards current_ only for the pointer copy
    std::mutex writer_mutex_;
    std::shared_ptr<const RoutingSnapshot> current_;
};

}  // namespace quantclaw::routing
