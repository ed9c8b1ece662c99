#include "quantclaw/routing.hpp"

#include <algorithm>

#include "quantclaw/errors.hpp"

namespace quantclaw::routing {

using nlohmann::json;
using profile::SensitivityGroup;

std::string_view to_string(RoutingMode mode) {
    return mode == RoutingMode::LatencyOriented ? "LatencyOriented" : "CostOriented";
}

RoutingMode parse_mode(std::string_view name) {
    if (name == "LatencyOriented" || name == "latency") return RoutingMode::LatencyOriented;
    if (name == "CostOriented" || name == "cost") return RoutingMode::CostOriented;
    throw Error(ErrorKind::Validation, "unknown routing mode '" + std::string(name) + "'");
}

std::string_view to_string(Rationale r) {
    switch (r) {
        case Rationale::OverrideRule: return "OverrideRule";
        case Rationale::HighSensitivity: return "HighSensitivity";
        case Rationale::LowSensitivity: return "LowSensitivity";
        case Rationale::ModeEvaluation: return "ModeEvaluation";
        case Rationale::NoProfileDefault: return "NoProfileDefault";
    }
    return "?";
}

Rationale parse_rationale(std::string_view name) {
    for (auto r : {Rationale::OverrideRule, Rationale::HighSensitivity, Rationale::LowSensitivity,
                   Rationale::ModeEvaluation, Rationale::NoProfileDefault}) {
        if (to_string(r) == name) return r;
    }
    throw Error(ErrorKind::Validation, "unknown rationale '" + std::string(name) + "'");
}

void PolicyConfig::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v < 1.0)) {
            throw Error(ErrorKind::Validation, std::string("policy.") + name + ": must be in [0, 1), got " +
                                                   std::to_string(v));
        }
    };
    check(epsilon_score, "epsilon_score");
    check(tau_latency, "tau_latency");
    check(tau_cost, "tau_cost");
}

double mode_gain(const profile::SensitivityProfile& p, RoutingMode mode) {
    const auto& [high, low] = mode == RoutingMode::LatencyOriented
                                  ? std::pair{p.high.latency_s, p.low.latency_s}
                                  : std::pair{p.high.cost_usd, p.low.cost_usd};
    if (!(high > 0.0)) return 0.0;
    return (high - low) / high;
}

PrecisionChoice decide(std::string_view category, const profile::ProfileSet& profiles, RoutingMode mode,
                       const PolicyConfig& policy, const PrecisionTiers& tiers) {
    const auto* p = profiles.find(category);
    PrecisionChoice choice;
    if (p != nullptr) {
        choice.expected_rel_score_drop = p->rel_degradation;
        choice.expected_rel_gain = mode_gain(*p, mode);
    }

    if (auto it = policy.overrides.find(std::string(category)); it != policy.overrides.end()) {
        choice.precision = it->second;
        choice.rationale = Rationale::OverrideRule;
        return choice;
    }
    if (p == nullptr) {
        choice.precision = tiers.highest;
        choice.rationale = Rationale::NoProfileDefault;
        return choice;
    }
    switch (p->group) {
        case SensitivityGroup::High:
            choice.precision = tiers.highest;
            choice.rationale = Rationale::HighSensitivity;
            break;
        case SensitivityGroup::Low:
            choice.precision = tiers.lowest;
            choice.rationale = Rationale::LowSensitivity;
            break;
        case SensitivityGroup::Moderate: {
            const double tau = mode == RoutingMode::LatencyOriented ? policy.tau_latency : policy.tau_cost;
            const bool go_low = choice.expected_rel_score_drop <= policy.epsilon_score && choice.expected_rel_gain >= tau;
            choice.precision = go_low ? tiers.lowest : tiers.highest;
            choice.rationale = Rationale::ModeEvaluation;
            break;
        }
    }
    return choice;
}

json to_json(const RoutingDecision& d) {
    return {{"request_id", d.request_id},
            {"task_category", d.task_category},
            {"stage", detection::to_string(d.stage)},
            {"detection_confidence", d.detection_confidence},
            {"precision", to_string(d.precision)},
            {"bits", bit_width(d.precision)},
            {"variant_id", d.variant_id.empty() ? json(nullptr) : json(d.variant_id)},
            {"mode", to_string(d.mode)},
            {"rationale", to_string(d.rationale)},
            {"expected_rel_score_drop", d.expected_rel_score_drop},
            {"expected_rel_gain", d.expected_rel_gain},
            {"timestamp_ms", d.timestamp_ms},
            {"requested_model", d.requested_model}};
}

RoutingDecision decision_from_json(const json& j) {
    try {
        RoutingDecision d;
        d.request_id = j.at("request_id").get<std::string>();
        d.task_category = j.at("task_category").get<std::string>();
        d.stage = detection::parse_stage(j.at("stage").get<std::string>());
        d.detection_confidence = j.value("detection_confidence", 0.0);
        d.precision = parse_precision(j.at("precision").get<std::string>());
        if (j.contains("variant_id") && !j.at("variant_id").is_null()) d.variant_id = j.at("variant_id").get<std::string>();
        d.mode = parse_mode(j.at("mode").get<std::string>());
        d.rationale = parse_rationale(j.at("rationale").get<std::string>());
        d.expected_rel_score_drop = j.value("expected_rel_score_drop", 0.0);
        d.expected_rel_gain = j.value("expected_rel_gain", 0.0);
        d.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
        d.requested_model = j.value("requested_model", std::string());
        return d;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("routing decision: ") + e.what());
    }
}

RoutingControl::RoutingControl(RoutingSnapshot initial, detection::CategoryRegistry registry,
                               std::vector<PrecisionLevel> pool_levels)
    : registry_(std::move(registry)), pool_levels_(std::move(pool_levels)) {
    if (pool_levels_.empty()) throw Error(ErrorKind::Validation, "pool: no precision levels available");
    tiers_.highest = *std::max_element(pool_levels_.begin(), pool_levels_.end(),
                                       [](auto a, auto b) { return bit_width(a) < bit_width(b); });
    tiers_.lowest = *std::min_element(pool_levels_.begin(), pool_levels_.end(),
                                      [](auto a, auto b) { return bit_width(a) < bit_width(b); });
    if (!initial.profiles || !initial.rules) throw Error(ErrorKind::Validation, "routing: profiles and rules required");
    initial.policy.validate();
    for (const auto& [category, level] : initial.policy.overrides) {
        if (!registry_.contains(category)) {
            throw Error(ErrorKind::Validation, "policy.overrides: category '" + category + "' is not registered");
        }
        if (std::find(pool_levels_.begin(), pool_levels_.end(), level) == pool_levels_.end()) {
            throw Error(ErrorKind::Validation, "policy.overrides." + category + ": precision " +
                                                   std::string(quantclaw::to_string(level)) + " is not in the pool");
        }
    }
    current_ = std::make_shared<const RoutingSnapshot>(std::move(initial));
}

std::shared_ptr<const RoutingSnapshot> RoutingControl::snapshot() const {
    std::lock_guard lock(pointer_mutex_);
    return current_;
}

template <typename Mutator>
void RoutingControl::mutate(Mutator&& m) {
    std::lock_guard writer(writer_mutex_);
    auto next = std::make_shared<RoutingSnapshot>(*snapshot());
    m(*next);
    ++next->version;
    std::lock_guard lock(pointer_mutex_);
    current_ = std::move(next);
}

void RoutingControl::set_mode(RoutingMode mode) {
    mutate([&](RoutingSnapshot& s) { s.mode = mode; });
}

void RoutingControl::set_override(std::string_view category, std::optional<PrecisionLevel> precision) {
    const auto id = detection::normalize_category_id(category);
    if (!registry_.contains(id)) {
        throw Error(ErrorKind::Validation, "override: category '" + id + "' is not registered");
    }
    if (precision && std::find(pool_levels_.begin(), pool_levels_.end(), *precision) == pool_levels_.end()) {
        throw Error(ErrorKind::Validation,
                    "override: precision " + std::string(quantclaw::to_string(*precision)) + " is not in the pool");
    }
    mutate([&](RoutingSnapshot& s) {
        if (precision) {
            s.policy.overrides[id] = *precision;
        } else {
            s.policy.overrides.erase(id);
        }
    });
}

void RoutingControl::replace_data(std::shared_ptr<const profile::ProfileSet> profiles,
                                  std::shared_ptr<const detection::RuleSet> rules) {
    if (!profiles || !rules) throw Error(ErrorKind::Validation, "routing: profiles and rules required");
    mutate([&](RoutingSnapshot& s) {
        s.profiles = std::move(profiles);
        s.rules = std::move(rules);
    });
}

PrecisionLevel RoutingControl::resolve_precision(std::string_view text) const {
    if (const int bits = parse_tier_label(text); bits != 0) {
        for (auto level : pool_levels_) {
            if (bit_width(level) == bits) return level;
        }
        throw Error(ErrorKind::Validation, "precision " + std::string(text) + " is not in the pool");
    }
    const auto level = parse_precision(text);
    if (std::find(pool_levels_.begin(), pool_levels_.end(), level) == pool_levels_.end()) {
        throw Error(ErrorKind::Validation, "precision " + std::string(text) + " is not in the pool");
    }
    return level;
}

}  // namespace quantclaw::routing
