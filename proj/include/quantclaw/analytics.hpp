#pragma once

// Quantitative analytics over precision benchmark data: degradation, sensitivity
// grouping, log-log scaling fits, token pricing and throughput/SLO statistics.
// Every function here is pure.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quantclaw::profile {

/// (high - low) / high. Negative when the low-precision variant scored higher.
/// Throws Error(Domain) naming `label` when high_score <= 0.
double relative_degradation(double high_score, double low_score, std::string_view label = {});

enum class SensitivityGroup { High, Moderate, Low };

std::string_view to_string(SensitivityGroup group);
SensitivityGroup parse_group(std::string_view name);

struct SensitivityThresholds {
    double low = 0.005;   // at or below: Low
    double high = 0.02;   // at or above: High

    void validate() const;
};

SensitivityGroup classify_sensitivity(double rel_degradation, const SensitivityThresholds& thresholds);

struct DegradationPoint {
    std::string model_id;
    double n_params_b = 0.0;  // billions of parameters
    double delta = 0.0;       // score gap
};

struct ScalingFit {
    double a = 0.0;  // prefactor
    double b = 0.0;  // exponent
    double r_squared = 0.0;
    std::size_t points_used = 0;
    std::vector<DegradationPoint> excluded;  // non-positive deltas, kept out of the log domain
};

/// Ordinary least squares on (ln N, ln delta). Points with delta <= 0 are excluded and
/// reported. The result does not depend on the input order.
ScalingFit fit_power_law(std::span<const DegradationPoint> points);

double predict_delta(const ScalingFit& fit, double n_params_b);

/// Dollars per million tokens.
struct PricePair {
    double input_per_mtok = 0.0;
    double output_per_mtok = 0.0;

    bool operator==(const PricePair&) const = default;
};

struct PricingRule {
    PricePair high;
    double discount_factor = 1.0;  // in (0, 1]
};

PricePair discounted_price(const PricingRule& rule);
PricePair discounted_price(const PricePair& high, double discount_factor);

/// tokens_in * input rate + tokens_out * output rate, in dollars.
double request_cost(std::uint64_t tokens_in, std::uint64_t tokens_out, const PricePair& prices);

struct ThroughputRow {
    double input_len = 0.0;
    double output_len = 0.0;
    double high_tps = 0.0;
    double low_tps = 0.0;
};

/// (low_tps - high_tps) / high_tps for one row.
double throughput_gain(const ThroughputRow& row);

/// Unweighted mean of per-row gains. Throws Error(InsufficientData) on an empty list.
double average_throughput_gain(std::span<const ThroughputRow> rows);

struct LatencySample {
    double ttft_ms = 0.0;
    double tpot_ms = 0.0;
};

inline constexpr double kSloRequiredPassRate = 0.90;

/// Fraction of samples meeting both limits.
double slo_pass_rate(std::span<const LatencySample> samples, double ttft_limit_ms, double tpot_limit_ms);

inline bool meets_slo(double pass_rate) { return pass_rate >= kSloRequiredPassRate; }

/// (baseline - value) / baseline; used for cost and latency savings.
double relative_reduction(double baseline, double value);

}  // namespace quantclaw::profile
