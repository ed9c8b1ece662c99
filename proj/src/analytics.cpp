#include "quantclaw/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "quantclaw/errors.hpp"

namespace quantclaw::profile {

double relative_degradation(double high_score, double low_score, std::string_view label) {
    if (!(high_score > 0.0)) {
        std::string who = label.empty() ? std::string("profile") : "profile '" + std::string(label) + "'";
        throw Error(ErrorKind::Domain,
                    who + ": high-precision score must be > 0 (got " + std::to_string(high_score) + ")");
    }
    return (high_score - low_score) / high_score;
}

std::string_view to_string(SensitivityGroup group) {
    switch (group) {
        case SensitivityGroup::High: return "High";
        case SensitivityGroup::Moderate: return "Moderate";
        case SensitivityGroup::Low: return "Low";
    }
    return "?";
}

SensitivityGroup parse_group(std::string_view name) {
    if (name == "High") return SensitivityGroup::High;
    if (name == "Moderate") return SensitivityGroup::Moderate;
    if (name == "Low") return SensitivityGroup::Low;
    throw Error(ErrorKind::Validation, "unknown sensitivity group '" + std::string(name) + "'");
}

void SensitivityThresholds::validate() const {
    if (!(low < high)) {
        throw Error(ErrorKind::Validation, "sensitivity thresholds: low (" + std::to_string(low) +
                                               ") must be below high (" + std::to_string(high) + ")");
    }
}

SensitivityGroup classify_sensitivity(double rel_degradation, const SensitivityThresholds& thresholds) {
    thresholds.validate();
    if (rel_degradation >= thresholds.high) return SensitivityGroup::High;
    if (rel_degradation <= thresholds.low) return SensitivityGroup::Low;
    return SensitivityGroup::Moderate;
}

ScalingFit fit_power_law(std::span<const DegradationPoint> points) {
    ScalingFit fit;
    std::vector<DegradationPoint> used;
    for (const auto& p : points) {
        if (!(p.n_params_b > 0.0)) {
            throw Error(ErrorKind::Domain, "point '" + p.model_id + "': model size must be > 0");
        }
        if (p.delta > 0.0) {
            used.push_back(p);
        } else {
            fit.excluded.push_back(p);
        }
    }

    auto describe_excluded = [&fit] {
        std::string s;
        for (const auto& p : fit.excluded) {
            if (!s.empty()) s += ", ";
            s += p.model_id + " (N=" + std::to_string(p.n_params_b) + ", delta=" + std::to_string(p.delta) + ")";
        }
        return s.empty() ? std::string("none") : s;
    };

    if (used.size() < 2) {
        throw Error(ErrorKind::InsufficientData,
                    "power-law fit needs at least 2 points with delta > 0; got " + std::to_string(used.size()) +
                        "; excluded: " + describe_excluded());
    }

    // Canonical order so the floating-point sums are identical for any permutation.
    auto key = [](const DegradationPoint& p) { return std::tie(p.n_params_b, p.delta, p.model_id); };
    std::sort(used.begin(), used.end(), [&](const auto& l, const auto& r) { return key(l) < key(r); });
    std::sort(fit.excluded.begin(), fit.excluded.end(), [&](const auto& l, const auto& r) { return key(l) < key(r); });

    const auto n = static_cast<double>(used.size());
    std::vector<double> xs, ys;
    for (const auto& p : used) {
        xs.push_back(std::log(p.n_params_b));
        ys.push_back(std::log(p.delta));
    }
    const double mean_x = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double mean_y = std::accumulate(ys.begin(), ys.end(), 0.0) / n;

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) {
        throw Error(ErrorKind::InsufficientData, "power-law fit needs at least 2 distinct model sizes");
    }

    const double slope = sxy / sxx;
    const double intercept = mean_y - slope * mean_x;

    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (intercept + slope * xs[i]);
        ss_res += r * r;
    }

    fit.a = std::exp(intercept);
    fit.b = slope;
    fit.points_used = used.size();
    if (syy <= 0.0) {
        fit.r_squared = 1.0;  // constant response, fitted exactly by a zero slope
    } else {
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

double predict_delta(const ScalingFit& fit, double n_params_b) {
    if (!(n_params_b > 0.0)) {
        throw Error(ErrorKind::Domain, "predict_delta: model size must be > 0");
    }
    return fit.a * std::pow(n_params_b, fit.b);
}

PricePair discounted_price(const PricePair& high, double discount_factor) {
    if (!(discount_factor > 0.0 && discount_factor <= 1.0)) {
        throw Error(ErrorKind::Validation,
                    "discount factor must be in (0, 1], got " + std::to_string(discount_factor));
    }
    return {high.input_per_mtok * discount_factor, high.output_per_mtok * discount_factor};
}

PricePair discounted_price(const PricingRule& rule) { return discounted_price(rule.high, rule.discount_factor); }

double request_cost(std::uint64_t tokens_in, std::uint64_t tokens_out, const PricePair& prices) {
    constexpr double kPerToken = 1e-6;
    return static_cast<double>(tokens_in) * prices.input_per_mtok * kPerToken +
           static_cast<double>(tokens_out) * prices.output_per_mtok * kPerToken;
}

double throughput_gain(const ThroughputRow& row) {
    if (!(row.input_len > 0 && row.output_len > 0 && row.high_tps > 0 && row.low_tps > 0)) {
        throw Error(ErrorKind::Validation, "throughput row fields must all be > 0");
    }
    return (row.low_tps - row.high_tps) / row.high_tps;
}

double average_throughput_gain(std::span<const ThroughputRow> rows) {
    if (rows.empty()) {
        throw Error(ErrorKind::InsufficientData, "average throughput gain needs at least one row");
    }
    std::vector<double> gains;
    gains.reserve(rows.size());
    for (const auto& r : rows) gains.push_back(throughput_gain(r));
    std::sort(gains.begin(), gains.end());
    return std::accumulate(gains.begin(), gains.end(), 0.0) / static_cast<double>(gains.size());
}

double slo_pass_rate(std::span<const LatencySample> samples, double ttft_limit_ms, double tpot_limit_ms) {
    if (!(ttft_limit_ms > 0.0 && tpot_limit_ms > 0.0)) {
        throw Error(ErrorKind::Validation, "SLO limits must be > 0");
    }
    if (samples.empty()) {
        throw Error(ErrorKind::InsufficientData, "SLO pass rate needs at least one sample");
    }
    const auto passing = std::count_if(samples.begin(), samples.end(), [&](const LatencySample& s) {
        return s.ttft_ms <= ttft_limit_ms && s.tpot_ms <= tpot_limit_ms;
    });
    return static_cast<double>(passing) / static_cast<double>(samples.size());
}

double relative_reduction(double baseline, double value) {
    if (!(baseline > 0.0)) {
        throw Error(ErrorKind::Domain, "relative reduction needs a positive baseline");
    }
    return (baseline - value) / baseline;
}

}  // namespace quantclaw::profile
