#pragma once

// Replay simulator: compares all-high, all-low and adaptive routing over a workload
// using profile metrics as per-request expectations. Deterministic.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "quantclaw/analytics.hpp"
#include "quantclaw/profiles.hpp"
#include "quantclaw/routing.hpp"

namespace quantclaw::simulate {

struct WorkloadRow {
    std::string category;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
};

/// {"requests": [{category, tokens_in, tokens_out, repeat?}]}; `repeat` expands a row.
std::vector<WorkloadRow> workload_from_json(const nlohmann::json& j);
std::vector<WorkloadRow> load_workload(const std::filesystem::path& path);

struct PolicyTotals {
    std::string policy;
    std::uint64_t requests = 0;
    std::uint64_t routed_low = 0;
    std::uint64_t profiled_requests = 0;  // requests with a profile; score/latency cover only these
    double total_cost_usd = 0.0;
    double total_expected_score = 0.0;
    double total_expected_latency_s = 0.0;

    double avg_cost_usd() const;
    double avg_expected_score() const;
    double avg_expected_latency_s() const;
};

struct SimulationReport {
    routing::RoutingMode mode = routing::RoutingMode::LatencyOriented;
    profile::PricePair high_prices;
    profile::PricePair low_prices;
    PolicyTotals all_high;
    PolicyTotals all_low;
    PolicyTotals adaptive;
    std::vector<std::string> warnings;  // one per unprofiled workload row
    std::map<std::string, std::uint64_t> adaptive_rationales;

    /// Relative reductions of adaptive against all-high; nullopt when all-high is zero.
    std::optional<double> cost_savings() const;
    std::optional<double> latency_savings() const;
};

SimulationReport simulate(std::span<const WorkloadRow> workload, const profile::ProfileSet& profiles,
                          routing::RoutingMode mode, const routing::PolicyConfig& policy,
                          const profile::PricingRule& pricing);

nlohmann::json to_json(const SimulationReport& r);
SimulationReport simulation_report_from_json(const nlohmann::json& j);

}  // namespace quantclaw::simulate
