#pragma once

// JSON forms of fit inputs/reports and throughput tables.
//
//   points:     {"points": [{"model_id", "n_params_b", "delta"}]}
//   throughput: {"rows": [{"input_len", "output_len", "high_tps", "low_tps"}]}

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "quantclaw/analytics.hpp"

namespace quantclaw::profile {

std::vector<DegradationPoint> points_from_json(const nlohmann::json& j);
std::vector<DegradationPoint> load_points(const std::filesystem::path& path);
nlohmann::json to_json(std::span<const DegradationPoint> points);

nlohmann::json to_json(const ScalingFit& fit);
ScalingFit scaling_fit_from_json(const nlohmann::json& j);

std::vector<ThroughputRow> throughput_from_json(const nlohmann::json& j);
std::vector<ThroughputRow> load_throughput(const std::filesystem::path& path);

}  // namespace quantclaw::profile
