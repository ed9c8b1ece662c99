#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "quantclaw/pool.hpp"
#include "quantclaw/routing.hpp"

namespace quantclaw::config {

struct ClassifierSettings {
    std::string kind = "centroid";            // centroid | label | none
    std::string embedding = "hashing";        // hashing | http (centroid only)
    std::size_t hashing_dims = 256;
    std::string endpoint;                     // http embedding or label endpoint
    std::string model;
    std::filesystem::path seeds_path;
    std::chrono::milliseconds timeout{500};
};

struct GatewayConfig {
    std::filesystem::path source;

    std::string host = "127.0.0.1";
    int port = 8080;

    std::vector<std::string> categories;
    std::filesystem::path rules_path;
    ClassifierSettings classifier;
    std::string fallback_category = "unknown";

    std::filesystem::path profiles_path;
    routing::RoutingMode mode = routing::RoutingMode::LatencyOriented;
    routing::PolicyConfig policy;                       // overrides resolved at boot
    std::map<std::string, std::string> override_specs;  // category -> "16-bit" / "BF16"

    std::vector<pool::ModelVariant> variants;
    std::chrono::milliseconds probe_interval{5000};
    std::chrono::milliseconds probe_timeout{1000};
    std::string probe_path = "/health";
    std::chrono::milliseconds forward_timeout{30000};
    std::string upstream_bearer_token;
    std::uint64_t default_max_tokens = 1024;

    std::filesystem::path journal_path;  // empty: memory only
    std::uint64_t journal_max_bytes = 64ull * 1024 * 1024;

    std::string admin_token;
};

/// Parses a config object. Relative paths resolve against `base_dir`. Every error
/// names the offending field ("pool.variants[1].precision: ...").
GatewayConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Loads and validates; referenced files must exist.
GatewayConfig load_config(const std::filesystem::path& path);

}  // namespace quantclaw::config
