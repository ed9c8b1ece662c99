#pragma once

// Registry of upstream model variants with health tracking and request forwarding.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quantclaw/analytics.hpp"
#include "quantclaw/precision.hpp"

namespace quantclaw::pool {

enum class Health { Healthy, Degraded, Down };

std::string_view to_string(Health h);

enum class ProbeOutcome { Success, ErrorStatus, Timeout, Refused };

std::string_view to_string(ProbeOutcome o);

/// Health after a probe. The result depends only on the outcome: Success is Healthy,
/// ErrorStatus (non-2xx reply) and Timeout are Degraded, Refused is Down.
Health next_health(Health current, ProbeOutcome outcome);

struct ModelVariant {
    std::string variant_id;
    std::string model_id;
    PrecisionLevel precision = PrecisionLevel::BF16;
    std::string endpoint_url;  // scheme://host:port[/path]; path defaults to /v1/chat/completions
    profile::PricePair prices;
};

struct VariantStatus {
    ModelVariant variant;
    Health health = Health::Healthy;
    std::int64_t last_probe_ms = 0;  // 0 = never probed
};

struct UpstreamResult {
    std::string response_body;
    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    bool tokens_estimated = false;
    double ttft_s = 0.0;
    double total_latency_s = 0.0;
    int upstream_status = 0;
};

nlohmann::json to_json(const UpstreamResult& r);

/// Whitespace-delimited word count times 1.3, rounded up.
std::uint64_t estimate_tokens(std::string_view text);

/// Fires on every health change: (variant_id, old, new, reason).
using HealthListener = std::function<void(const std::string&, Health, Health, const std::string&)>;

struct ForwardOptions {
    std::chrono::milliseconds timeout{30000};
    std::string bearer_token;  // passed through to the upstream when non-empty
};

class ModelPool {
public:
    ModelPool() = default;

    /// Throws Error(Validation) on duplicate variant ids or duplicate (model, precision).
    void register_variant(ModelVariant v);
    bool remove_variant(std::string_view variant_id);

    std::vector<VariantStatus> list() const;
    std::optional<VariantStatus> find(std::string_view variant_id) const;
    std::vector<PrecisionLevel> precision_levels() const;

    /// Exact precision first, then the nearest higher bit width; Down variants never
    /// qualify; lowest variant id among equals. Throws Error(PoolExhausted).
    ModelVariant select_variant(PrecisionLevel precision) const;

    /// The highest-precision variant's prices (baseline for savings accounting).
    profile::PricePair baseline_prices() const;

    void set_health(std::string_view variant_id, Health health, const std::string& reason);
    void set_listener(HealthListener listener);

    /// POSTs `payload` to the variant. Timeout marks it Degraded and throws
    /// Error(UpstreamTimeout); refusal marks it Down and throws Error(UpstreamDown);
    /// a malformed body throws Error(Protocol) without touching health; a non-2xx
    /// status throws Error(UpstreamStatus).
    UpstreamResult forward(const ModelVariant& variant, const nlohmann::json& payload, const ForwardOptions& options);

    /// GET <endpoint origin><probe_path> and applies the transition table.
    Health probe_health(std::string_view variant_id, std::chrono::milliseconds timeout,
                        const std::string& probe_path = "/health");

private:
    void transition(const std::string& variant_id, Health next, const std::string& reason);

    mutable std::shared_mutex mutex_;
    std::map<std::string, VariantStatus> variants_;  // ordered by id
    HealthListener listener_;
};

/// Splits "http://host:port/path" into origin and path.
std::pair<std::string, std::string> split_endpoint(std::string_view url, std::string_view default_path);

}  // namespace quantclaw::pool
