#pragma once

// The routing gateway: detect -> decide -> select -> forward, with routing metadata
// in response headers and every decision journaled. Transport-independent; the
// HTTP binding lives in http_server.hpp.

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "quantclaw/classifier.hpp"
#include "quantclaw/config.hpp"
#include "quantclaw/pool.hpp"
#include "quantclaw/routing.hpp"
#include "quantclaw/telemetry.hpp"

namespace quantclaw::gateway {

inline constexpr const char* kHeaderTask = "X-QuantClaw-Task";
inline constexpr const char* kHeaderPrecision = "X-QuantClaw-Precision";
inline constexpr const char* kHeaderVariant = "X-QuantClaw-Variant";
inline constexpr const char* kHeaderMode = "X-QuantClaw-Mode";
inline constexpr const char* kHeaderRationale = "X-QuantClaw-Rationale";
inline constexpr const char* kHeaderRequestId = "X-QuantClaw-Request-Id";
inline constexpr const char* kHeaderStage = "X-QuantClaw-Stage";
inline constexpr const char* kHeaderFormat = "X-QuantClaw-Format";
inline constexpr const char* kHeaderOverhead = "X-QuantClaw-Overhead-Ms";

struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::vector<std::pair<std::string, std::string>> headers;

    std::string header(std::string_view name) const;
};

/// Builds the classifier described by the settings; null for kind "none".
std::shared_ptr<detection::ClassifierClient> make_classifier(const config::ClassifierSettings& settings,
                                                             const detection::CategoryRegistry& registry);

class Gateway {
public:
    /// Loads every referenced file and fails with Error(Validation) on any problem,
    /// before anything is served. `classifier` replaces the configured one when set.
    explicit Gateway(config::GatewayConfig cfg, std::shared_ptr<detection::ClassifierClient> classifier = nullptr);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    Reply handle_chat(const std::string& body);
    Reply handle_admin(std::string_view method, std::string_view path, std::string_view authorization,
                       const std::string& body);
    Reply metrics(std::optional<std::uint64_t> from_seq = std::nullopt,
                  std::optional<std::uint64_t> to_seq = std::nullopt) const;
    Reply events(std::uint64_t from_seq, std::size_t limit) const;

    void probe_all();
    void start_probing();
    void stop_probing();

    /// Journals the clean-shutdown event and flushes the journal.
    void shutdown();

    const config::GatewayConfig& config() const { return config_; }
    telemetry::Journal& journal() { return *journal_; }
    const telemetry::Journal& journal() const { return *journal_; }
    pool::ModelPool& model_pool() { return pool_; }
    routing::RoutingControl& routing_control() { return *routing_; }
    const detection::CategoryRegistry& registry() const { return registry_; }

private:
    void journal_event(telemetry::EventKind kind, nlohmann::json payload);
    Reply admin_mutation(std::string_view path, const std::string& body);
    Reply reload();
    nlohmann::json pool_json() const;
    std::string next_request_id();

    config::GatewayConfig config_;
    detection::CategoryRegistry registry_;
    std::shared_ptr<detection::ClassifierClient> classifier_;
    pool::ModelPool pool_;
    std::unique_ptr<routing::RoutingControl> routing_;
    std::unique_ptr<telemetry::Journal> journal_;
    std::mutex admin_mutex_;
    std::atomic<std::uint64_t> request_counter_{0};
    std::int64_t boot_ms_ = 0;

    std::mutex probe_mutex_;
    std::condition_variable probe_cv_;
    bool probing_ = false;
    std::thread probe_thread_;
    std::atomic<bool> shut_down_{false};
};

}  // namespace quantclaw::gateway
