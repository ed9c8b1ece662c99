#pragma once

// Append-only event journal and the aggregates computed from it.
//
// On disk the journal is newline-delimited JSON where every line carries its own
// byte length: "<len> <json>\n". A torn final line is dropped on reopen; damage
// anywhere else is reported. When the file outgrows its size bound it is rotated to
// "<path>.1" and the aggregate of everything rotated out is carried in
// "<path>.carry.json", so replay(path) always reproduces the live snapshot.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "quantclaw/analytics.hpp"

namespace quantclaw::telemetry {

enum class EventKind { Decision, Upstream, Admin, Health };

std::string_view to_string(EventKind kind);
EventKind parse_kind(std::string_view name);

struct TelemetryEvent {
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    EventKind kind = EventKind::Admin;
    nlohmann::json payload;
};

nlohmann::json to_json(const TelemetryEvent& e);
TelemetryEvent event_from_json(const nlohmann::json& j);

/// Exact integer cost of a request in picodollars (1e-12 USD).
std::int64_t cost_picodollars(std::uint64_t tokens_in, std::uint64_t tokens_out, const profile::PricePair& prices);

/// Fold of Decision/Upstream/Admin/Health events. Money and time are summed as
/// integers (picodollars, microseconds) so folds are associative and replay is exact.
struct AggregateSnapshot {
    std::optional<std::uint64_t> first_seq;
    std::optional<std::uint64_t> last_seq;
    std::uint64_t events = 0;

    std::uint64_t requests_routed = 0;
    std::uint64_t requests_failed = 0;
    std::uint64_t upstream_errors = 0;
    std::uint64_t admin_events = 0;
    std::uint64_t health_events = 0;
    std::uint64_t estimated_token_requests = 0;

    std::map<std::string, std::map<std::string, std::uint64_t>> by_category_precision;

    std::uint64_t tokens_in = 0;
    std::uint64_t tokens_out = 0;
    std::int64_t cost_pico = 0;
    std::int64_t baseline_cost_pico = 0;   // every request at the highest-precision prices
    std::int64_t latency_us = 0;
    std::int64_t baseline_latency_us = 0;

    void fold(const TelemetryEvent& e);
    void merge(const AggregateSnapshot& other);

    double cost_usd() const { return static_cast<double>(cost_pico) * 1e-12; }
    double baseline_cost_usd() const { return static_cast<double>(baseline_cost_pico) * 1e-12; }
    double latency_s() const { return static_cast<double>(latency_us) * 1e-6; }
    double baseline_latency_s() const { return static_cast<double>(baseline_latency_us) * 1e-6; }

    /// (baseline - actual) / baseline; nullopt when the baseline is zero.
    std::optional<double> savings_fraction() const;
    std::optional<double> latency_savings_fraction() const;

    bool operator==(const AggregateSnapshot&) const = default;
};

AggregateSnapshot aggregate(std::span<const TelemetryEvent> events);

nlohmann::json to_json(const AggregateSnapshot& s);
AggregateSnapshot aggregate_from_json(const nlohmann::json& j);

/// "<len> <json>" without the trailing newline.
std::string encode_line(const TelemetryEvent& e);
/// Returns nullopt when the length prefix does not match or the JSON is malformed.
std::optional<TelemetryEvent> decode_line(std::string_view line);

class Journal {
public:
    struct Options {
        std::filesystem::path path;                    // empty: memory only
        std::uint64_t max_bytes = 64ull * 1024 * 1024;  // rotation bound
    };

    explicit Journal(Options options);
    ~Journal();

    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    /// Durable append (written and flushed before returning). Throws Error(Telemetry)
    /// on storage failure, in which case no seq is consumed.
    std::uint64_t append(EventKind kind, nlohmann::json payload);

    /// Events with seq >= from_seq (oldest retained first), at most `limit`.
    /// Throws Error(Range) when from_seq > next_seq().
    std::vector<TelemetryEvent> read(std::uint64_t from_seq, std::size_t limit) const;

    /// Blocks until an event with seq >= from_seq exists, the journal closes, or the timeout passes.
    bool wait_for(std::uint64_t from_seq, std::chrono::milliseconds timeout) const;

    std::uint64_t next_seq() const;
    AggregateSnapshot snapshot() const;
    /// Aggregate over retained events with from_seq <= seq < to_seq.
    AggregateSnapshot aggregate_window(std::uint64_t from_seq, std::uint64_t to_seq) const;

    /// Wakes waiters; later appends still work.
    void close();
    bool closed() const;

    /// Testing hook: while set, appends fail as if the disk rejected the write.
    void inject_storage_fault(bool fault);

    std::uint64_t rotations() const;

private:
    void load_existing();
    void rotate_locked();
    void write_carry_locked(std::uint64_t through_seq);

    Options options_;
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    std::ofstream out_;
    std::uint64_t bytes_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t rotations_ = 0;
    std::deque<TelemetryEvent> events_;
    AggregateSnapshot live_;
    bool closed_ = false;
    bool fault_ = false;
};

/// Rebuilds the aggregate from the carry file plus the journal file.
AggregateSnapshot replay(const std::filesystem::path& path);

std::filesystem::path carry_path(const std::filesystem::path& journal);

}  // namespace quantclaw::telemetry
