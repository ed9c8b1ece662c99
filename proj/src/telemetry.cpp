#include "quantclaw/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "quantclaw/errors.hpp"

namespace quantclaw::telemetry {

using nlohmann::json;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::int64_t to_micros(double seconds) { return std::llround(seconds * 1e6); }

std::int64_t rate_pico_per_token(double dollars_per_mtok) { return std::llround(dollars_per_mtok * 1e6); }

profile::PricePair prices_from(const json& j) {
    return {j.at("input_per_mtok").get<double>(), j.at("output_per_mtok").get<double>()};
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

std::optional<std::uint64_t> min_opt(std::optional<std::uint64_t> a, std::optional<std::uint64_t> b) {
    if (!a) return b;
    if (!b) return a;
    return std::min(*a, *b);
}

std::optional<std::uint64_t> max_opt(std::optional<std::uint64_t> a, std::optional<std::uint64_t> b) {
    if (!a) return b;
    if (!b) return a;
    return std::max(*a, *b);
}

}  // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Decision: return "Decision";
        case EventKind::Upstream: return "Upstream";
        case EventKind::Admin: return "Admin";
        case EventKind::Health: return "Health";
    }
    return "?";
}

EventKind parse_kind(std::string_view name) {
    for (auto k : {EventKind::Decision, EventKind::Upstream, EventKind::Admin, EventKind::Health}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorKind::Validation, "unknown event kind '" + std::string(name) + "'");
}

json to_json(const TelemetryEvent& e) {
    return {{"seq", e.seq}, {"timestamp_ms", e.timestamp_ms}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
}

TelemetryEvent event_from_json(const json& j) {
    TelemetryEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    e.kind = parse_kind(j.at("kind").get<std::string>());
    e.payload = j.at("payload");
    return e;
}

std::int64_t cost_picodollars(std::uint64_t tokens_in, std::uint64_t tokens_out, const profile::PricePair& prices) {
    return static_cast<std::int64_t>(tokens_in) * rate_pico_per_token(prices.input_per_mtok) +
           static_cast<std::int64_t>(tokens_out) * rate_pico_per_token(prices.output_per_mtok);
}

void AggregateSnapshot::fold(const TelemetryEvent& e) {
    first_seq = min_opt(first_seq, e.seq);
    last_seq = max_opt(last_seq, e.seq);
    ++events;
    switch (e.kind) {
        case EventKind::Admin: ++admin_events; return;
        case EventKind::Health: ++health_events; return;
        case EventKind::Upstream: ++upstream_errors; return;
        case EventKind::Decision: break;
    }
    const auto& p = e.payload;
    if (p.value("outcome", std::string()) != "routed") {
        ++requests_failed;
        return;
    }
    const auto& decision = p.at("decision");
    const auto& up = p.at("upstream");
    const auto tin = up.at("tokens_in").get<std::uint64_t>();
    const auto tout = up.at("tokens_out").get<std::uint64_t>();
    ++requests_routed;
    ++by_category_precision[decision.at("task_category").get<std::string>()][decision.at("precision").get<std::string>()];
    if (up.value("tokens_estimated", false)) ++estimated_token_requests;
    tokens_in += tin;
    tokens_out += tout;
    cost_pico += cost_picodollars(tin, tout, prices_from(p.at("prices")));
    baseline_cost_pico += cost_picodollars(tin, tout, prices_from(p.at("baseline_prices")));
    latency_us += to_micros(up.at("total_latency_s").get<double>());
    baseline_latency_us += to_micros(p.at("baseline_latency_s").get<double>());
}

void AggregateSnapshot::merge(const AggregateSnapshot& o) {
    first_seq = min_opt(first_seq, o.first_seq);
    last_seq = max_opt(last_seq, o.last_seq);
    events += o.events;
    requests_routed += o.requests_routed;
    requests_failed += o.requests_failed;
    upstream_errors += o.upstream_errors;
    admin_events += o.admin_events;
    health_events += o.health_events;
    estimated_token_requests += o.estimated_token_requests;
    for (const auto& [category, counts] : o.by_category_precision) {
        for (const auto& [precision, n] : counts) by_category_precision[category][precision] += n;
    }
    tokens_in += o.tokens_in;
    tokens_out += o.tokens_out;
    cost_pico += o.cost_pico;
    baseline_cost_pico += o.baseline_cost_pico;
    latency_us += o.latency_us;
    baseline_latency_us += o.baseline_latency_us;
}

std::optional<double> AggregateSnapshot::savings_fraction() const {
    if (baseline_cost_pico <= 0) return std::nullopt;
    return static_cast<double>(baseline_cost_pico - cost_pico) / static_cast<double>(baseline_cost_pico);
}

std::optional<double> AggregateSnapshot::latency_savings_fraction() const {
    if (baseline_latency_us <= 0) return std::nullopt;
    return static_cast<double>(baseline_latency_us - latency_us) / static_cast<double>(baseline_latency_us);
}

AggregateSnapshot aggregate(std::span<const TelemetryEvent> events) {
    AggregateSnapshot s;
    for (const auto& e : events) s.fold(e);
    return s;
}

json to_json(const AggregateSnapshot& s) {
    json j;
    j["window"] = json::object();
    put_optional(j["window"], "first_seq", s.first_seq);
    put_optional(j["window"], "last_seq", s.last_seq);
    j["window"]["events"] = s.events;
    j["requests_routed"] = s.requests_routed;
    j["requests_failed"] = s.requests_failed;
    j["upstream_errors"] = s.upstream_errors;
    j["admin_events"] = s.admin_events;
    j["health_events"] = s.health_events;
    j["estimated_token_requests"] = s.estimated_token_requests;
    j["by_category_precision"] = s.by_category_precision;
    j["tokens_in"] = s.tokens_in;
    j["tokens_out"] = s.tokens_out;
    j["cost_pico"] = s.cost_pico;
    j["baseline_cost_pico"] = s.baseline_cost_pico;
    j["latency_us"] = s.latency_us;
    j["baseline_latency_us"] = s.baseline_latency_us;
    j["cost_usd"] = s.cost_usd();
    j["baseline_cost_usd"] = s.baseline_cost_usd();
    j["latency_s"] = s.latency_s();
    j["baseline_latency_s"] = s.baseline_latency_s();
    put_optional(j, "savings_fraction", s.savings_fraction());
    put_optional(j, "latency_savings_fraction", s.latency_savings_fraction());
    j["savings_defined"] = s.savings_fraction().has_value();
    return j;
}

AggregateSnapshot aggregate_from_json(const json& j) {
    try {
        AggregateSnapshot s;
        s.first_seq = get_optional<std::uint64_t>(j.at("window"), "first_seq");
        s.last_seq = get_optional<std::uint64_t>(j.at("window"), "last_seq");
        s.events = j.at("window").at("events").get<std::uint64_t>();
        s.requests_routed = j.at("requests_routed").get<std::uint64_t>();
        s.requests_failed = j.at("requests_failed").get<std::uint64_t>();
        s.upstream_errors = j.at("upstream_errors").get<std::uint64_t>();
        s.admin_events = j.at("admin_events").get<std::uint64_t>();
        s.health_events = j.at("health_events").get<std::uint64_t>();
        s.estimated_token_requests = j.at("estimated_token_requests").get<std::uint64_t>();
        s.by_category_precision =
            j.at("by_category_precision").get<std::map<std::string, std::map<std::string, std::uint64_t>>>();
        s.tokens_in = j.at("tokens_in").get<std::uint64_t>();
        s.tokens_out = j.at("tokens_out").get<std::uint64_t>();
        s.cost_pico = j.at("cost_pico").get<std::int64_t>();
        s.baseline_cost_pico = j.at("baseline_cost_pico").get<std::int64_t>();
        s.latency_us = j.at("latency_us").get<std::int64_t>();
        s.baseline_latency_us = j.at("baseline_latency_us").get<std::int64_t>();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Telemetry, std::string("aggregate snapshot: ") + e.what());
    }
}

std::string encode_line(const TelemetryEvent& e) {
    const auto body = to_json(e).dump();
    return std::to_string(body.size()) + " " + body;
}

std::optional<TelemetryEvent> decode_line(std::string_view line) {
    const auto space = line.find(' ');
    if (space == std::string_view::npos || space == 0) return std::nullopt;
    std::size_t length = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + space, length);
    if (ec != std::errc() || ptr != line.data() + space) return std::nullopt;
    const auto body = line.substr(space + 1);
    if (body.size() != length) return std::nullopt;
    try {
        return event_from_json(json::parse(body));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::filesystem::path carry_path(const std::filesystem::path& journal) {
    auto p = journal;
    p += ".carry.json";
    return p;
}

namespace {

struct LoadedJournal {
    AggregateSnapshot carry;
    std::optional<std::uint64_t> carry_through;
    std::vector<TelemetryEvent> events;
    std::uint64_t good_bytes = 0;
    bool torn_tail = false;
};

LoadedJournal load_journal(const std::filesystem::path& path) {
    LoadedJournal out;
    if (const auto cp = carry_path(path); std::filesystem::exists(cp)) {
        std::ifstream in(cp);
        try {
            const auto j = json::parse(in);
            out.carry = aggregate_from_json(j.at("aggregate"));
            out.carry_through = j.at("through_seq").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Telemetry, "'" + cp.string() + "': unreadable carry file: " + e.what());
        }
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> bad_line;
    while (std::getline(in, line)) {
        ++line_no;
        const bool complete = !in.eof();
        if (bad_line) {
            throw Error(ErrorKind::Telemetry, path.string() + ":" + std::to_string(*bad_line) +
                                                  ": corrupted journal line (length/JSON check failed)");
        }
        auto event = decode_line(line);
        if (!event || !complete) {
            bad_line = line_no;
            continue;
        }
        if (!out.events.empty() && event->seq <= out.events.back().seq) {
            throw Error(ErrorKind::Telemetry, path.string() + ":" + std::to_string(line_no) + ": seq not increasing");
        }
        out.events.push_back(std::move(*event));
        out.good_bytes += line.size() + 1;
    }
    out.torn_tail = bad_line.has_value();
    return out;
}

}  // namespace

AggregateSnapshot replay(const std::filesystem::path& path) {
    auto loaded = load_journal(path);
    auto s = loaded.carry;
    s.merge(aggregate(loaded.events));
    return s;
}

Journal::Journal(Options options) : options_(std::move(options)) {
    if (!options_.path.empty()) load_existing();
}

Journal::~Journal() { close(); }

void Journal::load_existing() {
    auto loaded = load_journal(options_.path);
    if (loaded.torn_tail) std::filesystem::resize_file(options_.path, loaded.good_bytes);
    live_ = loaded.carry;
    if (loaded.carry_through) next_seq_ = *loaded.carry_through + 1;
    for (auto& e : loaded.events) {
        live_.fold(e);
        next_seq_ = std::max(next_seq_, e.seq + 1);
        events_.push_back(std::move(e));
    }
    bytes_ = loaded.good_bytes;
    if (options_.path.has_parent_path()) std::filesystem::create_directories(options_.path.parent_path());
    out_.open(options_.path, std::ios::binary | std::ios::app);
    if (!out_) throw Error(ErrorKind::Telemetry, "cannot open journal '" + options_.path.string() + "'");
}

std::uint64_t Journal::append(EventKind kind, json payload) {
    std::unique_lock lock(mutex_);
    TelemetryEvent e{next_seq_, now_ms(), kind, std::move(payload)};
    if (fault_) throw Error(ErrorKind::Telemetry, "journal storage fault: write rejected");
    if (!options_.path.empty()) {
        const auto line = encode_line(e) + "\n";
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.flush();
        if (!out_) {
            out_.clear();
            throw Error(ErrorKind::Telemetry, "journal write failed for '" + options_.path.string() + "'");
        }
        bytes_ += line.size();
    }
    live_.fold(e);
    events_.push_back(std::move(e));
    const auto seq = next_seq_++;
    if (!options_.path.empty() && bytes_ > options_.max_bytes) rotate_locked();
    lock.unlock();
    cv_.notify_all();
    return seq;
}

void Journal::write_carry_locked(std::uint64_t through_seq) {
    const auto cp = carry_path(options_.path);
    auto tmp = cp;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"through_seq", through_seq}, {"aggregate", to_json(live_)}}.dump();
        if (!out) throw Error(ErrorKind::Telemetry, "cannot write carry file '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, cp);
}

void Journal::rotate_locked() {
    // The carry must land before the file moves aside, or a crash in between would lose events.
    write_carry_locked(next_seq_ - 1);
    out_.close();
    auto rotated = options_.path;
    rotated += ".1";
    std::filesystem::rename(options_.path, rotated);
    out_.open(options_.path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorKind::Telemetry, "cannot reopen journal after rotation");
    bytes_ = 0;
    events_.clear();
    ++rotations_;
}

std::vector<TelemetryEvent> Journal::read(std::uint64_t from_seq, std::size_t limit) const {
    std::lock_guard lock(mutex_);
    if (from_seq > next_seq_) {
        throw Error(ErrorKind::Range, "from_seq " + std::to_string(from_seq) + " is beyond next seq " +
                                          std::to_string(next_seq_));
    }
    std::vector<TelemetryEvent> out;
    auto it = std::lower_bound(events_.begin(), events_.end(), from_seq,
                               [](const TelemetryEvent& e, std::uint64_t s) { return e.seq < s; });
    for (; it != events_.end() && out.size() < limit; ++it) out.push_back(*it);
    return out;
}

bool Journal::wait_for(std::uint64_t from_seq, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return next_seq_ > from_seq || closed_; }) && next_seq_ > from_seq;
}

std::uint64_t Journal::next_seq() const {
    std::lock_guard lock(mutex_);
    return next_seq_;
}

AggregateSnapshot Journal::snapshot() const {
    std::lock_guard lock(mutex_);
    return live_;
}

AggregateSnapshot Journal::aggregate_window(std::uint64_t from_seq, std::uint64_t to_seq) const {
    std::lock_guard lock(mutex_);
    AggregateSnapshot s;
    for (const auto& e : events_) {
        if (e.seq >= from_seq && e.seq < to_seq) s.fold(e);
    }
    return s;
}

void Journal::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        if (out_.is_open()) out_.flush();
    }
    cv_.notify_all();
}

bool Journal::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

void Journal::inject_storage_fault(bool fault) {
    std::lock_guard lock(mutex_);
    fault_ = fault;
}

std::uint64_t Journal::rotations() const {
    std::lock_guard lock(mutex_);
    return rotations_;
}

}  // namespace quantclaw::telemetry
