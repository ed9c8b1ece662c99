#include "quantclaw/pool.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include <httplib.h>

#include "quantclaw/errors.hpp"

namespace quantclaw::pool {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void set_timeouts(httplib::Client& cli, std::chrono::milliseconds timeout) {
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
}

enum class FailureClass { Timeout, Refused };

FailureClass classify(httplib::Error err) {
    switch (err) {
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
            return FailureClass::Timeout;
        default:
            return FailureClass::Refused;
    }
}

std::string message_text(const json& payload) {
    std::string text;
    if (!payload.contains("messages") || !payload.at("messages").is_array()) return text;
    for (const auto& m : payload.at("messages")) {
        if (m.contains("content") && m.at("content").is_string()) {
            text += m.at("content").get<std::string>();
            text += ' ';
        }
    }
    return text;
}

std::string completion_text(const json& body) {
    std::string text;
    if (!body.contains("choices") || !body.at("choices").is_array()) return text;
    for (const auto& c : body.at("choices")) {
        if (c.contains("message") && c.at("message").contains("content") && c.at("message").at("content").is_string()) {
            text += c.at("message").at("content").get<std::string>();
        } else if (c.contains("text") && c.at("text").is_string()) {
            text += c.at("text").get<std::string>();
        }
        text += ' ';
    }
    return text;
}

}  // namespace

std::string_view to_string(Health h) {
    switch (h) {
        case Health::Healthy: return "Healthy";
        case Health::Degraded: return "Degraded";
        case Health::Down: return "Down";
    }
    return "?";
}

std::string_view to_string(ProbeOutcome o) {
    switch (o) {
        case ProbeOutcome::Success: return "success";
        case ProbeOutcome::ErrorStatus: return "error_status";
        case ProbeOutcome::Timeout: return "timeout";
        case ProbeOutcome::Refused: return "refused";
    }
    return "?";
}

Health next_health(Health, ProbeOutcome outcome) {
    switch (outcome) {
        case ProbeOutcome::Success: return Health::Healthy;
        case ProbeOutcome::ErrorStatus:
        case ProbeOutcome::Timeout: return Health::Degraded;
        case ProbeOutcome::Refused: return Health::Down;
    }
    return Health::Down;
}

json to_json(const UpstreamResult& r) {
    return {{"tokens_in", r.tokens_in},
            {"tokens_out", r.tokens_out},
            {"tokens_estimated", r.tokens_estimated},
            {"ttft_s", r.ttft_s},
            {"total_latency_s", r.total_latency_s},
            {"upstream_status", r.upstream_status}};
}

std::uint64_t estimate_tokens(std::string_view text) {
    std::uint64_t words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(words) * 1.3));
}

std::pair<std::string, std::string> split_endpoint(std::string_view url, std::string_view default_path) {
    const auto scheme = url.find("://");
    if (scheme == std::string_view::npos) {
        throw Error(ErrorKind::Validation, "endpoint '" + std::string(url) + "' must look like http://host:port[/path]");
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) return {std::string(url), std::string(default_path)};
    auto path = url.substr(slash);
    if (path == "/") path = default_path;
    return {std::string(url.substr(0, slash)), std::string(path)};
}

void ModelPool::register_variant(ModelVariant v) {
    if (v.variant_id.empty()) throw Error(ErrorKind::Validation, "pool: variant id must not be empty");
    split_endpoint(v.endpoint_url, "/");
    if (v.prices.input_per_mtok < 0 || v.prices.output_per_mtok < 0) {
        throw Error(ErrorKind::Validation, "pool: variant '" + v.variant_id + "' has negative prices");
    }
    std::unique_lock lock(mutex_);
    if (variants_.contains(v.variant_id)) {
        throw Error(ErrorKind::Validation, "pool: duplicate variant id '" + v.variant_id + "'");
    }
    for (const auto& [id, st] : variants_) {
        if (st.variant.model_id == v.model_id && st.variant.precision == v.precision) {
            throw Error(ErrorKind::Validation, "pool: variants '" + id + "' and '" + v.variant_id +
                                                   "' share model and precision");
        }
    }
    auto id = v.variant_id;
    variants_.emplace(std::move(id), VariantStatus{std::move(v), Health::Healthy, 0});
}

bool ModelPool::remove_variant(std::string_view variant_id) {
    std::unique_lock lock(mutex_);
    return variants_.erase(std::string(variant_id)) > 0;
}

std::vector<VariantStatus> ModelPool::list() const {
    std::shared_lock lock(mutex_);
    std::vector<VariantStatus> out;
    for (const auto& [id, st] : variants_) out.push_back(st);
    return out;
}

std::optional<VariantStatus> ModelPool::find(std::string_view variant_id) const {
    std::shared_lock lock(mutex_);
    auto it = variants_.find(std::string(variant_id));
    if (it == variants_.end()) return std::nullopt;
    return it->second;
}

std::vector<PrecisionLevel> ModelPool::precision_levels() const {
    std::shared_lock lock(mutex_);
    std::vector<PrecisionLevel> out;
    for (const auto& [id, st] : variants_) {
        if (std::find(out.begin(), out.end(), st.variant.precision) == out.end()) out.push_back(st.variant.precision);
    }
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return bit_width(a) != bit_width(b) ? bit_width(a) > bit_width(b) : a < b;
    });
    return out;
}

ModelVariant ModelPool::select_variant(PrecisionLevel precision) const {
    std::shared_lock lock(mutex_);
    const VariantStatus* best = nullptr;
    auto rank = [&](const VariantStatus& s) {
        // exact format first, then the smallest bit width at or above the request
        return std::pair{s.variant.precision == precision ? 0 : 1, bit_width(s.variant.precision)};
    };
    for (const auto& [id, st] : variants_) {
        if (st.health == Health::Down) continue;
        if (bit_width(st.variant.precision) < bit_width(precision)) continue;
        if (best == nullptr || rank(st) < rank(*best)) best = &st;  // ids iterate in order, so ties keep the lowest
    }
    if (best == nullptr) {
        throw Error(ErrorKind::PoolExhausted, "no healthy variant at or above " +
                                                  std::string(quantclaw::to_string(precision)));
    }
    return best->variant;
}

profile::PricePair ModelPool::baseline_prices() const {
    std::shared_lock lock(mutex_);
    const VariantStatus* best = nullptr;
    for (const auto& [id, st] : variants_) {
        if (best == nullptr || bit_width(st.variant.precision) > bit_width(best->variant.precision)) best = &st;
    }
    if (best == nullptr) throw Error(ErrorKind::PoolExhausted, "pool is empty");
    return best->variant.prices;
}

void ModelPool::set_listener(HealthListener listener) {
    std::unique_lock lock(mutex_);
    listener_ = std::move(listener);
}

void ModelPool::transition(const std::string& variant_id, Health next, const std::string& reason) {
    Health previous;
    HealthListener listener;
    {
        std::unique_lock lock(mutex_);
        auto it = variants_.find(variant_id);
        if (it == variants_.end()) return;
        previous = it->second.health;
        it->second.health = next;
        listener = listener_;
    }
    if (previous != next && listener) listener(variant_id, previous, next, reason);
}

void ModelPool::set_health(std::string_view variant_id, Health health, const std::string& reason) {
    transition(std::string(variant_id), health, reason);
}

UpstreamResult ModelPool::forward(const ModelVariant& variant, const json& payload, const ForwardOptions& options) {
    const auto [origin, path] = split_endpoint(variant.endpoint_url, "/v1/chat/completions");
    httplib::Client cli(origin);
    set_timeouts(cli, options.timeout);

    httplib::Request req;
    req.method = "POST";
    req.path = path;
    req.body = payload.dump();
    req.set_header("Content-Type", "application/json");
    if (!options.bearer_token.empty()) req.set_header("Authorization", "Bearer " + options.bearer_token);

    const auto start = Clock::now();
    std::optional<Clock::time_point> first_byte;
    std::string body;
    req.response_handler = [&](const httplib::Response&) {
        if (!first_byte) first_byte = Clock::now();
        return true;
    };
    req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
        if (!first_byte) first_byte = Clock::now();
        body.append(data, len);
        return true;
    };

    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    const bool ok = cli.send(req, res, err);
    const auto end = Clock::now();
    if (!ok || err != httplib::Error::Success) {
        const auto what = httplib::to_string(err);
        if (classify(err) == FailureClass::Timeout) {
            transition(variant.variant_id, Health::Degraded, "forward timeout: " + what);
            throw Error(ErrorKind::UpstreamTimeout, "variant '" + variant.variant_id + "': " + what);
        }
        transition(variant.variant_id, Health::Down, "forward refused: " + what);
        throw Error(ErrorKind::UpstreamDown, "variant '" + variant.variant_id + "': " + what);
    }
    if (body.empty()) body = res.body;
    if (res.status < 200 || res.status >= 300) {
        throw Error(ErrorKind::UpstreamStatus,
                    "variant '" + variant.variant_id + "' answered HTTP " + std::to_string(res.status));
    }

    json parsed;
    try {
        parsed = json::parse(body);
    } catch (const json::parse_error&) {
        throw Error(ErrorKind::Protocol, "variant '" + variant.variant_id + "' returned a non-JSON body");
    }
    if (!parsed.is_object()) throw Error(ErrorKind::Protocol, "variant '" + variant.variant_id + "': body is not an object");

    UpstreamResult result;
    result.upstream_status = res.status;
    result.total_latency_s = std::chrono::duration<double>(end - start).count();
    result.ttft_s = std::min(result.total_latency_s,
                             std::chrono::duration<double>(first_byte.value_or(end) - start).count());
    const auto usage = parsed.find("usage");
    if (usage != parsed.end() && usage->is_object() && usage->contains("prompt_tokens") &&
        usage->contains("completion_tokens")) {
        try {
            result.tokens_in = usage->at("prompt_tokens").get<std::uint64_t>();
            result.tokens_out = usage->at("completion_tokens").get<std::uint64_t>();
        } catch (const json::exception&) {
            throw Error(ErrorKind::Protocol, "variant '" + variant.variant_id + "': malformed usage block");
        }
    } else {
        result.tokens_in = estimate_tokens(message_text(payload));
        result.tokens_out = estimate_tokens(completion_text(parsed));
        result.tokens_estimated = true;
    }
    result.response_body = std::move(body);
    return result;
}

Health ModelPool::probe_health(std::string_view variant_id, std::chrono::milliseconds timeout,
                               const std::string& probe_path) {
    const auto status = find(variant_id);
    if (!status) throw Error(ErrorKind::Validation, "unknown variant '" + std::string(variant_id) + "'");
    const auto [origin, path] = split_endpoint(status->variant.endpoint_url, "/");
    httplib::Client cli(origin);
    set_timeouts(cli, timeout);
    auto res = cli.Get(probe_path);
    ProbeOutcome outcome;
    if (res) {
        outcome = (res->status >= 200 && res->status < 300) ? ProbeOutcome::Success : ProbeOutcome::ErrorStatus;
    } else {
        outcome = classify(res.error()) == FailureClass::Timeout ? ProbeOutcome::Timeout : ProbeOutcome::Refused;
    }
    const auto next = next_health(status->health, outcome);
    {
        std::unique_lock lock(mutex_);
        if (auto it = variants_.find(std::string(variant_id)); it != variants_.end()) it->second.last_probe_ms = now_ms();
    }
    transition(std::string(variant_id), next, "probe " + std::string(to_string(outcome)));
    return next;
}

}  // namespace quantclaw::pool
