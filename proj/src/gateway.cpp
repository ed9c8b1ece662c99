#include "quantclaw/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <limits>

#include "quantclaw/errors.hpp"
#include "quantclaw/http_classifier.hpp"

namespace quantclaw::gateway {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation:
        case ErrorKind::Protocol:
        case ErrorKind::Range:
        case ErrorKind::Domain: return 400;
        case ErrorKind::Authorization: return 401;
        case ErrorKind::PoolExhausted: return 503;
        case ErrorKind::UpstreamTimeout:
        case ErrorKind::UpstreamDown:
        case ErrorKind::UpstreamStatus: return 502;
        default: return 500;
    }
}

Reply error_reply(int status, std::string_view type, const std::string& message, json extra = json::object()) {
    json err = {{"type", type}, {"message", message}};
    for (auto& [k, v] : extra.items()) err[k] = v;
    return Reply{status, json{{"error", err}}.dump(), "application/json", {}};
}

Reply error_reply(const Error& e, json extra = json::object()) {
    return error_reply(status_for(e.kind()), to_string(e.kind()), e.what(), std::move(extra));
}

Reply json_reply(const json& j, int status = 200) { return Reply{status, j.dump(), "application/json", {}}; }

json prices_json(const profile::PricePair& p) {
    return {{"input_per_mtok", p.input_per_mtok}, {"output_per_mtok", p.output_per_mtok}};
}

// Text of the last user message; content may be a string or a list of text parts.
std::string query_text(const json& messages) {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (!it->is_object() || it->value("role", std::string()) != "user" || !it->contains("content")) continue;
        const auto& content = it->at("content");
        if (content.is_string()) return content.get<std::string>();
        if (content.is_array()) {
            std::string text;
            for (const auto& part : content) {
                if (part.is_object() && part.value("type", std::string()) == "text" && part.contains("text")) {
                    if (!text.empty()) text += '\n';
                    text += part.at("text").get<std::string>();
                }
            }
            return text;
        }
    }
    return {};
}

}  // namespace

std::string Reply::header(std::string_view name) const {
    for (const auto& [k, v] : headers) {
        if (k == name) return v;
    }
    return {};
}

std::shared_ptr<detection::ClassifierClient> make_classifier(const config::ClassifierSettings& s,
                                                             const detection::CategoryRegistry& registry) {
    if (s.kind == "none") return nullptr;
    if (s.kind == "label") return std::make_shared<detection::HttpLabelClient>(s.endpoint, s.timeout);
    std::shared_ptr<detection::EmbeddingBackend> backend;
    if (s.embedding == "http") {
        backend = std::make_shared<detection::HttpEmbeddingBackend>(s.endpoint, s.model, s.timeout);
    } else {
        backend = std::make_shared<detection::HashingEmbedder>(s.hashing_dims);
    }
    return std::make_shared<detection::CentroidClassifier>(backend, detection::load_seeds(s.seeds_path, registry));
}

Gateway::Gateway(config::GatewayConfig cfg, std::shared_ptr<detection::ClassifierClient> classifier)
    : config_(std::move(cfg)),
      registry_(config_.categories.empty() ? detection::CategoryRegistry::defaults()
                                           : detection::CategoryRegistry(config_.categories)),
      classifier_(classifier ? std::move(classifier) : make_classifier(config_.classifier, registry_)) {
    config_.fallback_category = detection::normalize_category_id(config_.fallback_category);
    if (!registry_.contains(config_.fallback_category)) {
        throw Error(ErrorKind::Validation, "fallback_category: '" + config_.fallback_category + "' is not registered");
    }
    for (const auto& v : config_.variants) pool_.register_variant(v);

    auto rules = std::make_shared<const detection::RuleSet>(detection::load_rules(config_.rules_path, registry_));
    auto profiles = std::make_shared<const profile::ProfileSet>(profile::load_profiles(config_.profiles_path));

    routing::RoutingSnapshot initial;
    initial.profiles = std::move(profiles);
    initial.rules = std::move(rules);
    initial.mode = config_.mode;
    initial.policy = config_.policy;
    initial.policy.overrides.clear();
    routing_ = std::make_unique<routing::RoutingControl>(std::move(initial), registry_, pool_.precision_levels());
    for (const auto& [category, spec] : config_.override_specs) {
        try {
            routing_->set_override(category, routing_->resolve_precision(spec));
        } catch (const Error& e) {
            throw Error(ErrorKind::Validation, "policy.overrides." + category + ": " + e.what());
        }
    }

    journal_ = std::make_unique<telemetry::Journal>(
        telemetry::Journal::Options{config_.journal_path, config_.journal_max_bytes});

    pool_.set_listener([this](const std::string& id, pool::Health from, pool::Health to, const std::string& reason) {
        journal_event(telemetry::EventKind::Health, {{"variant_id", id},
                                                    {"from", pool::to_string(from)},
                                                    {"to", pool::to_string(to)},
                                                    {"reason", reason}});
    });
    boot_ms_ = now_ms();
    journal_event(telemetry::EventKind::Admin, {{"action", "startup"}, {"mode", routing::to_string(config_.mode)}});
}

Gateway::~Gateway() {
    stop_probing();
    pool_.set_listener(nullptr);
}

void Gateway::journal_event(telemetry::EventKind kind, json payload) {
    try {
        journal_->append(kind, std::move(payload));
    } catch (const Error& e) {
        // observability is best-effort; routing continues
        std::cerr << "quantclaw: telemetry append failed: " << e.what() << "\n";
    }
}

std::string Gateway::next_request_id() {
    return "qc-" + std::to_string(boot_ms_) + "-" + std::to_string(request_counter_.fetch_add(1));
}

Reply Gateway::handle_chat(const std::string& body) {
    const auto start = Clock::now();
    json request;
    try {
        request = json::parse(body);
    } catch (const json::parse_error& e) {
        return error_reply(400, "protocol", std::string("request body is not valid JSON: ") + e.what());
    }
    if (!request.is_object() || !request.contains("messages") || !request.at("messages").is_array() ||
        request.at("messages").empty()) {
        return error_reply(400, "protocol", "request body must be an object with a non-empty 'messages' array");
    }
    if (request.contains("max_tokens") && !request.at("max_tokens").is_number_unsigned()) {
        return error_reply(400, "protocol", "'max_tokens' must be a non-negative integer");
    }

    const auto snap = routing_->snapshot();
    const auto query = query_text(request.at("messages"));
    const auto detected =
        detection::hybrid_detect(query, *snap->rules, classifier_.get(), registry_, config_.fallback_category);
    const auto choice = routing::decide(detected.category, *snap->profiles, snap->mode, snap->policy, routing_->tiers());

    routing::RoutingDecision decision;
    decision.request_id = next_request_id();
    decision.task_category = detected.category;
    decision.stage = detected.stage;
    decision.detection_confidence = detected.confidence;
    decision.precision = choice.precision;
    decision.mode = snap->mode;
    decision.rationale = choice.rationale;
    decision.expected_rel_score_drop = choice.expected_rel_score_drop;
    decision.expected_rel_gain = choice.expected_rel_gain;
    decision.timestamp_ms = now_ms();
    if (request.contains("model") && request.at("model").is_string()) {
        decision.requested_model = request.at("model").get<std::string>();
    }

    pool::ModelVariant variant;
    try {
        variant = pool_.select_variant(choice.precision);
    } catch (const Error& e) {
        journal_event(telemetry::EventKind::Decision, {{"decision", routing::to_json(decision)},
                                                      {"outcome", "pool_exhausted"},
                                                      {"upstream", nullptr},
                                                      {"error", e.what()}});
        auto reply = error_reply(e, {{"request_id", decision.request_id}});
        reply.headers.emplace_back(kHeaderRequestId, decision.request_id);
        return reply;
    }
    decision.variant_id = variant.variant_id;
    decision.precision = variant.precision;  // nearest-higher fallback may differ from the choice

    json upstream_payload = {{"model", variant.model_id},
                             {"messages", request.at("messages")},
                             {"max_tokens", request.value("max_tokens", config_.default_max_tokens)},
                             {"stream", false}};

    pool::UpstreamResult result;
    try {
        result = pool_.forward(variant, upstream_payload,
                               pool::ForwardOptions{config_.forward_timeout, config_.upstream_bearer_token});
    } catch (const Error& e) {
        journal_event(telemetry::EventKind::Upstream, {{"request_id", decision.request_id},
                                                      {"variant_id", variant.variant_id},
                                                      {"error_kind", to_string(e.kind())},
                                                      {"message", e.what()}});
        journal_event(telemetry::EventKind::Decision, {{"decision", routing::to_json(decision)},
                                                      {"outcome", "upstream_error"},
                                                      {"upstream", nullptr},
                                                      {"error", e.what()}});
        auto reply = error_reply(502, to_string(e.kind()), e.what(),
                                 {{"variant_id", variant.variant_id}, {"request_id", decision.request_id}});
        reply.headers.emplace_back(kHeaderRequestId, decision.request_id);
        reply.headers.emplace_back(kHeaderVariant, variant.variant_id);
        return reply;
    }

    // Counterfactual latency at the highest tier, scaled by the profile's latency ratio.
    double baseline_latency = result.total_latency_s;
    if (bit_width(variant.precision) < bit_width(routing_->tiers().highest)) {
        if (const auto* p = snap->profiles->find(decision.task_category); p && p->low.latency_s > 0.0) {
            baseline_latency = result.total_latency_s * (p->high.latency_s / p->low.latency_s);
        }
    }

    const double detection_backend_s = detected.stage == detection::DetectionStage::Rule ? 0.0 : detected.elapsed_s;
    const double overhead_s = std::max(
        0.0, std::chrono::duration<double>(Clock::now() - start).count() - result.total_latency_s - detection_backend_s);

    const auto baseline_prices = pool_.baseline_prices();
    journal_event(telemetry::EventKind::Decision,
                  {{"decision", routing::to_json(decision)},
                   {"outcome", "routed"},
                   {"upstream", pool::to_json(result)},
                   {"prices", prices_json(variant.prices)},
                   {"baseline_prices", prices_json(baseline_prices)},
                   {"cost_usd", profile::request_cost(result.tokens_in, result.tokens_out, variant.prices)},
                   {"baseline_latency_s", baseline_latency},
                   {"gateway_overhead_s", overhead_s}});

    Reply reply{200, std::move(result.response_body), "application/json", {}};
    reply.headers = {{kHeaderTask, decision.task_category},
                     {kHeaderPrecision, tier_label(bit_width(decision.precision))},
                     {kHeaderFormat, std::string(to_string(decision.precision))},
                     {kHeaderVariant, decision.variant_id},
                     {kHeaderMode, std::string(routing::to_string(decision.mode))},
                     {kHeaderRationale, std::string(routing::to_string(decision.rationale))},
                     {kHeaderStage, std::string(detection::to_string(decision.stage))},
                     {kHeaderRequestId, decision.request_id},
                     {kHeaderOverhead, std::to_string(overhead_s * 1e3)}};
    return reply;
}

json Gateway::pool_json() const {
    json arr = json::array();
    for (const auto& st : pool_.list()) {
        arr.push_back({{"id", st.variant.variant_id},
                       {"model", st.variant.model_id},
                       {"precision", to_string(st.variant.precision)},
                       {"bits", bit_width(st.variant.precision)},
                       {"endpoint", st.variant.endpoint_url},
                       {"prices", prices_json(st.variant.prices)},
                       {"health", pool::to_string(st.health)},
                       {"last_probe_ms", st.last_probe_ms}});
    }
    return {{"variants", arr}};
}

Reply Gateway::reload() {
    std::shared_ptr<const detection::RuleSet> rules;
    std::shared_ptr<const profile::ProfileSet> profiles;
    try {
        rules = std::make_shared<const detection::RuleSet>(detection::load_rules(config_.rules_path, registry_));
        profiles = std::make_shared<const profile::ProfileSet>(profile::load_profiles(config_.profiles_path));
    } catch (const Error& e) {
        return error_reply(400, "validation", std::string("reload rejected, previous snapshot kept: ") + e.what());
    }
    routing_->replace_data(std::move(profiles), std::move(rules));
    const auto version = routing_->snapshot()->version;
    journal_event(telemetry::EventKind::Admin, {{"action", "reload"}, {"snapshot_version", version}});
    return json_reply({{"ok", true}, {"snapshot_version", version}});
}

Reply Gateway::admin_mutation(std::string_view path, const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        return error_reply(400, "validation", "admin body must be JSON");
    }
    try {
        if (path == "/admin/mode") {
            const auto mode = routing::parse_mode(j.at("mode").get<std::string>());
            routing_->set_mode(mode);
            journal_event(telemetry::EventKind::Admin, {{"action", "set_mode"}, {"mode", routing::to_string(mode)}});
            return json_reply({{"ok", true}, {"mode", routing::to_string(mode)}});
        }
        // /admin/overrides
        const auto category = detection::normalize_category_id(j.at("category").get<std::string>());
        std::optional<PrecisionLevel> level;
        if (j.contains("precision") && !j.at("precision").is_null()) {
            level = routing_->resolve_precision(j.at("precision").get<std::string>());
        }
        routing_->set_override(category, level);
        journal_event(telemetry::EventKind::Admin,
                      {{"action", level ? "set_override" : "clear_override"},
                       {"category", category},
                       {"precision", level ? json(to_string(*level)) : json(nullptr)}});
        return json_reply({{"ok", true},
                           {"category", category},
                           {"precision", level ? json(to_string(*level)) : json(nullptr)}});
    } catch (const Error& e) {
        return error_reply(e);
    } catch (const json::exception& e) {
        return error_reply(400, "validation", e.what());
    }
}

Reply Gateway::handle_admin(std::string_view method, std::string_view path, std::string_view authorization,
                            const std::string& body) {
    if (authorization != "Bearer " + config_.admin_token) {
        return error_reply(401, "authorization", "missing or invalid admin token");
    }
    std::lock_guard lock(admin_mutex_);
    const bool get = method == "GET";
    const bool post = method == "POST";
    if (path == "/admin/mode") {
        if (get) return json_reply({{"mode", routing::to_string(routing_->snapshot()->mode)}});
        if (post) return admin_mutation(path, body);
    } else if (path == "/admin/overrides") {
        if (get) {
            json o = json::object();
            for (const auto& [category, level] : routing_->snapshot()->policy.overrides) o[category] = to_string(level);
            return json_reply({{"overrides", o}});
        }
        if (post) return admin_mutation(path, body);
    } else if (path == "/admin/profiles") {
        if (get) return json_reply(profile::to_json(*routing_->snapshot()->profiles));
    } else if (path == "/admin/pool") {
        if (get) return json_reply(pool_json());
    } else if (path == "/admin/reload") {
        if (post) return reload();
    } else {
        return error_reply(404, "not_found", "unknown admin path '" + std::string(path) + "'");
    }
    return error_reply(405, "method_not_allowed", std::string(method) + " not allowed on " + std::string(path));
}

Reply Gateway::metrics(std::optional<std::uint64_t> from_seq, std::optional<std::uint64_t> to_seq) const {
    if (!from_seq && !to_seq) return json_reply(telemetry::to_json(journal_->snapshot()));
    return json_reply(telemetry::to_json(
        journal_->aggregate_window(from_seq.value_or(0), to_seq.value_or(std::numeric_limits<std::uint64_t>::max()))));
}

Reply Gateway::events(std::uint64_t from_seq, std::size_t limit) const {
    try {
        const auto events = journal_->read(from_seq, limit);
        json arr = json::array();
        for (const auto& e : events) arr.push_back(telemetry::to_json(e));
        return json_reply({{"events", arr}, {"next_seq", journal_->next_seq()}});
    } catch (const Error& e) {
        return error_reply(e);
    }
}

void Gateway::probe_all() {
    for (const auto& st : pool_.list()) {
        pool_.probe_health(st.variant.variant_id, config_.probe_timeout, config_.probe_path);
    }
}

void Gateway::start_probing() {
    std::lock_guard lock(probe_mutex_);
    if (probing_) return;
    probing_ = true;
    probe_thread_ = std::thread([this] {
        std::unique_lock lk(probe_mutex_);
        while (probing_) {
            lk.unlock();
            probe_all();
            lk.lock();
            probe_cv_.wait_for(lk, config_.probe_interval, [this] { return !probing_; });
        }
    });
}

void Gateway::stop_probing() {
    {
        std::lock_guard lock(probe_mutex_);
        probing_ = false;
    }
    probe_cv_.notify_all();
    if (probe_thread_.joinable()) probe_thread_.join();
}

void Gateway::shutdown() {
    if (shut_down_.exchange(true)) return;
    stop_probing();
    journal_event(telemetry::EventKind::Admin, {{"action", "shutdown"}, {"clean", true}});
    journal_->close();
}

}  // namespace quantclaw::gateway
