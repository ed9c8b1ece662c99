#include "quantclaw/config.hpp"

#include <set>

#include "quantclaw/errors.hpp"
#include "quantclaw/profiles.hpp"

namespace quantclaw::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::Validation, field + ": " + what);
}

const json& require(const json& j, const std::string& field, const std::string& prefix = {}) {
    const auto full = prefix.empty() ? field : prefix + "." + field;
    if (!j.is_object() || !j.contains(field) || j.at(field).is_null()) fail(full, "required field missing");
    return j.at(field);
}

std::string require_string(const json& j, const std::string& field, const std::string& prefix = {}) {
    const auto& v = require(j, field, prefix);
    if (!v.is_string() || v.get<std::string>().empty()) {
        fail(prefix.empty() ? field : prefix + "." + field, "expected a non-empty string");
    }
    return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::filesystem::path require_file(const json& j, const std::string& field, const std::filesystem::path& base,
                                   const std::string& prefix = {}) {
    const auto path = resolve(base, require_string(j, field, prefix));
    if (!std::filesystem::exists(path)) {
        fail(prefix.empty() ? field : prefix + "." + field, "file '" + path.string() + "' does not exist");
    }
    return path;
}

std::chrono::milliseconds millis(const json& j, const char* field, std::chrono::milliseconds fallback,
                                 const std::string& prefix) {
    if (!j.contains(field)) return fallback;
    const auto& v = j.at(field);
    if (!v.is_number_integer() || v.get<long long>() <= 0) fail(prefix + "." + field, "expected a positive integer");
    return std::chrono::milliseconds(v.get<long long>());
}

profile::PricePair price_pair(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected {input_per_mtok, output_per_mtok}");
    const auto& in = require(j, "input_per_mtok", where);
    const auto& out = require(j, "output_per_mtok", where);
    if (!in.is_number() || !out.is_number()) fail(where, "prices must be numbers");
    profile::PricePair p{in.get<double>(), out.get<double>()};
    if (p.input_per_mtok < 0 || p.output_per_mtok < 0) fail(where, "prices must be >= 0");
    return p;
}

void parse_pool(const json& j, GatewayConfig& cfg) {
    const auto& pool = require(j, "pool");
    const auto& variants = require(pool, "variants", "pool");
    if (!variants.is_array() || variants.empty()) fail("pool.variants", "expected a non-empty array");

    std::map<std::string, profile::PricePair> explicit_prices;
    std::vector<std::pair<std::size_t, json>> derived;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const std::string where = "pool.variants[" + std::to_string(i) + "]";
        const auto& vj = variants.at(i);
        pool::ModelVariant v;
        v.variant_id = require_string(vj, "id", where);
        if (!ids.insert(v.variant_id).second) fail(where + ".id", "duplicate variant id '" + v.variant_id + "'");
        v.model_id = require_string(vj, "model", where);
        try {
            v.precision = parse_precision(require_string(vj, "precision", where));
        } catch (const Error& e) {
            fail(where + ".precision", e.what());
        }
        v.endpoint_url = require_string(vj, "endpoint", where);
        try {
            pool::split_endpoint(v.endpoint_url, "/");
        } catch (const Error& e) {
            fail(where + ".endpoint", e.what());
        }
        if (vj.contains("prices")) {
            v.prices = price_pair(vj.at("prices"), where + ".prices");
            explicit_prices[v.variant_id] = v.prices;
        } else if (vj.contains("price_from")) {
            derived.emplace_back(i, vj.at("price_from"));
        } else {
            fail(where, "either 'prices' or 'price_from' is required");
        }
        cfg.variants.push_back(std::move(v));
    }
    // Derived prices: low = factor x reference, component-wise.
    for (const auto& [i, pf] : derived) {
        const std::string where = "pool.variants[" + std::to_string(i) + "].price_from";
        const auto ref = require_string(pf, "variant", where);
        auto it = explicit_prices.find(ref);
        if (it == explicit_prices.end()) fail(where + ".variant", "'" + ref + "' has no explicit prices");
        const auto& factor = require(pf, "discount_factor", where);
        if (!factor.is_number()) fail(where + ".discount_factor", "expected a number");
        try {
            cfg.variants[i].prices = profile::discounted_price(it->second, factor.get<double>());
        } catch (const Error& e) {
            fail(where + ".discount_factor", e.what());
        }
    }

    cfg.probe_interval = millis(pool, "probe_interval_ms", cfg.probe_interval, "pool");
    cfg.probe_timeout = millis(pool, "probe_timeout_ms", cfg.probe_timeout, "pool");
    cfg.forward_timeout = millis(pool, "forward_timeout_ms", cfg.forward_timeout, "pool");
    if (pool.contains("probe_path")) cfg.probe_path = require_string(pool, "probe_path", "pool");
    if (pool.contains("bearer_token")) cfg.upstream_bearer_token = pool.at("bearer_token").get<std::string>();
    if (pool.contains("default_max_tokens")) {
        cfg.default_max_tokens = pool.at("default_max_tokens").get<std::uint64_t>();
    }
}

void parse_classifier(const json& j, GatewayConfig& cfg, const std::filesystem::path& base) {
    if (!j.contains("classifier")) {
        cfg.classifier.kind = "none";
        return;
    }
    const auto& c = j.at("classifier");
    auto& s = cfg.classifier;
    s.kind = require_string(c, "kind", "classifier");
    s.timeout = millis(c, "timeout_ms", s.timeout, "classifier");
    if (s.kind == "none") return;
    if (s.kind == "label") {
        s.endpoint = require_string(c, "endpoint", "classifier");
        return;
    }
    if (s.kind != "centroid") fail("classifier.kind", "expected 'centroid', 'label' or 'none', got '" + s.kind + "'");
    s.seeds_path = require_file(c, "seeds_path", base, "classifier");
    s.embedding = c.value("embedding", std::string("hashing"));
    if (s.embedding == "hashing") {
        s.hashing_dims = c.value("dims", std::size_t{256});
        if (s.hashing_dims == 0) fail("classifier.dims", "must be > 0");
    } else if (s.embedding == "http") {
        s.endpoint = require_string(c, "endpoint", "classifier");
        s.model = c.value("model", std::string());
    } else {
        fail("classifier.embedding", "expected 'hashing' or 'http'");
    }
}

}  // namespace

GatewayConfig config_from_json(const json& j, const std::filesystem::path& base) {
    if (!j.is_object()) fail("config", "expected a JSON object");
    GatewayConfig cfg;
    try {
        if (j.contains("listen")) {
            const auto& l = j.at("listen");
            cfg.host = l.value("host", cfg.host);
            cfg.port = l.value("port", cfg.port);
            if (cfg.port < 0 || cfg.port > 65535) fail("listen.port", "out of range");
        }
        if (j.contains("categories")) {
            cfg.categories = j.at("categories").get<std::vector<std::string>>();
        }
        cfg.rules_path = require_file(j, "rules_path", base);
        parse_classifier(j, cfg, base);
        if (j.contains("fallback_category")) cfg.fallback_category = require_string(j, "fallback_category");
        cfg.profiles_path = require_file(j, "profiles_path", base);

        if (j.contains("policy")) {
            const auto& p = j.at("policy");
            if (p.contains("mode")) {
                try {
                    cfg.mode = routing::parse_mode(p.at("mode").get<std::string>());
                } catch (const Error& e) {
                    fail("policy.mode", e.what());
                }
            }
            cfg.policy.epsilon_score = p.value("epsilon_score", cfg.policy.epsilon_score);
            cfg.policy.tau_latency = p.value("tau_latency", cfg.policy.tau_latency);
            cfg.policy.tau_cost = p.value("tau_cost", cfg.policy.tau_cost);
            cfg.policy.validate();
            if (p.contains("overrides")) {
                cfg.override_specs = p.at("overrides").get<std::map<std::string, std::string>>();
            }
        }

        parse_pool(j, cfg);

        if (j.contains("telemetry")) {
            const auto& t = j.at("telemetry");
            if (t.contains("journal_path")) cfg.journal_path = resolve(base, require_string(t, "journal_path", "telemetry"));
            cfg.journal_max_bytes = t.value("max_bytes", cfg.journal_max_bytes);
            if (cfg.journal_max_bytes == 0) fail("telemetry.max_bytes", "must be > 0");
        }
        cfg.admin_token = require_string(j, "admin_token");
    } catch (const json::exception& e) {
        fail("config", e.what());
    }
    return cfg;
}

GatewayConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail("config", "file '" + path.string() + "' does not exist");
    const auto j = profile::read_json_file(path);
    auto cfg = config_from_json(j, path.parent_path());
    cfg.source = path;
    return cfg;
}

}  // namespace quantclaw::config
