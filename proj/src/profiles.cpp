#include "quantclaw/profiles.hpp"

#include <fstream>
#include <map>
#include <set>

#include "quantclaw/errors.hpp"

namespace quantclaw::profile {

using nlohmann::json;

namespace {

double require_number(const json& j, const char* field, std::string_view where) {
    if (!j.contains(field) || !j.at(field).is_number()) {
        throw Error(ErrorKind::Validation, std::string(where) + "." + field + ": required number missing");
    }
    return j.at(field).get<double>();
}

VariantMetrics metrics_from_json(const json& j, std::string_view where) {
    if (!j.is_object()) throw Error(ErrorKind::Validation, std::string(where) + ": expected an object");
    VariantMetrics m;
    m.score = require_number(j, "score", where);
    m.cost_usd = require_number(j, "cost_usd", where);
    m.latency_s = require_number(j, "latency_s", where);
    if (j.contains("best_score") && !j.at("best_score").is_null()) {
        m.best_score = require_number(j, "best_score", where);
    }
    return m;
}

json metrics_to_json(const VariantMetrics& m) {
    json j = {{"score", m.score}, {"cost_usd", m.cost_usd}, {"latency_s", m.latency_s}};
    if (m.best_score) j["best_score"] = *m.best_score;
    return j;
}

SensitivityThresholds thresholds_from_json(const json& j) {
    SensitivityThresholds t;
    if (j.contains("thresholds")) {
        const auto& tj = j.at("thresholds");
        t.low = require_number(tj, "low", "thresholds");
        t.high = require_number(tj, "high", "thresholds");
    }
    t.validate();
    return t;
}

PrecisionLevel precision_field(const json& j, const char* field, PrecisionLevel fallback) {
    if (!j.contains(field)) return fallback;
    return parse_precision(j.at(field).get<std::string>());
}

}  // namespace

std::string_view to_string(ScoreUnit unit) { return unit == ScoreUnit::Fraction ? "fraction" : "percent"; }

ScoreUnit parse_unit(std::string_view name) {
    if (name == "fraction") return ScoreUnit::Fraction;
    if (name == "percent" || name == "percentage") return ScoreUnit::Percent;
    throw Error(ErrorKind::Validation, "unit: expected 'fraction' or 'percent', got '" + std::string(name) + "'");
}

double score_upper_bound(ScoreUnit unit) { return unit == ScoreUnit::Fraction ? 1.0 : 100.0; }

void VariantMetrics::validate(ScoreUnit unit, std::string_view where) const {
    const double hi = score_upper_bound(unit);
    auto check_score = [&](double s, const char* name) {
        if (!(s >= 0.0 && s <= hi)) {
            throw Error(ErrorKind::Validation, std::string(where) + "." + name + ": " + std::to_string(s) +
                                                   " outside [0, " + std::to_string(hi) + "] for unit " +
                                                   std::string(to_string(unit)));
        }
    };
    check_score(score, "score");
    if (best_score) check_score(*best_score, "best_score");
    if (!(cost_usd >= 0.0)) throw Error(ErrorKind::Validation, std::string(where) + ".cost_usd: must be >= 0");
    if (!(latency_s >= 0.0)) throw Error(ErrorKind::Validation, std::string(where) + ".latency_s: must be >= 0");
}

SensitivityProfile make_profile(std::string category, VariantMetrics high, VariantMetrics low,
                                const SensitivityThresholds& thresholds) {
    SensitivityProfile p;
    p.rel_degradation = relative_degradation(high.score, low.score, category);
    p.group = classify_sensitivity(p.rel_degradation, thresholds);
    p.task_category = std::move(category);
    p.high = high;
    p.low = low;
    return p;
}

const SensitivityProfile* ProfileSet::find(std::string_view category) const {
    for (const auto& t : tasks) {
        if (t.task_category == category) return &t;
    }
    return nullptr;
}

json to_json(const PricingRule& rule) {
    return {{"high", {{"input_per_mtok", rule.high.input_per_mtok}, {"output_per_mtok", rule.high.output_per_mtok}}},
            {"discount_factor", rule.discount_factor}};
}

PricingRule pricing_from_json(const json& j) {
    if (!j.is_object() || !j.contains("high")) {
        throw Error(ErrorKind::Validation, "pricing.high: required object missing");
    }
    PricingRule rule;
    rule.high.input_per_mtok = require_number(j.at("high"), "input_per_mtok", "pricing.high");
    rule.high.output_per_mtok = require_number(j.at("high"), "output_per_mtok", "pricing.high");
    rule.discount_factor = require_number(j, "discount_factor", "pricing");
    if (rule.high.input_per_mtok < 0 || rule.high.output_per_mtok < 0) {
        throw Error(ErrorKind::Validation, "pricing.high: prices must be >= 0");
    }
    discounted_price(rule);  // validates the factor
    return rule;
}

namespace {

ProfileSet parse_profiles(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::Validation, "profiles: expected a JSON object");
    ProfileSet set;
    if (!j.contains("unit")) throw Error(ErrorKind::Validation, "profiles.unit: required field missing");
    set.unit = parse_unit(j.at("unit").get<std::string>());
    set.thresholds = thresholds_from_json(j);
    set.high_precision = precision_field(j, "high_precision", PrecisionLevel::BF16);
    set.low_precision = precision_field(j, "low_precision", PrecisionLevel::NVFP4);
    if (!higher_precision(set.high_precision, set.low_precision)) {
        throw Error(ErrorKind::Validation, "profiles: high_precision must carry more bits than low_precision");
    }
    if (j.contains("pricing") && !j.at("pricing").is_null()) set.pricing = pricing_from_json(j.at("pricing"));

    if (!j.contains("tasks") || !j.at("tasks").is_array()) {
        throw Error(ErrorKind::Validation, "profiles.tasks: required array missing");
    }
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& tj : j.at("tasks")) {
        const std::string where = "profiles.tasks[" + std::to_string(index++) + "]";
        if (!tj.contains("category") || !tj.at("category").is_string() || tj.at("category").get<std::string>().empty()) {
            throw Error(ErrorKind::Validation, where + ".category: required non-empty string");
        }
        auto category = tj.at("category").get<std::string>();
        if (!seen.insert(category).second) {
            throw Error(ErrorKind::Validation, where + ": duplicate category '" + category + "'");
        }
        if (!tj.contains("high") || !tj.contains("low")) {
            throw Error(ErrorKind::Validation, where + ": both 'high' and 'low' metrics are required");
        }
        auto high = metrics_from_json(tj.at("high"), where + ".high");
        auto low = metrics_from_json(tj.at("low"), where + ".low");
        high.validate(set.unit, where + ".high");
        low.validate(set.unit, where + ".low");
        set.tasks.push_back(make_profile(std::move(category), high, low, set.thresholds));
    }
    return set;
}

}  // namespace

ProfileSet profiles_from_json(const json& j) {
    try {
        return parse_profiles(j);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("profiles: ") + e.what());
    }
}

json to_json(const ProfileSet& set) {
    json tasks = json::array();
    for (const auto& t : set.tasks) {
        tasks.push_back({{"category", t.task_category},
                         {"high", metrics_to_json(t.high)},
                         {"low", metrics_to_json(t.low)},
                         {"rel_degradation", t.rel_degradation},
                         {"group", to_string(t.group)}});
    }
    json j = {{"unit", to_string(set.unit)},
              {"thresholds", {{"low", set.thresholds.low}, {"high", set.thresholds.high}}},
              {"high_precision", to_string(set.high_precision)},
              {"low_precision", to_string(set.low_precision)},
              {"tasks", std::move(tasks)}};
    if (set.pricing) j["pricing"] = to_json(*set.pricing);
    return j;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Validation, "cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Validation, "'" + path.string() + "': invalid JSON: " + e.what());
    }
}

ProfileSet load_profiles(const std::filesystem::path& path) {
    try {
        return profiles_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, "'" + path.string() + "': " + e.what());
    }
}

namespace {

struct ArmAccumulator {
    std::size_t trials = 0;
    VariantMetrics mean;
    double best = 0.0;

    void add(const VariantMetrics& m) {
        ++trials;
        const auto k = static_cast<double>(trials);
        // Running means stay exact when every trial carries the same value.
        mean.score += (m.score - mean.score) / k;
        mean.cost_usd += (m.cost_usd - mean.cost_usd) / k;
        mean.latency_s += (m.latency_s - mean.latency_s) / k;
        best = trials == 1 ? m.score : std::max(best, m.score);
    }

    VariantMetrics result() const {
        VariantMetrics out = mean;
        out.best_score = best;
        return out;
    }
};

}  // namespace

ProfileSet build_profiles(std::span<const TrialRow> rows, ScoreUnit unit, const SensitivityThresholds& thresholds,
                          std::optional<PricingRule> pricing) {
    thresholds.validate();
    if (rows.empty()) throw Error(ErrorKind::InsufficientData, "results contain no trial rows");

    std::vector<std::string> order;
    std::map<std::string, std::map<PrecisionLevel, ArmAccumulator>> arms;
    for (const auto& row : rows) {
        if (row.task.empty()) throw Error(ErrorKind::Validation, "results: trial row with empty task");
        row.metrics.validate(unit, "results[" + row.task + "/" + std::string(to_string(row.precision)) + "]");
        if (!arms.contains(row.task)) order.push_back(row.task);
        arms[row.task][row.precision].add(row.metrics);
    }

    ProfileSet set;
    set.unit = unit;
    set.thresholds = thresholds;
    set.pricing = pricing;
    bool first = true;
    for (const auto& task : order) {
        const auto& by_precision = arms.at(task);
        if (by_precision.size() != 2) {
            throw Error(ErrorKind::Validation, "task '" + task + "': expected exactly two precision arms, found " +
                                                   std::to_string(by_precision.size()));
        }
        auto it = by_precision.begin();
        const auto& [p1, a1] = *it++;
        const auto& [p2, a2] = *it;
        if (bit_width(p1) == bit_width(p2)) {
            throw Error(ErrorKind::Validation, "task '" + task + "': both arms have the same bit width");
        }
        const bool first_is_high = higher_precision(p1, p2);
        const PrecisionLevel hp = first_is_high ? p1 : p2;
        const PrecisionLevel lp = first_is_high ? p2 : p1;
        const auto& high = first_is_high ? a1 : a2;
        const auto& low = first_is_high ? a2 : a1;
        if (first || higher_precision(hp, set.high_precision)) set.high_precision = hp;
        if (first || higher_precision(set.low_precision, lp)) set.low_precision = lp;
        first = false;
        set.tasks.push_back(make_profile(task, high.result(), low.result(), thresholds));
    }
    return set;
}

ProfileSet build_profiles_from_results(const json& results) {
    try {
        if (!results.is_object()) throw Error(ErrorKind::Validation, "results: expected a JSON object");
        if (!results.contains("unit")) throw Error(ErrorKind::Validation, "results.unit: required field missing");
        const auto unit = parse_unit(results.at("unit").get<std::string>());
        const auto thresholds = thresholds_from_json(results);
        std::optional<PricingRule> pricing;
        if (results.contains("pricing") && !results.at("pricing").is_null()) {
            pricing = pricing_from_json(results.at("pricing"));
        }
        if (!results.contains("rows") || !results.at("rows").is_array()) {
            throw Error(ErrorKind::Validation, "results.rows: required array missing");
        }
        std::vector<TrialRow> rows;
        std::size_t index = 0;
        for (const auto& rj : results.at("rows")) {
            const std::string where = "results.rows[" + std::to_string(index++) + "]";
            TrialRow row;
            if (!rj.contains("task") || !rj.at("task").is_string()) {
                throw Error(ErrorKind::Validation, where + ".task: required string missing");
            }
            row.task = rj.at("task").get<std::string>();
            if (!rj.contains("precision")) throw Error(ErrorKind::Validation, where + ".precision: required");
            row.precision = parse_precision(rj.at("precision").get<std::string>());
            row.metrics = metrics_from_json(rj, where);
            row.metrics.best_score.reset();
            rows.push_back(std::move(row));
        }
        return build_profiles(rows, unit, thresholds, pricing);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("results: ") + e.what());
    }
}

}  // namespace quantclaw::profile
