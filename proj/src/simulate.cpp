#include "quantclaw/simulate.hpp"

#include "quantclaw/errors.hpp"

namespace quantclaw::simulate {

using nlohmann::json;

std::vector<WorkloadRow> workload_from_json(const json& j) {
    try {
        const json& arr = j.is_object() ? j.at("requests") : j;
        std::vector<WorkloadRow> rows;
        for (const auto& rj : arr) {
            WorkloadRow row;
            row.category = detection::normalize_category_id(rj.at("category").get<std::string>());
            row.tokens_in = rj.at("tokens_in").get<std::uint64_t>();
            row.tokens_out = rj.at("tokens_out").get<std::uint64_t>();
            const auto repeat = rj.value("repeat", std::uint64_t{1});
            for (std::uint64_t i = 0; i < repeat; ++i) rows.push_back(row);
        }
        return rows;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("workload: ") + e.what());
    }
}

std::vector<WorkloadRow> load_workload(const std::filesystem::path& path) {
    return workload_from_json(profile::read_json_file(path));
}

double PolicyTotals::avg_cost_usd() const { return requests ? total_cost_usd / static_cast<double>(requests) : 0.0; }

double PolicyTotals::avg_expected_score() const {
    return profiled_requests ? total_expected_score / static_cast<double>(profiled_requests) : 0.0;
}

double PolicyTotals::avg_expected_latency_s() const {
    return profiled_requests ? total_expected_latency_s / static_cast<double>(profiled_requests) : 0.0;
}

std::optional<double> SimulationReport::cost_savings() const {
    if (!(all_high.total_cost_usd > 0.0)) return std::nullopt;
    return profile::relative_reduction(all_high.total_cost_usd, adaptive.total_cost_usd);
}

std::optional<double> SimulationReport::latency_savings() const {
    if (!(all_high.total_expected_latency_s > 0.0)) return std::nullopt;
    return profile::relative_reduction(all_high.total_expected_latency_s, adaptive.total_expected_latency_s);
}

namespace {

void account(PolicyTotals& totals, const WorkloadRow& row, const profile::SensitivityProfile* p, bool low,
             const profile::PricePair& high_prices, const profile::PricePair& low_prices) {
    ++totals.requests;
    if (low) ++totals.routed_low;
    totals.total_cost_usd += profile::request_cost(row.tokens_in, row.tokens_out, low ? low_prices : high_prices);
    if (p != nullptr) {
        ++totals.profiled_requests;
        const auto& m = low ? p->low : p->high;
        totals.total_expected_score += m.score;
        totals.total_expected_latency_s += m.latency_s;
    }
}

}  // namespace

SimulationReport simulate(std::span<const WorkloadRow> workload, const profile::ProfileSet& profiles,
                          routing::RoutingMode mode, const routing::PolicyConfig& policy,
                          const profile::PricingRule& pricing) {
    if (workload.empty()) throw Error(ErrorKind::InsufficientData, "workload has no requests");
    policy.validate();

    SimulationReport report;
    report.mode = mode;
    report.high_prices = pricing.high;
    report.low_prices = profile::discounted_price(pricing);
    report.all_high.policy = "all-high";
    report.all_low.policy = "all-low";
    report.adaptive.policy = "adaptive";

    const routing::PrecisionTiers tiers{profiles.high_precision, profiles.low_precision};
    std::size_t index = 0;
    for (const auto& row : workload) {
        const auto* p = profiles.find(row.category);
        if (p == nullptr) {
            report.warnings.push_back("row " + std::to_string(index) + ": category '" + row.category +
                                      "' has no profile; routed as NoProfileDefault");
        }
        const auto choice = routing::decide(row.category, profiles, mode, policy, tiers);
        const bool adaptive_low = bit_width(choice.precision) < bit_width(tiers.highest);
        ++report.adaptive_rationales[std::string(routing::to_string(choice.rationale))];

        account(report.all_high, row, p, false, report.high_prices, report.low_prices);
        account(report.all_low, row, p, true, report.high_prices, report.low_prices);
        account(report.adaptive, row, p, adaptive_low, report.high_prices, report.low_prices);
        ++index;
    }
    return report;
}

namespace {

json totals_to_json(const PolicyTotals& t) {
    return {{"policy", t.policy},
            {"requests", t.requests},
            {"routed_low", t.routed_low},
            {"profiled_requests", t.profiled_requests},
            {"total_cost_usd", t.total_cost_usd},
            {"total_expected_score", t.total_expected_score},
            {"total_expected_latency_s", t.total_expected_latency_s},
            {"avg_cost_usd", t.avg_cost_usd()},
            {"avg_expected_score", t.avg_expected_score()},
            {"avg_expected_latency_s", t.avg_expected_latency_s()}};
}

PolicyTotals totals_from_json(const json& j) {
    PolicyTotals t;
    t.policy = j.at("policy").get<std::string>();
    t.requests = j.at("requests").get<std::uint64_t>();
    t.routed_low = j.at("routed_low").get<std::uint64_t>();
    t.profiled_requests = j.at("profiled_requests").get<std::uint64_t>();
    t.total_cost_usd = j.at("total_cost_usd").get<double>();
    t.total_expected_score = j.at("total_expected_score").get<double>();
    t.total_expected_latency_s = j.at("total_expected_latency_s").get<double>();
    return t;
}

json prices_to_json(const profile::PricePair& p) {
    return {{"input_per_mtok", p.input_per_mtok}, {"output_per_mtok", p.output_per_mtok}};
}

}  // namespace

json to_json(const SimulationReport& r) {
    json j = {{"mode", routing::to_string(r.mode)},
              {"high_prices", prices_to_json(r.high_prices)},
              {"low_prices", prices_to_json(r.low_prices)},
              {"policies", json::array({totals_to_json(r.all_high), totals_to_json(r.all_low),
                                        totals_to_json(r.adaptive)})},
              {"warnings", r.warnings},
              {"adaptive_rationales", r.adaptive_rationales}};
    const auto cs = r.cost_savings();
    const auto ls = r.latency_savings();
    j["adaptive_cost_savings"] = cs ? json(*cs) : json(nullptr);
    j["adaptive_latency_savings"] = ls ? json(*ls) : json(nullptr);
    return j;
}

SimulationReport simulation_report_from_json(const json& j) {
    try {
        SimulationReport r;
        r.mode = routing::parse_mode(j.at("mode").get<std::string>());
        r.high_prices = {j.at("high_prices").at("input_per_mtok").get<double>(),
                         j.at("high_prices").at("output_per_mtok").get<double>()};
        r.low_prices = {j.at("low_prices").at("input_per_mtok").get<double>(),
                        j.at("low_prices").at("output_per_mtok").get<double>()};
        const auto& policies = j.at("policies");
        if (policies.size() != 3) throw Error(ErrorKind::Validation, "simulation report: expected three policies");
        r.all_high = totals_from_json(policies.at(0));
        r.all_low = totals_from_json(policies.at(1));
        r.adaptive = totals_from_json(policies.at(2));
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        r.adaptive_rationales = j.at("adaptive_rationales").get<std::map<std::string, std::uint64_t>>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("simulation report: ") + e.what());
    }
}

}  // namespace quantclaw::simulate
