#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "quantclaw/analytics.hpp"
#include "quantclaw/errors.hpp"
#include "quantclaw/precision.hpp"
#include "quantclaw/profiles.hpp"
#include "quantclaw/report_io.hpp"
#include "test_support.hpp"

using namespace quantclaw;
using namespace quantclaw::profile;

namespace {

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Runtime;
}

// Closed-form line through two points in log-log space.
std::pair<double, double> two_point_oracle(double n1, double d1, double n2, double d2) {
    const double b = (std::log(d2) - std::log(d1)) / (std::log(n2) - std::log(n1));
    const double a = std::exp(std::log(d1) - b * std::log(n1));
    return {a, b};
}

}  // namespace

TEST_CASE("precision levels map to bit widths and order by bits") {
    CHECK(bit_width(PrecisionLevel::BF16) == 16);
    CHECK(bit_width(PrecisionLevel::FP8) == 8);
    CHECK(bit_width(PrecisionLevel::INT8) == 8);
    CHECK(bit_width(PrecisionLevel::INT4) == 4);
    CHECK(bit_width(PrecisionLevel::NVFP4) == 4);
    CHECK(higher_precision(PrecisionLevel::BF16, PrecisionLevel::FP8));
    CHECK(higher_precision(PrecisionLevel::INT8, PrecisionLevel::NVFP4));
    CHECK_FALSE(higher_precision(PrecisionLevel::INT4, PrecisionLevel::NVFP4));
    CHECK(parse_precision("nvfp4") == PrecisionLevel::NVFP4);
    CHECK(kind_of([] { parse_precision("fp3"); }) == ErrorKind::Validation);
    CHECK(tier_label(16) == "16-bit");
    CHECK(parse_tier_label("4-bit") == 4);
    CHECK(parse_tier_label("5-bit") == 0);
}

TEST_CASE("relative degradation reproduces the benchmark rows") {
    CHECK(std::abs(relative_degradation(0.6370, 0.6034) - 0.05275) < 1e-5);
    CHECK(std::abs(relative_degradation(0.7130, 0.7229) - (-0.01388)) < 1e-5);
    for (double x : {0.01, 0.5, 1.0, 83.2}) CHECK(relative_degradation(x, x) == 0.0);
}

TEST_CASE("relative degradation rejects a non-positive high score") {
    try {
        relative_degradation(0.0, 0.3, "research");
        FAIL("expected a domain error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Domain);
        CHECK(std::string(e.what()).find("research") != std::string::npos);
    }
    CHECK(kind_of([] { relative_degradation(-1.0, 0.3); }) == ErrorKind::Domain);
}

TEST_CASE("relative degradation flips sign when scores swap") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double h = u(rng), l = u(rng);
        const double fwd = relative_degradation(h, l);
        const double rev = relative_degradation(l, h);
        if (h == l) continue;
        CHECK((fwd > 0) == (rev < 0));
    }
}

TEST_CASE("sensitivity classification with default thresholds") {
    const SensitivityThresholds t;
    CHECK(t.low == 0.005);
    CHECK(t.high == 0.02);
    CHECK(classify_sensitivity(0.0527, t) == SensitivityGroup::High);
    CHECK(classify_sensitivity(-0.0139, t) == SensitivityGroup::Low);
    CHECK(classify_sensitivity(t.high, t) == SensitivityGroup::High);
    CHECK(classify_sensitivity(t.low, t) == SensitivityGroup::Low);
    CHECK(classify_sensitivity(0.01, t) == SensitivityGroup::Moderate);
    CHECK(kind_of([] { SensitivityThresholds{0.02, 0.02}.validate(); }) == ErrorKind::Validation);
    CHECK(kind_of([] { classify_sensitivity(0.1, SensitivityThresholds{0.03, 0.02}); }) == ErrorKind::Validation);
}

TEST_CASE("sensitivity classification is monotone") {
    const SensitivityThresholds t;
    auto rank = [](SensitivityGroup g) { return g == SensitivityGroup::Low ? 0 : g == SensitivityGroup::Moderate ? 1 : 2; };
    std::vector<double> xs;
    for (int i = -200; i <= 400; ++i) xs.push_back(i * 1e-4);
    xs.push_back(t.low);
    xs.push_back(t.high);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) {
        CHECK(rank(classify_sensitivity(xs[i - 1], t)) <= rank(classify_sensitivity(xs[i], t)));
    }
}

TEST_CASE("power-law fit recovers exact coefficients") {
    std::vector<DegradationPoint> pts;
    for (double n : {1.0, 10.0, 100.0}) pts.push_back({"", n, 0.05 * std::pow(n, -0.3)});
    const auto fit = fit_power_law(pts);
    CHECK(std::abs(fit.a - 0.05) < 1e-9);
    CHECK(std::abs(fit.b + 0.3) < 1e-9);
    CHECK(std::abs(fit.r_squared - 1.0) < 1e-9);
    CHECK(fit.points_used == 3);
    CHECK(fit.excluded.empty());
}

TEST_CASE("power-law fit matches the two-point closed form") {
    const double a = 0.0123, b = -0.41;
    const double n1 = 2.5, n2 = 480.0;
    const auto [oa, ob] = two_point_oracle(n1, a * std::pow(n1, b), n2, a * std::pow(n2, b));
    std::vector<DegradationPoint> pts = {{"x", n1, a * std::pow(n1, b)}, {"y", n2, a * std::pow(n2, b)}};
    const auto fit = fit_power_law(pts);
    CHECK(std::abs(fit.a - oa) < 1e-9);
    CHECK(std::abs(fit.b - ob) < 1e-9);
}

TEST_CASE("power-law fit is exact and order-independent on randomized inputs") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ua(0.001, 0.5), ub(-1.2, -0.05), un(0.5, 2000.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = ua(rng), b = ub(rng);
        std::vector<DegradationPoint> pts;
        const int k = 3 + trial % 6;
        for (int i = 0; i < k; ++i) {
            const double n = un(rng);
            pts.push_back({"m" + std::to_string(i), n, a * std::pow(n, b)});
        }
        const auto fit = fit_power_law(pts);
        CHECK(std::abs(fit.a - a) < 1e-9);
        CHECK(std::abs(fit.b - b) < 1e-9);
        CHECK(std::abs(fit.r_squared - 1.0) < 1e-9);
        for (const auto& p : pts) CHECK(std::abs(predict_delta(fit, p.n_params_b) - p.delta) < 1e-9);
        std::shuffle(pts.begin(), pts.end(), rng);
        const auto again = fit_power_law(pts);
        CHECK(again.a == fit.a);
        CHECK(again.b == fit.b);
        CHECK(again.r_squared == fit.r_squared);
    }
}

TEST_CASE("power-law fit over measured gaps excludes the two negative gaps") {
    const auto pts = load_points(testing::fixture("degradation_gaps.json"));
    REQUIRE(pts.size() == 6);
    const auto fit = fit_power_law(pts);
    CHECK(fit.points_used == 4);
    CHECK(fit.excluded.size() == 2);
    CHECK(fit.b < 0.0);
    CHECK(fit.a > 0.0);
    CHECK(fit.r_squared >= 0.0);
    CHECK(fit.r_squared <= 1.0);
}

TEST_CASE("power-law fit needs two usable points") {
    std::vector<DegradationPoint> one = {{"a", 10.0, 0.02}, {"b", 20.0, -0.01}, {"c", 30.0, 0.0}};
    try {
        fit_power_law(one);
        FAIL("expected insufficient data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
        CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
    std::vector<DegradationPoint> same_n = {{"a", 10.0, 0.02}, {"b", 10.0, 0.03}};
    CHECK(kind_of([&] { fit_power_law(same_n); }) == ErrorKind::InsufficientData);
    std::vector<DegradationPoint> bad_n = {{"a", 0.0, 0.02}, {"b", 10.0, 0.03}};
    CHECK(kind_of([&] { fit_power_law(bad_n); }) == ErrorKind::Domain);
}

TEST_CASE("predict_delta evaluates the fitted law") {
    ScalingFit fit{0.079, -0.273, 1.0, 2, {}};
    CHECK(std::abs(predict_delta(fit, 30.0) - 0.0312) < 1e-3);
    CHECK(predict_delta(fit, 1.0) == doctest::Approx(0.079));
    double prev = predict_delta(fit, 0.5);
    for (double n = 1.0; n < 5000.0; n *= 1.7) {
        const double cur = predict_delta(fit, n);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(kind_of([&] { predict_delta(fit, 0.0); }) == ErrorKind::Domain);
}

TEST_CASE("discounted price applies the NVFP4 and INT4 factors") {
    const PricePair high{10.0, 10.0};
    CHECK(discounted_price(PricingRule{high, 0.80}) == PricePair{8.0, 8.0});
    CHECK(discounted_price(PricingRule{high, 0.85}) == PricePair{8.5, 8.5});
    const PricePair odd{3.7, 11.3};
    CHECK(discounted_price(odd, 1.0) == odd);
    CHECK(kind_of([&] { discounted_price(odd, 0.0); }) == ErrorKind::Validation);
    CHECK(kind_of([&] { discounted_price(odd, 1.01); }) == ErrorKind::Validation);
}

TEST_CASE("double discount composes multiplicatively") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uf(0.01, 1.0), up(0.01, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const PricePair p{up(rng), up(rng)};
        const double f1 = uf(rng), f2 = uf(rng);
        const auto twice = discounted_price(discounted_price(p, f1), f2);
        const auto once = discounted_price(p, f1 * f2);
        CHECK(twice.input_per_mtok == doctest::Approx(once.input_per_mtok).epsilon(1e-12));
        CHECK(twice.output_per_mtok == doctest::Approx(once.output_per_mtok).epsilon(1e-12));
    }
}

TEST_CASE("request cost is linear in tokens") {
    CHECK(request_cost(1'000'000, 0, PricePair{8.0, 0.0}) == doctest::Approx(8.0));
    CHECK(request_cost(0, 0, PricePair{5.0, 9.0}) == 0.0);
    CHECK(std::abs(request_cost(2000, 4000, PricePair{2.0, 6.0}) - 0.028) < 1e-15);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> ut(0, 1'000'000);
    const PricePair p{1.25, 7.5};
    for (int i = 0; i < 500; ++i) {
        const auto a_in = ut(rng), a_out = ut(rng), b_in = ut(rng), b_out = ut(rng);
        CHECK(request_cost(a_in + b_in, a_out + b_out, p) ==
              doctest::Approx(request_cost(a_in, a_out, p) + request_cost(b_in, b_out, p)).epsilon(1e-12));
    }
}

TEST_CASE("throughput gain reproduces the published per-row gains") {
    const auto rows = load_throughput(testing::fixture("throughput_rows.json"));
    const auto j = read_json_file(testing::fixture("throughput_rows.json"));
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double printed = j.at("rows")[i].at("printed_gain_pct").get<double>();
        CHECK(std::abs(throughput_gain(rows[i]) * 100.0 - printed) <= 0.01);
    }
    CHECK(std::abs(throughput_gain(rows[0]) - 0.2401) < 1e-4);
    const double avg = average_throughput_gain(rows);
    CHECK(std::abs(avg - 0.1434) < 0.0005);

    auto shuffled = rows;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(average_throughput_gain(shuffled) == avg);
    }
    std::vector<ThroughputRow> flat = {{1, 1, 100, 100}, {2, 2, 50, 50}};
    CHECK(average_throughput_gain(flat) == 0.0);
    CHECK(kind_of([] { average_throughput_gain(std::span<const ThroughputRow>{}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("SLO pass rate counts samples meeting both limits") {
    std::vector<LatencySample> all_pass(10, LatencySample{100, 5});
    CHECK(slo_pass_rate(all_pass, 500, 10) == 1.0);

    std::vector<LatencySample> nine(9, LatencySample{100, 5});
    nine.push_back({600, 5});
    CHECK(slo_pass_rate(nine, 500, 10) == doctest::Approx(0.9));
    CHECK(meets_slo(slo_pass_rate(nine, 500, 10)));

    std::vector<LatencySample> tpot(8, LatencySample{100, 5});
    tpot.push_back({100, 12});
    tpot.push_back({100, 10.5});
    CHECK(slo_pass_rate(tpot, 500, 10) == doctest::Approx(0.8));
    CHECK_FALSE(meets_slo(0.8));

    CHECK(kind_of([] { slo_pass_rate(std::span<const LatencySample>{}, 500, 10); }) == ErrorKind::InsufficientData);
    CHECK(kind_of([&] { slo_pass_rate(all_pass, 0, 10); }) == ErrorKind::Validation);
}

TEST_CASE("fit report round-trips through JSON") {
    const auto pts = load_points(testing::fixture("degradation_gaps.json"));
    const auto fit = fit_power_law(pts);
    const auto back = scaling_fit_from_json(to_json(fit));
    CHECK(back.a == fit.a);
    CHECK(back.b == fit.b);
    CHECK(back.r_squared == fit.r_squared);
    CHECK(back.points_used == fit.points_used);
    REQUIRE(back.excluded.size() == fit.excluded.size());
    CHECK(back.excluded[0].model_id == fit.excluded[0].model_id);
}
