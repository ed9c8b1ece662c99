#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "quantclaw/classifier.hpp"
#include "quantclaw/detection.hpp"
#include "quantclaw/errors.hpp"
#include "quantclaw/evaluation.hpp"
#include "quantclaw/profiles.hpp"
#include "test_support.hpp"

using namespace quantclaw;
using namespace quantclaw::detection;

namespace {

// Per-class F1 of the hand matrix [[8,2,0],[1,9,0],[0,0,10]].
constexpr double kHandF1Code = 2.0 * (8.0 / 9.0) * 0.8 / ((8.0 / 9.0) + 0.8);
constexpr double kHandF1Research = 2.0 * (9.0 / 11.0) * 0.9 / ((9.0 / 11.0) + 0.9);
constexpr double kHandMacroF1 = (kHandF1Code + kHandF1Research + 1.0) / 3.0;

// Independent recount of accuracy and macro-F1 from a confusion matrix.
std::pair<double, double> recount(const std::vector<std::vector<std::uint64_t>>& m) {
    const std::size_t n = m.size();
    double total = 0, diag = 0, f1_sum = 0;
    int classes = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0, col = 0;
        for (std::size_t k = 0; k < n; ++k) {
            row += static_cast<double>(m[i][k]);
            col += static_cast<double>(m[k][i]);
            total += static_cast<double>(m[i][k]);
        }
        diag += static_cast<double>(m[i][i]);
        if (row == 0) continue;
        const double p = col > 0 ? m[i][i] / col : 0.0;
        const double r = m[i][i] / row;
        f1_sum += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
        ++classes;
    }
    return {diag / total, f1_sum / classes};
}

std::vector<LabeledQuery> replay_corpus(const std::string& name) { return load_corpus(testing::fixture(name)); }

Detector replayer(const std::vector<LabeledQuery>& corpus) {
    auto next = std::make_shared<std::size_t>(0);
    return [&corpus, next](std::string_view) { return *corpus[(*next)++].predicted; };
}

}  // namespace

TEST_CASE("hand-built confusion fixture reproduces accuracy and macro-F1") {
    const auto corpus = replay_corpus("detector_confusion_fixture.jsonl");
    REQUIRE(corpus.size() == 30);
    const auto report = evaluate_detector(replayer(corpus), corpus);
    CHECK(report.labels == std::vector<std::string>{"code", "research", "safety"});
    CHECK(report.confusion == std::vector<std::vector<std::uint64_t>>{{8, 2, 0}, {1, 9, 0}, {0, 0, 10}});
    CHECK(report.accuracy == doctest::Approx(0.90));
    CHECK(std::abs(report.macro_f1 - kHandMacroF1) < 1e-4);
    CHECK(std::abs(report.macro_f1 - 0.8997) < 1e-4);
    CHECK(report.per_class.at("code").precision == doctest::Approx(8.0 / 9.0));
    CHECK(report.per_class.at("research").recall == doctest::Approx(0.9));
    CHECK(report.per_class.at("safety").support == 10);
}

TEST_CASE("report from a confusion matrix") {
    const auto r = report_from_confusion({"code", "research", "safety"}, {{8, 2, 0}, {1, 9, 0}, {0, 0, 10}});
    CHECK(r.accuracy == doctest::Approx(0.9));
    CHECK(r.macro_f1 == doctest::Approx(kHandMacroF1));
    CHECK_THROWS_AS(report_from_confusion({"a", "b"}, {{1, 0}}), Error);
}

TEST_CASE("a perfect detector scores 1") {
    const auto corpus = replay_corpus("detector_corpus_100.jsonl");
    const auto r = evaluate_detector(
        [&](std::string_view q) {
            for (const auto& c : corpus) {
                if (c.query == q) return c.label;
            }
            return std::string("unknown");
        },
        corpus);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("a constant detector on a balanced 4-class corpus scores 0.25") {
    std::vector<LabeledQuery> corpus;
    for (const auto* label : {"code", "research", "analysis", "safety"}) {
        for (int i = 0; i < 5; ++i) corpus.push_back({std::string(label) + std::to_string(i), label, std::nullopt});
    }
    const auto r = evaluate_detector([](std::string_view) { return std::string("code"); }, corpus);
    CHECK(r.accuracy == doctest::Approx(0.25));
}

TEST_CASE("an empty corpus is insufficient data") {
    try {
        evaluate_detector([](std::string_view) { return std::string("x"); }, std::span<const LabeledQuery>{});
        FAIL("expected insufficient data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientData);
    }
}

TEST_CASE("zero-support classes are excluded from macro-F1") {
    std::vector<LabeledQuery> corpus = {{"a", "code", std::nullopt}, {"b", "code", std::nullopt}};
    std::vector<std::string> preds = {"code", "research"};
    std::size_t i = 0;
    const auto r = evaluate_detector([&](std::string_view) { return preds[i++]; }, corpus);
    CHECK(r.labels == std::vector<std::string>{"code", "research"});
    CHECK(r.per_class.at("research").support == 0);
    CHECK(r.macro_f1 == doctest::Approx(r.per_class.at("code").f1));
}

TEST_CASE("accuracy and macro-F1 match an independent recount on random matrices") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> cell(0, 12), size(2, 7);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = size(rng);
        std::vector<std::string> labels;
        for (int i = 0; i < n; ++i) labels.push_back("c" + std::to_string(i));
        std::vector<std::vector<std::uint64_t>> m(n, std::vector<std::uint64_t>(n));
        for (auto& row : m) {
            for (auto& x : row) x = static_cast<std::uint64_t>(cell(rng));
        }
        m[0][0] += 1;
        const auto r = report_from_confusion(labels, m);
        const auto [acc, f1] = recount(m);
        CHECK(r.accuracy == doctest::Approx(acc).epsilon(1e-12));
        CHECK(r.macro_f1 == doctest::Approx(f1).epsilon(1e-12));

        // Relabel classes in a shuffled order; the macro mean must not move.
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::string> plabels(n);
        std::vector<std::vector<std::uint64_t>> pm(n, std::vector<std::uint64_t>(n));
        for (int i = 0; i < n; ++i) {
            plabels[perm[i]] = labels[i];
            for (int k = 0; k < n; ++k) pm[perm[i]][perm[k]] = m[i][k];
        }
        const auto pr = report_from_confusion(plabels, pm);
        CHECK(pr.macro_f1 == doctest::Approx(r.macro_f1).epsilon(1e-12));
        CHECK(pr.accuracy == doctest::Approx(r.accuracy).epsilon(1e-12));
    }
}

TEST_CASE("the shipped 100-query corpus replays to its recorded confusion") {
    const auto corpus = replay_corpus("detector_corpus_100.jsonl");
    REQUIRE(corpus.size() == 100);
    const auto expected = profile::read_json_file(testing::fixture("detector_corpus_100_expected.json"));
    const auto r = evaluate_detector(replayer(corpus), corpus);
    CHECK(r.labels == expected.at("labels").get<std::vector<std::string>>());
    CHECK(r.confusion == expected.at("confusion").get<std::vector<std::vector<std::uint64_t>>>());
    CHECK(std::abs(r.accuracy - expected.at("accuracy").get<double>()) < 1e-12);
    CHECK(std::abs(r.macro_f1 - expected.at("macro_f1").get<double>()) < 1e-12);
}

TEST_CASE("the live hybrid detector reproduces the recorded predictions") {
    const auto registry = CategoryRegistry::defaults();
    const auto rules = load_rules(testing::config_file("rules.json"), registry);
    CentroidClassifier classifier(std::make_shared<HashingEmbedder>(),
                                  load_seeds(testing::config_file("seeds.json"), registry));
    for (const auto& c : replay_corpus("detector_corpus_100.jsonl")) {
        CHECK_MESSAGE(hybrid_detect(c.query, rules, &classifier, registry, "unknown").category == *c.predicted,
                      c.query);
    }
}

TEST_CASE("report JSON round-trips") {
    const auto corpus = replay_corpus("detector_confusion_fixture.jsonl");
    const auto r = evaluate_detector(replayer(corpus), corpus);
    const auto back = detector_report_from_json(to_json(r));
    CHECK(back.labels == r.labels);
    CHECK(back.confusion == r.confusion);
    CHECK(back.accuracy == r.accuracy);
    CHECK(back.macro_f1 == r.macro_f1);
    CHECK(back.avg_time_s == r.avg_time_s);
}

TEST_CASE("corpus loading reports the failing line") {
    testing::TempDir dir;
    {
        std::ofstream out(dir / "c.jsonl");
        out << R"({"query": "a", "label": "code"})" << "\n\n" << R"({"query": "b"})" << "\n";
    }
    try {
        load_corpus(dir / "c.jsonl");
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
}
