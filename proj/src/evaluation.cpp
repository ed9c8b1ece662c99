#include "quantclaw/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include "quantclaw/detection.hpp"
#include "quantclaw/errors.hpp"

namespace quantclaw::detection {

using nlohmann::json;

std::vector<LabeledQuery> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Validation, "cannot open corpus '" + path.string() + "'");
    std::vector<LabeledQuery> corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            LabeledQuery q;
            q.query = j.at("query").get<std::string>();
            q.label = normalize_category_id(j.at("label").get<std::string>());
            if (j.contains("predicted")) q.predicted = normalize_category_id(j.at("predicted").get<std::string>());
            corpus.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Validation,
                        path.string() + ":" + std::to_string(line_no) + ": bad corpus record: " + e.what());
        }
    }
    return corpus;
}

DetectorReport report_from_confusion(std::vector<std::string> labels, std::vector<std::vector<std::uint64_t>> confusion,
                                     double avg_time_s) {
    const std::size_t n = labels.size();
    if (confusion.size() != n) throw Error(ErrorKind::Validation, "confusion matrix row count != label count");
    for (const auto& row : confusion) {
        if (row.size() != n) throw Error(ErrorKind::Validation, "confusion matrix is not square");
    }

    DetectorReport report;
    report.avg_time_s = avg_time_s;
    std::uint64_t total = 0, diagonal = 0;
    std::vector<std::uint64_t> predicted(n, 0), support(n, 0);
    for (std::size_t g = 0; g < n; ++g) {
        for (std::size_t p = 0; p < n; ++p) {
            total += confusion[g][p];
            support[g] += confusion[g][p];
            predicted[p] += confusion[g][p];
        }
        diagonal += confusion[g][g];
    }
    if (total == 0) throw Error(ErrorKind::InsufficientData, "confusion matrix is empty");
    report.accuracy = static_cast<double>(diagonal) / static_cast<double>(total);

    double f1_sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ClassMetrics m;
        const auto tp = static_cast<double>(confusion[i][i]);
        m.support = support[i];
        m.precision = predicted[i] > 0 ? tp / static_cast<double>(predicted[i]) : 0.0;
        m.recall = support[i] > 0 ? tp / static_cast<double>(support[i]) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.support > 0) {
            f1_sum += m.f1;
            ++supported;
        }
        report.per_class[labels[i]] = m;
    }
    report.macro_f1 = supported > 0 ? f1_sum / static_cast<double>(supported) : 0.0;
    report.labels = std::move(labels);
    report.confusion = std::move(confusion);
    return report;
}

DetectorReport evaluate_detector(const Detector& detector, std::span<const LabeledQuery> corpus) {
    if (corpus.empty()) throw Error(ErrorKind::InsufficientData, "detector evaluation needs a non-empty corpus");

    std::vector<std::string> predictions;
    predictions.reserve(corpus.size());
    double elapsed = 0.0;
    for (const auto& item : corpus) {
        const auto start = std::chrono::steady_clock::now();
        predictions.push_back(normalize_category_id(detector(item.query)));
        elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    std::set<std::string> label_set;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        label_set.insert(corpus[i].label);
        label_set.insert(predictions[i]);
    }
    std::vector<std::string> labels(label_set.begin(), label_set.end());
    auto index_of = [&](const std::string& l) {
        return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
    };
    std::vector<std::vector<std::uint64_t>> confusion(labels.size(), std::vector<std::uint64_t>(labels.size(), 0));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        ++confusion[index_of(corpus[i].label)][index_of(predictions[i])];
    }
    return report_from_confusion(std::move(labels), std::move(confusion),
                                 elapsed / static_cast<double>(corpus.size()));
}

json to_json(const DetectorReport& report) {
    json per_class = json::object();
    for (const auto& [label, m] : report.per_class) {
        per_class[label] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    }
    return {{"accuracy", report.accuracy},     {"macro_f1", report.macro_f1},   {"avg_time_s", report.avg_time_s},
            {"labels", report.labels},         {"confusion", report.confusion}, {"per_class", per_class}};
}

DetectorReport detector_report_from_json(const json& j) {
    try {
        auto report = report_from_confusion(j.at("labels").get<std::vector<std::string>>(),
                                            j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>(),
                                            j.at("avg_time_s").get<double>());
        return report;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("detector report: ") + e.what());
    }
}

}  // namespace quantclaw::detection
