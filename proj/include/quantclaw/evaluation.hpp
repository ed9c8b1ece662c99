#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace quantclaw::detection {

struct LabeledQuery {
    std::string query;
    std::string label;
    std::optional<std::string> predicted;  // present in replay corpora
};

/// Line-delimited {query, label[, predicted]} records. Blank lines are skipped.
std::vector<LabeledQuery> load_corpus(const std::filesystem::path& path);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct DetectorReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;  // mean over classes with support > 0
    double avg_time_s = 0.0;
    std::vector<std::string> labels;                  // row/column order of `confusion`
    std::vector<std::vector<std::uint64_t>> confusion;  // [gold][predicted]
    std::map<std::string, ClassMetrics> per_class;
};

/// Derives accuracy and per-class/macro metrics from a confusion matrix.
DetectorReport report_from_confusion(std::vector<std::string> labels, std::vector<std::vector<std::uint64_t>> confusion,
                                     double avg_time_s = 0.0);

using Detector = std::function<std::string(std::string_view query)>;

/// Runs `detector` over the corpus. Throws Error(InsufficientData) when empty.
DetectorReport evaluate_detector(const Detector& detector, std::span<const LabeledQuery> corpus);

nlohmann::json to_json(const DetectorReport& report);
DetectorReport detector_report_from_json(const nlohmann::json& j);

}  // namespace quantclaw::detection
