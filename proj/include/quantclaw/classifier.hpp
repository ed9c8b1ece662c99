#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "quantclaw/detection.hpp"

namespace quantclaw::detection {

/// Deterministic bag-of-words feature hashing. Needs no external service, so it
/// backs the default centroid classifier and the tests.
class HashingEmbedder final : public EmbeddingBackend {
public:
    explicit HashingEmbedder(std::size_t dims = 256);
    std::vector<double> embed(std::string_view text) override;

private:
    std::size_t dims_;
};

using CategorySeeds = std::map<std::string, std::vector<std::string>>;

/// Seeds file: {"seeds": {"<category>": ["example query", ...], ...}}.
CategorySeeds load_seeds(const std::filesystem::path& path, const CategoryRegistry& registry);

/// Nearest-centroid classifier under cosine similarity. Centroids are the means of the
/// unit-normalized seed embeddings; confidence is (1 + cos) / 2. Equal similarities
/// resolve to the lexicographically smallest category id.
class CentroidClassifier final : public ClassifierClient {
public:
    /// Centroids are computed on first use so a slow embedding service cannot block startup.
    CentroidClassifier(std::shared_ptr<EmbeddingBackend> backend, CategorySeeds seeds);
    CentroidClassifier(std::shared_ptr<EmbeddingBackend> backend, std::map<std::string, std::vector<double>> centroids);

    ClassifierLabel label(std::string_view query) override;

    const std::map<std::string, std::vector<double>>& centroids();

private:
    void ensure_centroids();

    std::shared_ptr<EmbeddingBackend> backend_;
    CategorySeeds seeds_;
    std::mutex mutex_;
    std::optional<std::map<std::string, std::vector<double>>> centroids_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Returns a fixed label, or throws Error(DetectionBackend) when marked unavailable.
/// Counts calls so tests can observe short-circuiting.
class FixedClassifier final : public ClassifierClient {
public:
    explicit FixedClassifier(ClassifierLabel label) : label_(std::move(label)) {}

    ClassifierLabel label(std::string_view query) override;

    void set_available(bool available) { available_ = available; }
    std::size_t calls() const { return calls_.load(); }

private:
    ClassifierLabel label_;
    std::atomic<bool> available_{true};
    std::atomic<std::size_t> calls_{0};
};

}  // namespace quantclaw::detection
