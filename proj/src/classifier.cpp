#include "quantclaw/classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "quantclaw/errors.hpp"
#include "quantclaw/profiles.hpp"

namespace quantclaw::detection {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dims) : dims_(dims) {
    if (dims_ == 0) throw Error(ErrorKind::Validation, "hashing embedder: dims must be > 0");
}

std::vector<double> HashingEmbedder::embed(std::string_view text) {
    std::vector<double> v(dims_, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const auto h = fnv1a(token);
        v[h % dims_] += (h >> 63) ? -1.0 : 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return v;
}

CategorySeeds load_seeds(const std::filesystem::path& path, const CategoryRegistry& registry) {
    const auto j = profile::read_json_file(path);
    if (!j.is_object() || !j.contains("seeds") || !j.at("seeds").is_object()) {
        throw Error(ErrorKind::Validation, "'" + path.string() + "': expected {\"seeds\": {category: [..]}}");
    }
    CategorySeeds seeds;
    for (const auto& [raw, examples] : j.at("seeds").items()) {
        auto id = normalize_category_id(raw);
        if (!registry.contains(id)) {
            throw Error(ErrorKind::Validation, "seeds: category '" + id + "' is not registered");
        }
        if (!examples.is_array() || examples.empty()) {
            throw Error(ErrorKind::Validation, "seeds." + id + ": needs at least one example");
        }
        seeds[id] = examples.get<std::vector<std::string>>();
    }
    if (seeds.empty()) throw Error(ErrorKind::Validation, "seeds: no categories");
    return seeds;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Protocol, "embedding dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                             std::to_string(b.size()) + ")");
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::Protocol, "embedding has zero norm");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

CentroidClassifier::CentroidClassifier(std::shared_ptr<EmbeddingBackend> backend, CategorySeeds seeds)
    : backend_(std::move(backend)), seeds_(std::move(seeds)) {
    if (!backend_) throw Error(ErrorKind::Validation, "centroid classifier: missing embedding backend");
}

CentroidClassifier::CentroidClassifier(std::shared_ptr<EmbeddingBackend> backend,
                                       std::map<std::string, std::vector<double>> centroids)
    : backend_(std::move(backend)), centroids_(std::move(centroids)) {
    if (!backend_) throw Error(ErrorKind::Validation, "centroid classifier: missing embedding backend");
    if (centroids_->empty()) throw Error(ErrorKind::Validation, "centroid classifier: no centroids");
}

void CentroidClassifier::ensure_centroids() {
    std::lock_guard lock(mutex_);
    if (centroids_) return;
    std::map<std::string, std::vector<double>> built;
    for (const auto& [category, examples] : seeds_) {
        std::vector<double> sum;
        std::size_t used = 0;
        for (const auto& ex : examples) {
            auto v = backend_->embed(ex);
            const double n = norm(v);
            if (n == 0.0) continue;
            if (sum.empty()) sum.assign(v.size(), 0.0);
            if (v.size() != sum.size()) throw Error(ErrorKind::Protocol, "embedding dimension mismatch in seeds");
            for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i] / n;
            ++used;
        }
        if (used == 0) continue;
        for (auto& x : sum) x /= static_cast<double>(used);
        built.emplace(category, std::move(sum));
    }
    if (built.empty()) throw Error(ErrorKind::Validation, "centroid classifier: no usable seed embeddings");
    centroids_ = std::move(built);
}

const std::map<std::string, std::vector<double>>& CentroidClassifier::centroids() {
    ensure_centroids();
    return *centroids_;
}

ClassifierLabel CentroidClassifier::label(std::string_view query) {
    ensure_centroids();
    const auto v = backend_->embed(query);
    constexpr double kTieEpsilon = 1e-12;
    std::optional<ClassifierLabel> best;
    double best_sim = -2.0;
    // std::map iterates ids in lexicographic order, so a later id only wins when strictly closer.
    for (const auto& [category, centroid] : *centroids_) {
        const double sim = cosine_similarity(v, centroid);
        if (!best || sim > best_sim + kTieEpsilon) {
            best_sim = sim;
            best = ClassifierLabel{category, std::clamp((1.0 + sim) / 2.0, 0.0, 1.0)};
        }
    }
    return *best;
}

ClassifierLabel FixedClassifier::label(std::string_view) {
    ++calls_;
    if (!available_) throw Error(ErrorKind::DetectionBackend, "classifier backend unavailable");
    return label_;
}

}  // namespace quantclaw::detection
