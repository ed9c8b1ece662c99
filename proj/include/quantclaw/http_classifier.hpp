#pragma once

// HTTP clients for external detection backends.
//
//   embed: POST {"model", "input"} -> {"data": [{"embedding": [...]}]} or {"embedding": [...]}
//   label: POST {"text"}           -> {"category", "confidence"}

#include <chrono>
#include <string>

#include "quantclaw/detection.hpp"

namespace quantclaw::detection {

class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(std::string endpoint_url, std::string model, std::chrono::milliseconds timeout);
    std::vector<double> embed(std::string_view text) override;

private:
    std::string origin_;
    std::string path_;
    std::string model_;
    std::chrono::milliseconds timeout_;
};

class HttpLabelClient final : public ClassifierClient {
public:
    HttpLabelClient(std::string endpoint_url, std::chrono::milliseconds timeout);
    ClassifierLabel label(std::string_view query) override;

private:
    std::string origin_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

}  // namespace quantclaw::detection
