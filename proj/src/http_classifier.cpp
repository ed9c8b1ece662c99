#include "quantclaw/http_classifier.hpp"

#include <httplib.h>

#include "quantclaw/errors.hpp"
#include "quantclaw/pool.hpp"

namespace quantclaw::detection {

using nlohmann::json;

namespace {

json post_json(const std::string& origin, const std::string& path, const json& body,
               std::chrono::milliseconds timeout) {
    httplib::Client cli(origin);
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::DetectionBackend, "classifier backend " + origin + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorKind::DetectionBackend,
                    "classifier backend " + origin + path + " answered HTTP " + std::to_string(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error&) {
        throw Error(ErrorKind::Protocol, "classifier backend " + origin + path + " returned non-JSON");
    }
}

}  // namespace

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string endpoint_url, std::string model,
                                           std::chrono::milliseconds timeout)
    : model_(std::move(model)), timeout_(timeout) {
    std::tie(origin_, path_) = pool::split_endpoint(endpoint_url, "/v1/embeddings");
}

std::vector<double> HttpEmbeddingBackend::embed(std::string_view text) {
    const auto reply = post_json(origin_, path_, {{"model", model_}, {"input", std::string(text)}}, timeout_);
    try {
        if (reply.contains("data")) return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        return reply.at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Protocol, std::string("embedding reply: ") + e.what());
    }
}

HttpLabelClient::HttpLabelClient(std::string endpoint_url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    std::tie(origin_, path_) = pool::split_endpoint(endpoint_url, "/v1/label");
}

ClassifierLabel HttpLabelClient::label(std::string_view query) {
    const auto reply = post_json(origin_, path_, {{"text", std::string(query)}}, timeout_);
    try {
        return {reply.at("category").get<std::string>(), reply.at("confidence").get<double>()};
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Protocol, std::string("label reply: ") + e.what());
    }
}

}  // namespace quantclaw::detection
