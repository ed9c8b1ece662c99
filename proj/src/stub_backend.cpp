#include "quantclaw/stub_backend.hpp"

#include <httplib.h>

#include "quantclaw/classifier.hpp"
#include "quantclaw/errors.hpp"

namespace quantclaw::stub {

using nlohmann::json;

StubBackend::StubBackend(StubBehavior behavior) : behavior_(std::move(behavior)) {}

StubBackend::~StubBackend() { stop(); }

void StubBackend::set_behavior(StubBehavior behavior) {
    std::lock_guard lock(mutex_);
    behavior_ = std::move(behavior);
}

StubBehavior StubBackend::behavior() const {
    std::lock_guard lock(mutex_);
    return behavior_;
}

json StubBackend::last_request() const {
    std::lock_guard lock(mutex_);
    return last_request_;
}

std::string StubBackend::origin() const { return "http://" + host_ + ":" + std::to_string(port_); }

void StubBackend::install_routes() {
    auto& srv = *server_;

    srv.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        ++chat_requests_;
        const auto request = json::parse(req.body, nullptr, false);
        StubBehavior b;
        {
            std::lock_guard lock(mutex_);
            b = behavior_;
            last_request_ = request;
        }
        if (b.delay.count() > 0) std::this_thread::sleep_for(b.delay);
        if (b.malformed) {
            res.set_content("{\"choices\": [", "application/json");
            return;
        }
        res.status = b.status;
        if (b.status < 200 || b.status >= 300) {
            res.set_content(json{{"error", {{"message", "stub failure"}}}}.dump(), "application/json");
            return;
        }
        json reply = {{"id", "chatcmpl-" + b.name + "-" + std::to_string(chat_requests_.load())},
                      {"object", "chat.completion"},
                      {"model", request.is_object() ? request.value("model", b.name) : b.name},
                      {"choices", json::array({{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", b.reply_text}}},
                                                {"finish_reason", "stop"}}})},
                      {"served_by", b.name}};
        if (b.report_usage) {
            reply["usage"] = {{"prompt_tokens", b.prompt_tokens},
                              {"completion_tokens", b.completion_tokens},
                              {"total_tokens", b.prompt_tokens + b.completion_tokens}};
        }
        res.set_content(reply.dump(), "application/json");
    });

    srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        ++health_requests_;
        const auto b = behavior();
        if (b.delay.count() > 0) std::this_thread::sleep_for(b.delay);
        res.status = b.health_status;
        res.set_content(json{{"status", b.health_status == 200 ? "ok" : "error"}}.dump(), "application/json");
    });

    srv.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
        const auto b = behavior();
        if (b.delay.count() > 0) std::this_thread::sleep_for(b.delay);
        const auto body = json::parse(req.body, nullptr, false);
        if (!body.is_object() || !body.contains("input") || !body.at("input").is_string()) {
            res.status = 400;
            return;
        }
        detection::HashingEmbedder embedder;
        const auto v = embedder.embed(body.at("input").get<std::string>());
        res.set_content(json{{"data", json::array({{{"embedding", v}, {"index", 0}}})}}.dump(), "application/json");
    });

    srv.Post("/v1/label", [this](const httplib::Request&, httplib::Response& res) {
        const auto b = behavior();
        if (b.delay.count() > 0) std::this_thread::sleep_for(b.delay);
        if (b.malformed) {
            res.set_content("{\"category\": 7}", "application/json");
            return;
        }
        res.status = b.status;
        res.set_content(json{{"category", b.label_category}, {"confidence", b.label_confidence}}.dump(),
                        "application/json");
    });
}

int StubBackend::start(const std::string& host, int port) {
    stop();
    server_ = std::make_unique<httplib::Server>();
    install_routes();
    host_ = host;
    if (port == 0 && port_ != 0) port = port_;
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ <= 0) throw Error(ErrorKind::Runtime, "stub: cannot bind a free port");
    } else {
        bool bound = false;
        for (int attempt = 0; attempt < 50 && !bound; ++attempt) {
            bound = server_->bind_to_port(host, port);
            if (!bound) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        if (!bound) throw Error(ErrorKind::Runtime, "stub: cannot bind port " + std::to_string(port));
        port_ = port;
    }
    running_ = true;
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void StubBackend::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
    running_ = false;
}

}  // namespace quantclaw::stub
