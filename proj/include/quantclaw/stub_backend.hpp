#pragma once

// Scriptable OpenAI-compatible upstream used by tests and local demos.
//
//   POST /v1/chat/completions   canned completion with optional usage block
//   GET  /health
//   POST /v1/embeddings         hashing embeddings
//   POST /v1/label              fixed {category, confidence}

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace quantclaw::stub {

struct StubBehavior {
    std::string name = "stub";
    std::string reply_text = "ok";
    std::chrono::milliseconds delay{0};
    int status = 200;
    bool malformed = false;
    bool report_usage = true;
    std::uint64_t prompt_tokens = 100;
    std::uint64_t completion_tokens = 50;
    int health_status = 200;
    std::string label_category = "unknown";
    double label_confidence = 0.9;
};

class StubBackend {
public:
    explicit StubBackend(StubBehavior behavior = {});
    ~StubBackend();

    StubBackend(const StubBackend&) = delete;
    StubBackend& operator=(const StubBackend&) = delete;

    /// Starts serving; port 0 picks a free port. Restarting reuses the previous port
    /// when `port` is 0 and one was bound before. Returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    bool running() const { return running_.load(); }

    void set_behavior(StubBehavior behavior);
    StubBehavior behavior() const;

    std::uint64_t chat_requests() const { return chat_requests_.load(); }
    std::uint64_t health_requests() const { return health_requests_.load(); }
    nlohmann::json last_request() const;

    int port() const { return port_; }
    std::string origin() const;
    std::string chat_url() const { return origin() + "/v1/chat/completions"; }

private:
    void install_routes();

    mutable std::mutex mutex_;
    StubBehavior behavior_;
    nlohmann::json last_request_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> chat_requests_{0};
    std::atomic<std::uint64_t> health_requests_{0};
    std::string host_ = "127.0.0.1";
    int port_ = 0;
};

}  // namespace quantclaw::stub
