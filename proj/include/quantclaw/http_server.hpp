#pragma once

// HTTP binding for the gateway:
//
//   POST /v1/chat/completions
//   GET|POST /admin/...           (bearer token)
//   GET /metrics[?from=&to=]
//   GET /events?from=&limit=
//   GET /events/stream?from=[&limit=]   server-sent events, "id: <seq>" per event

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "quantclaw/gateway.hpp"

namespace httplib {
class Server;
}

namespace quantclaw::gateway {

class HttpServer {
public:
    explicit HttpServer(Gateway& gateway);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port. Throws Error(Runtime).
    int bind(const std::string& host, int port);

    /// Serves on a background thread.
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();

    int port() const { return port_; }

private:
    Gateway& gateway_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int port_ = 0;
};

}  // namespace quantclaw::gateway
