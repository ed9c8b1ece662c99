#include "quantclaw/http_server.hpp"

#include <httplib.h>

#include "quantclaw/errors.hpp"

namespace quantclaw::gateway {

using nlohmann::json;

namespace {

void send(httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, reply.content_type);
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"type", "validation"}, {"message", message}}}}.dump(), "application/json");
}

std::optional<std::uint64_t> uint_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const auto text = req.get_param_value(name);
    std::size_t used = 0;
    std::uint64_t value = 0;
    try {
        if (text.empty() || text[0] == '-') throw std::invalid_argument(name);
        value = std::stoull(text, &used);
    } catch (const std::exception&) {
        throw Error(ErrorKind::Validation, std::string(name) + ": expected a non-negative integer");
    }
    if (used != text.size()) throw Error(ErrorKind::Validation, std::string(name) + ": expected a non-negative integer");
    return value;
}

}  // namespace

HttpServer::HttpServer(Gateway& gateway) : gateway_(gateway), server_(std::make_unique<httplib::Server>()) {
    auto& srv = *server_;

    srv.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, gateway_.handle_chat(req.body));
    });

    auto admin = [this](const httplib::Request& req, httplib::Response& res) {
        send(res, gateway_.handle_admin(req.method, req.path, req.get_header_value("Authorization"), req.body));
    };
    srv.Get(R"(/admin/.*)", admin);
    srv.Post(R"(/admin/.*)", admin);
    srv.Put(R"(/admin/.*)", admin);
    srv.Delete(R"(/admin/.*)", admin);

    srv.Get("/metrics", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send(res, gateway_.metrics(uint_param(req, "from"), uint_param(req, "to")));
        } catch (const Error& e) {
            send_error(res, 400, e.what());
        }
    });

    srv.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto from = uint_param(req, "from").value_or(0);
            const auto limit = uint_param(req, "limit").value_or(1000);
            send(res, gateway_.events(from, static_cast<std::size_t>(limit)));
        } catch (const Error& e) {
            send_error(res, 400, e.what());
        }
    });

    srv.Get("/events/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t from = 0;
        std::optional<std::uint64_t> limit;
        try {
            from = uint_param(req, "from").value_or(0);
            limit = uint_param(req, "limit");
        } catch (const Error& e) {
            send_error(res, 400, e.what());
            return;
        }
        if (from > gateway_.journal().next_seq()) {
            send_error(res, 400, "from: beyond the end of the journal");
            return;
        }
        auto next = std::make_shared<std::uint64_t>(from);
        auto sent = std::make_shared<std::uint64_t>(0);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [this, next, sent, limit](std::size_t, httplib::DataSink& sink) {
                auto& journal = gateway_.journal();
                while (!stopping_.load()) {
                    if (!sink.is_writable()) return false;
                    if (limit && *sent >= *limit) {
                        sink.done();
                        return true;
                    }
                    if (!journal.wait_for(*next, std::chrono::milliseconds(200))) {
                        if (journal.closed() && journal.next_seq() <= *next) {
                            sink.done();
                            return true;
                        }
                        // keep-alive comment so dead clients are noticed
                        static constexpr char kPing[] = ": ping\n\n";
                        if (!sink.write(kPing, sizeof(kPing) - 1)) return false;
                        continue;
                    }
                    std::size_t batch = 256;
                    if (limit) batch = static_cast<std::size_t>(std::min<std::uint64_t>(batch, *limit - *sent));
                    std::vector<telemetry::TelemetryEvent> events;
                    try {
                        events = journal.read(*next, batch);
                    } catch (const Error&) {
                        return false;
                    }
                    if (events.empty()) {
                        // oldest retained event is past `next` after rotation
                        *next = journal.next_seq();
                        continue;
                    }
                    std::string chunk;
                    for (const auto& e : events) {
                        chunk += "id: " + std::to_string(e.seq) + "\nevent: " + std::string(telemetry::to_string(e.kind)) +
                                 "\ndata: " + telemetry::to_json(e).dump() + "\n\n";
                        *next = e.seq + 1;
                        ++*sent;
                    }
                    if (!sink.write(chunk.data(), chunk.size())) return false;
                    if (limit && *sent >= *limit) {
                        sink.done();
                    }
                    return true;
                }
                return false;
            });
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ <= 0) throw Error(ErrorKind::Runtime, "cannot bind " + host + " to a free port");
    } else {
        if (!server_->bind_to_port(host, port)) {
            throw Error(ErrorKind::Runtime, "cannot bind " + host + ":" + std::to_string(port));
        }
        port_ = port;
    }
    return port_;
}

void HttpServer::start() {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::stop() {
    stopping_ = true;
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace quantclaw::gateway
