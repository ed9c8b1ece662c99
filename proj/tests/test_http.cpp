#include <doctest.h>

#include <httplib.h>

#include <sstream>
#include <thread>

#include "gateway_fixture.hpp"
#include "quantclaw/http_server.hpp"

using namespace quantclaw;
using namespace quantclaw::testing;
using nlohmann::json;

namespace {

struct ServedRig {
    GatewayRig rig;
    gateway::HttpServer server{*rig.gw};
    int port = 0;

    ServedRig() {
        port = server.bind("127.0.0.1", 0);
        server.start();
    }

    httplib::Client client() const {
        httplib::Client cli("127.0.0.1", port);
        cli.set_read_timeout(10, 0);
        return cli;
    }
};

struct SseEvent {
    std::uint64_t id = 0;
    std::string event;
    json data;
};

std::vector<SseEvent> parse_sse(const std::string& text) {
    std::vector<SseEvent> out;
    std::istringstream in(text);
    std::string line;
    SseEvent current;
    bool have = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (have) out.push_back(current);
            current = {};
            have = false;
        } else if (line.rfind("id: ", 0) == 0) {
            current.id = std::stoull(line.substr(4));
            have = true;
        } else if (line.rfind("event: ", 0) == 0) {
            current.event = line.substr(7);
        } else if (line.rfind("data: ", 0) == 0) {
            current.data = json::parse(line.substr(6));
        }
    }
    return out;
}

std::string stream(int port, const std::string& query) {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(10, 0);
    std::string body;
    auto res = cli.Get("/events/stream?" + query, [&](const char* data, size_t len) {
        body.append(data, len);
        return true;
    });
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "text/event-stream");
    return body;
}

}  // namespace

TEST_CASE("chat over HTTP carries the routing headers") {
    ServedRig s;
    auto cli = s.client();
    auto res = cli.Post("/v1/chat/completions", chat_body("debug this python code").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("served_by") == "stub-16bit");
    CHECK(res->get_header_value(gateway::kHeaderPrecision) == "16-bit");
    const auto decision = s.rig.events_of(telemetry::EventKind::Decision).at(0).payload.at("decision");
    gateway::Reply as_reply;
    for (const auto& [k, v] : res->headers) as_reply.headers.emplace_back(k, v);
    CHECK(header_mismatches(as_reply, decision).empty());

    res = cli.Post("/v1/chat/completions", "{", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
}

TEST_CASE("metrics and events over HTTP") {
    ServedRig s;
    auto cli = s.client();
    for (const auto* q : {"debug this code", "survey the literature", "summarize this"}) {
        cli.Post("/v1/chat/completions", chat_body(q).dump(), "application/json");
    }
    auto res = cli.Get("/metrics");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body) == telemetry::to_json(s.rig.gw->journal().snapshot()));

    res = cli.Get("/metrics?from=1&to=2");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("requests_routed") == 1);
    CHECK(cli.Get("/metrics?from=x")->status == 400);

    res = cli.Get("/events?from=0&limit=2");
    REQUIRE(res);
    auto page = json::parse(res->body);
    REQUIRE(page.at("events").size() == 2);
    std::uint64_t next = page.at("events")[1].at("seq").get<std::uint64_t>() + 1;
    std::vector<std::uint64_t> seqs = {0, 1};
    while (true) {
        page = json::parse(cli.Get("/events?from=" + std::to_string(next) + "&limit=2")->body);
        if (page.at("events").empty()) break;
        for (const auto& e : page.at("events")) seqs.push_back(e.at("seq").get<std::uint64_t>());
        next = seqs.back() + 1;
    }
    CHECK(seqs.size() == s.rig.gw->journal().next_seq());
    for (std::size_t i = 0; i < seqs.size(); ++i) CHECK(seqs[i] == i);
    CHECK(cli.Get("/events?from=999")->status == 400);
    CHECK(cli.Get("/events?limit=-1")->status == 400);
}

TEST_CASE("event stream delivers events in order and resumes without gaps") {
    ServedRig s;
    auto cli = s.client();
    for (int i = 0; i < 5; ++i) cli.Post("/v1/chat/completions", chat_body("debug this").dump(), "application/json");
    const auto total = s.rig.gw->journal().next_seq();

    const auto first = parse_sse(stream(s.port, "from=0&limit=3"));
    REQUIRE(first.size() == 3);
    // reconnect from the last seen id
    const auto rest = parse_sse(stream(s.port, "from=" + std::to_string(first.back().id + 1) + "&limit=" +
                                                       std::to_string(total - 3)));
    std::vector<SseEvent> all = first;
    all.insert(all.end(), rest.begin(), rest.end());
    REQUIRE(all.size() == total);
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(all[i].id == i);
        CHECK(all[i].data.at("seq") == i);
        CHECK(all[i].event == all[i].data.at("kind").get<std::string>());
    }
    CHECK(all.front().event == "Admin");
}

TEST_CASE("event stream waits for new events") {
    ServedRig s;
    const auto start = s.rig.gw->journal().next_seq();
    std::thread producer([&] {
        auto cli = s.client();
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        for (int i = 0; i < 3; ++i) cli.Post("/v1/chat/completions", chat_body("debug this").dump(), "application/json");
    });
    auto cli = s.client();
    const auto events = parse_sse(stream(s.port, "from=" + std::to_string(start) + "&limit=3"));
    producer.join();
    REQUIRE(events.size() == 3);
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].id == start + i);
        CHECK(events[i].event == "Decision");
    }
}

TEST_CASE("event stream validates its parameters") {
    ServedRig s;
    auto cli = s.client();
    CHECK(cli.Get("/events/stream?from=100")->status == 400);
    CHECK(cli.Get("/events/stream?from=abc")->status == 400);
    CHECK(parse_sse(stream(s.port, "from=0&limit=0")).empty());
}

TEST_CASE("admin over HTTP") {
    ServedRig s;
    auto cli = s.client();
    CHECK(cli.Get("/admin/mode")->status == 401);
    httplib::Headers auth = {{"Authorization", std::string("Bearer ") + kAdminToken}};
    auto res = cli.Post("/admin/mode", auth, R"({"mode":"cost"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(cli.Get("/admin/mode", auth)->body).at("mode") == "CostOriented");
    res = cli.Post("/admin/overrides", auth, R"({"category":"research","precision":"BF16"})", "application/json");
    CHECK(res->status == 200);
    res = cli.Post("/v1/chat/completions", chat_body("survey the literature").dump(), "application/json");
    CHECK(res->get_header_value(gateway::kHeaderRationale) == "OverrideRule");
    CHECK(res->get_header_value(gateway::kHeaderMode) == "CostOriented");
    CHECK(cli.Get("/admin/pool", auth)->status == 200);
    CHECK(cli.Get("/admin/profiles", auth)->status == 200);
    CHECK(cli.Delete("/admin/mode", auth)->status == 405);
    CHECK(cli.Get("/admin/unknown", auth)->status == 404);
}

TEST_CASE("stopping the server ends open streams") {
    auto s = std::make_unique<ServedRig>();
    const int port = s->port;
    std::string body;
    std::thread reader([&] {
        httplib::Client cli("127.0.0.1", port);
        cli.set_read_timeout(10, 0);
        cli.Get("/events/stream?from=0", [&](const char* data, size_t len) {
            body.append(data, len);
            return true;
        });
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    const auto start = std::chrono::steady_clock::now();
    s->server.stop();
    reader.join();
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
    CHECK(parse_sse(body).size() >= 1);
}
