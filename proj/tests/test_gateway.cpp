#include <doctest.h>

#include <set>

#include "gateway_fixture.hpp"
#include "quantclaw/errors.hpp"

using namespace quantclaw;
using namespace quantclaw::testing;
using telemetry::EventKind;
using nlohmann::json;

TEST_CASE("code goes to the 16-bit stub and research to the 4-bit stub") {
    GatewayRig rig;
    const auto code = rig.chat("please debug this python function");
    const auto research = rig.chat("survey the related work on speculative decoding");
    REQUIRE(code.status == 200);
    REQUIRE(research.status == 200);
    CHECK(json::parse(code.body).at("served_by") == "stub-16bit");
    CHECK(json::parse(research.body).at("served_by") == "stub-4bit");
    CHECK(rig.high.chat_requests() == 1);
    CHECK(rig.low.chat_requests() == 1);

    CHECK(code.header(gateway::kHeaderTask) == "code");
    CHECK(code.header(gateway::kHeaderPrecision) == "16-bit");
    CHECK(code.header(gateway::kHeaderRationale) == "HighSensitivity");
    CHECK(code.header(gateway::kHeaderStage) == "Rule");
    CHECK(research.header(gateway::kHeaderTask) == "research");
    CHECK(research.header(gateway::kHeaderPrecision) == "4-bit");
    CHECK(research.header(gateway::kHeaderFormat) == "INT4");
    CHECK(research.header(gateway::kHeaderRationale) == "LowSensitivity");

    const auto decisions = rig.events_of(EventKind::Decision);
    REQUIRE(decisions.size() == 2);
    CHECK(header_mismatches(code, decisions[0].payload.at("decision")).empty());
    CHECK(header_mismatches(research, decisions[1].payload.at("decision")).empty());
    CHECK(decisions[0].payload.at("outcome") == "routed");
    CHECK(decisions[0].payload.at("decision").at("requested_model") == "any");
}

TEST_CASE("exactly one decision event per routed request") {
    GatewayRig rig;
    const std::vector<std::string> queries = {
        "refactor this rust code", "summarize this paper", "look up the weather in Oslo",
        "rewrite this paragraph to be more formal", "what is going on", "is this GDPR compliant",
        "compare these two datasets", "write a poem about tea"};
    std::set<std::string> ids;
    for (const auto& q : queries) {
        const auto r = rig.chat(q);
        REQUIRE(r.status == 200);
        ids.insert(r.header(gateway::kHeaderRequestId));
    }
    CHECK(ids.size() == queries.size());
    const auto decisions = rig.events_of(EventKind::Decision);
    REQUIRE(decisions.size() == queries.size());
    std::set<std::string> journaled;
    for (const auto& e : decisions) {
        journaled.insert(e.payload.at("decision").at("request_id").get<std::string>());
        CHECK(rig.gw->model_pool().find(e.payload.at("decision").at("variant_id").get<std::string>()));
    }
    CHECK(journaled == ids);
}

TEST_CASE("the upstream receives the variant model and default max_tokens") {
    GatewayRig rig;
    rig.chat("debug this code");
    const auto sent = rig.high.last_request();
    CHECK(sent.at("model") == "glm-4.7-flash");
    CHECK(sent.at("max_tokens") == 1024);
    CHECK(sent.at("stream") == false);
    CHECK(sent.at("messages") == chat_body("debug this code").at("messages"));

    auto body = chat_body("survey prior work");
    body["max_tokens"] = 7;
    rig.gw->handle_chat(body.dump());
    CHECK(rig.low.last_request().at("max_tokens") == 7);
    CHECK(rig.low.last_request().at("model") == "glm-4.7-flash-int4");
}

TEST_CASE("text parts in the last user message are used for detection") {
    GatewayRig rig;
    const json body = {{"messages",
                        {{{"role", "user"}, {"content", "write a poem"}},
                         {{"role", "assistant"}, {"content", "ok"}},
                         {{"role", "user"},
                          {"content", {{{"type", "text"}, {"text", "now debug"}}, {{"type", "text"}, {"text", "my python"}}}}}}}};
    const auto r = rig.gw->handle_chat(body.dump());
    REQUIRE(r.status == 200);
    CHECK(r.header(gateway::kHeaderTask) == "code");
}

TEST_CASE("queries without rule hits fall through to the classifier") {
    GatewayRig rig;
    const auto r = rig.chat("hmm, thoughts on this?");
    REQUIRE(r.status == 200);
    CHECK(r.header(gateway::kHeaderStage) == "Classifier");
    CHECK(rig.gw->registry().contains(r.header(gateway::kHeaderTask)));
    CHECK(header_mismatches(r, rig.events_of(EventKind::Decision).at(0).payload.at("decision")).empty());
}

TEST_CASE("malformed requests are rejected without a decision") {
    GatewayRig rig;
    for (const std::string body : {"", "{", "[]", "{}", R"({"messages":[]})", R"({"messages":"hi"})",
                                   R"({"messages":[{"role":"user","content":"x"}],"max_tokens":-1})",
                                   R"({"messages":[{"role":"user","content":"x"}],"max_tokens":"9"})"}) {
        INFO(body);
        const auto r = rig.gw->handle_chat(body);
        CHECK(r.status == 400);
        CHECK(json::parse(r.body).at("error").at("type") == "protocol");
    }
    CHECK(rig.events_of(EventKind::Decision).empty());
    CHECK(rig.high.chat_requests() + rig.low.chat_requests() == 0);
}

TEST_CASE("an exhausted pool answers 503 and journals the decision") {
    GatewayRig rig;
    rig.gw->model_pool().set_health("flash-bf16", pool::Health::Down, "test");
    rig.gw->model_pool().set_health("flash-int4", pool::Health::Down, "test");
    const auto r = rig.chat("debug this code");
    CHECK(r.status == 503);
    CHECK(json::parse(r.body).at("error").at("type") == "pool_exhausted");
    const auto decisions = rig.events_of(EventKind::Decision);
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].payload.at("outcome") == "pool_exhausted");
    CHECK(decisions[0].payload.at("decision").at("variant_id").is_null());
    CHECK(rig.gw->journal().snapshot().requests_failed == 1);
    CHECK(rig.events_of(EventKind::Health).size() == 2);
}

TEST_CASE("low-precision requests move up a tier when the 4-bit variant is down") {
    GatewayRig rig;
    rig.gw->model_pool().set_health("flash-int4", pool::Health::Down, "test");
    const auto r = rig.chat("survey the literature");
    REQUIRE(r.status == 200);
    CHECK(r.header(gateway::kHeaderVariant) == "flash-bf16");
    CHECK(r.header(gateway::kHeaderPrecision) == "16-bit");
    CHECK(r.header(gateway::kHeaderRationale) == "LowSensitivity");
    CHECK(header_mismatches(r, rig.events_of(EventKind::Decision).at(0).payload.at("decision")).empty());
}

TEST_CASE("upstream failures answer 502 and mark the variant") {
    GatewayRig rig;
    rig.low.stop();
    const auto r = rig.chat("survey the literature");
    CHECK(r.status == 502);
    CHECK(json::parse(r.body).at("error").at("variant_id") == "flash-int4");
    CHECK(rig.gw->model_pool().find("flash-int4")->health == pool::Health::Down);
    const auto upstream = rig.events_of(EventKind::Upstream);
    REQUIRE(upstream.size() == 1);
    CHECK(upstream[0].payload.at("error_kind") == "upstream_down");
    const auto decisions = rig.events_of(EventKind::Decision);
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].payload.at("outcome") == "upstream_error");

    auto behavior = rig.high.behavior();
    behavior.status = 500;
    rig.high.set_behavior(behavior);
    CHECK(rig.chat("debug this code").status == 502);
    CHECK(rig.gw->model_pool().find("flash-bf16")->health == pool::Health::Healthy);
}

TEST_CASE("telemetry failure does not block routing") {
    GatewayRig rig;
    rig.gw->journal().inject_storage_fault(true);
    const auto r = rig.chat("debug this code");
    CHECK(r.status == 200);
    CHECK(rig.high.chat_requests() == 1);
    rig.gw->journal().inject_storage_fault(false);
    CHECK(rig.chat("debug this code").status == 200);
    CHECK(rig.events_of(EventKind::Decision).size() == 1);
}

TEST_CASE("metrics report savings against the all-high baseline") {
    GatewayRig rig;
    rig.chat("debug this code");
    rig.chat("survey the literature");
    const auto m = json::parse(rig.gw->metrics().body);
    CHECK(m.at("requests_routed") == 2);
    // Both stubs report 100 in / 50 out; one of two requests paid 0.85x.
    const double high = (100 * 1.0 + 50 * 4.0) / 1e6;
    const double expected = (2 * high - (high + 0.85 * high)) / (2 * high);
    CHECK(m.at("savings_fraction").get<double>() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(m.at("by_category_precision").at("research").at("INT4") == 1);

    const auto next = rig.gw->journal().next_seq();
    const auto window = json::parse(rig.gw->metrics(next - 1, next).body);
    CHECK(window.at("requests_routed") == 1);
    CHECK(window.at("savings_fraction").get<double>() == doctest::Approx(0.15).epsilon(1e-9));
    CHECK(telemetry::replay(rig.journal_path()) == rig.gw->journal().snapshot());
}

TEST_CASE("events page through the journal") {
    GatewayRig rig;
    for (int i = 0; i < 3; ++i) rig.chat("debug this code");
    const auto page = json::parse(rig.gw->events(1, 2).body);
    REQUIRE(page.at("events").size() == 2);
    CHECK(page.at("events")[0].at("seq") == 1);
    CHECK(page.at("next_seq") == rig.gw->journal().next_seq());
    CHECK(rig.gw->events(1000, 10).status == 400);
}

TEST_CASE("admin endpoints require the bearer token") {
    GatewayRig rig;
    CHECK(rig.gw->handle_admin("GET", "/admin/mode", "", "").status == 401);
    CHECK(rig.gw->handle_admin("GET", "/admin/mode", "Bearer nope", "").status == 401);
    CHECK(rig.gw->handle_admin("POST", "/admin/mode", "test-token", R"({"mode":"cost"})").status == 401);
    CHECK(json::parse(rig.admin("GET", "/admin/mode").body).at("mode") == "LatencyOriented");
}

TEST_CASE("mode switches change moderate routing") {
    GatewayRig rig;
    CHECK(rig.chat("rewrite this paragraph").header(gateway::kHeaderPrecision) == "4-bit");
    const auto r = rig.admin("POST", "/admin/mode", {{"mode", "cost"}});
    REQUIRE(r.status == 200);
    CHECK(json::parse(rig.admin("GET", "/admin/mode").body).at("mode") == "CostOriented");
    const auto after = rig.chat("rewrite this paragraph");
    CHECK(after.header(gateway::kHeaderPrecision) == "16-bit");
    CHECK(after.header(gateway::kHeaderMode) == "CostOriented");
    CHECK(after.header(gateway::kHeaderRationale) == "ModeEvaluation");
    CHECK(rig.admin("POST", "/admin/mode", {{"mode", "fastest"}}).status == 400);
    CHECK(rig.admin("POST", "/admin/mode", json::object()).status == 400);
    CHECK(rig.gw->handle_admin("POST", "/admin/mode", "Bearer test-token", "not json").status == 400);
    const auto admin = rig.events_of(EventKind::Admin);
    CHECK(admin.back().payload.at("action") == "set_mode");
}

TEST_CASE("overrides pin a category until cleared") {
    GatewayRig rig;
    REQUIRE(rig.admin("POST", "/admin/overrides", {{"category", "research"}, {"precision", "16-bit"}}).status == 200);
    CHECK(json::parse(rig.admin("GET", "/admin/overrides").body).at("overrides").at("research") == "BF16");
    const auto pinned = rig.chat("survey the literature");
    CHECK(pinned.header(gateway::kHeaderPrecision) == "16-bit");
    CHECK(pinned.header(gateway::kHeaderRationale) == "OverrideRule");

    REQUIRE(rig.admin("POST", "/admin/overrides", {{"category", "research"}, {"precision", nullptr}}).status == 200);
    CHECK(json::parse(rig.admin("GET", "/admin/overrides").body).at("overrides").empty());
    CHECK(rig.chat("survey the literature").header(gateway::kHeaderRationale) == "LowSensitivity");

    CHECK(rig.admin("POST", "/admin/overrides", {{"category", "astrology"}, {"precision", "16-bit"}}).status == 400);
    CHECK(rig.admin("POST", "/admin/overrides", {{"category", "research"}, {"precision", "8-bit"}}).status == 400);
    CHECK(json::parse(rig.admin("GET", "/admin/overrides").body).at("overrides").empty());
    std::vector<std::string> actions;
    for (const auto& e : rig.events_of(EventKind::Admin)) actions.push_back(e.payload.at("action"));
    CHECK(actions == std::vector<std::string>{"startup", "set_override", "clear_override"});
}

TEST_CASE("configured overrides apply at boot") {
    GatewayRig rig([](json& j) { j["policy"]["overrides"] = {{"code", "4-bit"}}; });
    const auto r = rig.chat("debug this code");
    CHECK(r.header(gateway::kHeaderPrecision) == "4-bit");
    CHECK(r.header(gateway::kHeaderRationale) == "OverrideRule");
}

TEST_CASE("profiles and pool are readable") {
    GatewayRig rig;
    const auto profiles = profile::profiles_from_json(json::parse(rig.admin("GET", "/admin/profiles").body));
    CHECK(profiles.tasks.size() == 10);
    const auto pool = json::parse(rig.admin("GET", "/admin/pool").body).at("variants");
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].at("id") == "flash-bf16");
    CHECK(pool[1].at("prices").at("input_per_mtok").get<double>() == doctest::Approx(0.85));
    CHECK(rig.admin("GET", "/admin/nothing").status == 404);
    CHECK(rig.admin("DELETE", "/admin/mode").status == 405);
    CHECK(rig.admin("POST", "/admin/pool").status == 405);
}

TEST_CASE("a broken reload keeps the previous snapshot") {
    TempDir data;
    const auto profiles_copy = data / "profiles.json";
    std::filesystem::copy_file(config_file("profiles.json"), profiles_copy);
    GatewayRig rig([&](json& j) { j["profiles_path"] = profiles_copy.string(); });
    const auto version = rig.gw->routing_control().snapshot()->version;

    {
        std::ofstream out(profiles_copy, std::ios::trunc);
        out << R"({"unit":"fraction","tasks":[{"category":"research"}]})";
    }
    const auto rejected = rig.admin("POST", "/admin/reload");
    CHECK(rejected.status == 400);
    CHECK(json::parse(rejected.body).at("error").at("message").get<std::string>().find("previous snapshot kept") !=
          std::string::npos);
    CHECK(rig.gw->routing_control().snapshot()->version == version);
    CHECK(rig.chat("survey the literature").header(gateway::kHeaderPrecision) == "4-bit");

    // Make research High-sensitivity and reload for real.
    auto j = profile::read_json_file(config_file("profiles.json"));
    for (auto& t : j.at("tasks")) {
        if (t.at("category") == "research") t["low"]["score"] = t["high"]["score"].get<double>() * 0.5;
    }
    {
        std::ofstream out(profiles_copy, std::ios::trunc);
        out << j.dump();
    }
    const auto accepted = rig.admin("POST", "/admin/reload");
    CHECK(accepted.status == 200);
    CHECK(rig.gw->routing_control().snapshot()->version > version);
    CHECK(rig.chat("survey the literature").header(gateway::kHeaderRationale) == "HighSensitivity");
}

TEST_CASE("probing journals health changes") {
    GatewayRig rig;
    rig.gw->probe_all();
    CHECK(rig.events_of(EventKind::Health).empty());
    rig.low.stop();
    rig.gw->probe_all();
    auto health = rig.events_of(EventKind::Health);
    REQUIRE(health.size() == 1);
    CHECK(health[0].payload.at("variant_id") == "flash-int4");
    CHECK(health[0].payload.at("to") == "Down");
    rig.low.start();
    rig.gw->probe_all();
    health = rig.events_of(EventKind::Health);
    REQUIRE(health.size() == 2);
    CHECK(health[1].payload.at("to") == "Healthy");
}

TEST_CASE("shutdown is journaled once and survives reopen") {
    GatewayRig rig;
    rig.chat("debug this code");
    rig.gw->shutdown();
    rig.gw->shutdown();
    const auto admin = rig.events_of(EventKind::Admin);
    REQUIRE(admin.size() == 2);
    CHECK(admin[1].payload.at("action") == "shutdown");
    CHECK(admin[1].payload.at("clean") == true);
    telemetry::Journal reopened({rig.journal_path()});
    CHECK(reopened.snapshot() == rig.gw->journal().snapshot());
}

TEST_CASE("config problems fail before serving and name the field") {
    TempDir dir;
    auto j = stub_config_json("http://127.0.0.1:1", "http://127.0.0.1:2", dir / "j.log");
    auto expect_error = [&](json cfg, const std::string& field) {
        try {
            gateway::Gateway gw(config::config_from_json(cfg, config_file("")));
            FAIL("expected a config error for " << field);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Validation);
            INFO(e.what());
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    auto missing = j;
    missing.erase("profiles_path");
    expect_error(missing, "profiles_path");
    auto absent = j;
    absent["profiles_path"] = "does-not-exist.json";
    expect_error(absent, "profiles_path");
    auto bad_override = j;
    bad_override["policy"]["overrides"] = {{"research", "8-bit"}};
    expect_error(bad_override, "policy.overrides.research");
    auto bad_precision = j;
    bad_precision["pool"]["variants"][1]["precision"] = "INT3";
    expect_error(bad_precision, "pool.variants[1].precision");
}
