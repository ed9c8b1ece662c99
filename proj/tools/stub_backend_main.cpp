// quantclaw_stub: a scriptable OpenAI-compatible upstream for local runs.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "quantclaw/errors.hpp"
#include "quantclaw/stub_backend.hpp"

namespace {
std::atomic<bool> g_interrupted{false};
void on_signal(int) { g_interrupted = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantclaw_stub: canned chat-completions upstream"};
    quantclaw::stub::StubBehavior b;
    std::string host = "127.0.0.1";
    int port = 0;
    int delay_ms = 0;
    bool no_usage = false;
    app.add_option("--host", host);
    app.add_option("--port", port, "0 = any free port");
    app.add_option("--name", b.name, "Reported in every reply");
    app.add_option("--reply", b.reply_text);
    app.add_option("--delay-ms", delay_ms);
    app.add_option("--status", b.status, "HTTP status for chat replies");
    app.add_flag("--malformed", b.malformed, "Reply with truncated JSON");
    app.add_flag("--no-usage", no_usage, "Omit the usage block");
    app.add_option("--prompt-tokens", b.prompt_tokens);
    app.add_option("--completion-tokens", b.completion_tokens);
    app.add_option("--label", b.label_category, "Category returned by /v1/label");
    CLI11_PARSE(app, argc, argv);
    b.delay = std::chrono::milliseconds(delay_ms);
    b.report_usage = !no_usage;

    try {
        quantclaw::stub::StubBackend stub(b);
        const int bound = stub.start(host, port);
        std::cout << bound << std::endl;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        stub.stop();
    } catch (const quantclaw::Error& e) {
        std::cerr << "quantclaw_stub: " << e.what() << "\n";
        return quantclaw::exit_code_for(e.kind());
    }
    return 0;
}
