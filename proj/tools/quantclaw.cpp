// quantclaw: operator entry point.
//
//   quantclaw serve            --config FILE
//   quantclaw profile build    RESULTS [-o FILE]
//   quantclaw fit              POINTS
//   quantclaw simulate         --workload FILE --profiles FILE [--mode M] [--discount F]
//   quantclaw detect           QUERY [--rules FILE | --config FILE]
//   quantclaw bench-detectors  CORPUS [--detector hybrid|rule|replay]
//
// Exit codes: 0 success, 2 validation, 3 insufficient data, 4 runtime.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "quantclaw/config.hpp"
#include "quantclaw/errors.hpp"
#include "quantclaw/evaluation.hpp"
#include "quantclaw/gateway.hpp"
#include "quantclaw/http_server.hpp"
#include "quantclaw/profiles.hpp"
#include "quantclaw/report_io.hpp"
#include "quantclaw/simulate.hpp"

namespace {

using namespace quantclaw;
using nlohmann::json;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Globals {
    std::string config_path;
    std::string output = "text";
    bool quiet = false;

    bool json_output() const { return output == "json"; }

    std::string resolved_config() const {
        if (!config_path.empty()) return config_path;
        if (const char* env = std::getenv("QUANTCLAW_CONFIG"); env && *env) return env;
        return {};
    }
};

void note(const Globals& g, const std::string& msg) {
    if (!g.quiet) std::cerr << msg << "\n";
}

std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string pct(std::optional<double> v) { return v ? fmt(*v * 100.0, 2) + "%" : "n/a"; }

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Runtime, "cannot write '" + path + "'");
    out << text << "\n";
}

// serve

int cmd_serve(const Globals& g, std::optional<int> port_override) {
    const auto path = g.resolved_config();
    if (path.empty()) throw Error(ErrorKind::Validation, "config: pass --config or set QUANTCLAW_CONFIG");
    auto cfg = config::load_config(path);
    if (port_override) cfg.port = *port_override;

    gateway::Gateway gw(cfg);
    gateway::HttpServer server(gw);
    const int port = server.bind(cfg.host, cfg.port);
    gw.probe_all();
    gw.start_probing();

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start();
    if (g.json_output()) {
        std::cout << json{{"listening", cfg.host + ":" + std::to_string(port)}}.dump() << std::endl;
    } else {
        note(g, "quantclaw: listening on " + cfg.host + ":" + std::to_string(port));
        if (g.quiet) std::cout << port << std::endl;
    }
    while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    note(g, "quantclaw: shutting down");
    gw.stop_probing();
    gw.shutdown();
    server.stop();
    return 0;
}

// profile build

int cmd_profile_build(const Globals& g, const std::string& results_path, const std::string& out_path) {
    const auto set = profile::build_profiles_from_results(profile::read_json_file(results_path));
    const auto j = profile::to_json(set);
    if (g.json_output() || !out_path.empty()) {
        write_output(out_path, j.dump(2));
        if (out_path.empty()) return 0;
    }
    if (!g.json_output()) {
        std::cout << std::left << std::setw(22) << "task" << std::right << std::setw(12) << "high" << std::setw(12)
                  << "low" << std::setw(14) << "rel_degr_%" << "  group\n";
        for (const auto& t : set.tasks) {
            std::cout << std::left << std::setw(22) << t.task_category << std::right << std::setw(12)
                      << fmt(t.high.score, 4) << std::setw(12) << fmt(t.low.score, 4) << std::setw(14)
                      << fmt(t.rel_degradation * 100.0, 4) << "  " << profile::to_string(t.group) << "\n";
        }
    }
    return 0;
}

// fit

int cmd_fit(const Globals& g, const std::string& points_path) {
    const auto points = profile::load_points(points_path);
    const auto fit = profile::fit_power_law(points);
    if (g.json_output()) {
        std::cout << profile::to_json(fit).dump(2) << "\n";
        return 0;
    }
    std::cout << std::setprecision(12);
    std::cout << "delta = a * N^b\n";
    std::cout << "a            " << fit.a << "\n";
    std::cout << "b            " << fit.b << "\n";
    std::cout << "r_squared    " << fit.r_squared << "\n";
    std::cout << "points_used  " << fit.points_used << "\n";
    std::cout << "excluded     " << fit.excluded.size() << "\n";
    for (const auto& p : fit.excluded) {
        std::cout << "  " << (p.model_id.empty() ? "-" : p.model_id) << " N=" << p.n_params_b << " delta=" << p.delta
                  << " (non-positive)\n";
    }
    return 0;
}

// simulate

struct SimulateArgs {
    std::string workload;
    std::string profiles;
    std::string mode = "latency";
    std::optional<double> discount;
    std::optional<double> input_price;
    std::optional<double> output_price;
    routing::PolicyConfig policy;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
    const auto workload = simulate::load_workload(a.workload);
    const auto profiles = profile::load_profiles(a.profiles);
    const auto mode = routing::parse_mode(a.mode);
    a.policy.validate();

    profile::PricingRule pricing;
    if (profiles.pricing) pricing = *profiles.pricing;
    if (a.input_price) pricing.high.input_per_mtok = *a.input_price;
    if (a.output_price) pricing.high.output_per_mtok = *a.output_price;
    if (a.discount) pricing.discount_factor = *a.discount;
    if (!profiles.pricing && !(a.input_price && a.output_price && a.discount)) {
        throw Error(ErrorKind::Validation,
                    "pricing: profiles carry no pricing; pass --input-price, --output-price and --discount");
    }

    const auto report = simulate::simulate(workload, profiles, mode, a.policy, pricing);
    if (g.json_output()) {
        std::cout << simulate::to_json(report).dump(2) << "\n";
        return 0;
    }
    for (const auto& w : report.warnings) note(g, "warning: " + w);
    std::cout << "mode " << routing::to_string(report.mode) << ", " << report.adaptive.requests << " requests\n";
    std::cout << std::left << std::setw(10) << "policy" << std::right << std::setw(10) << "low" << std::setw(14)
              << "avg_score" << std::setw(16) << "total_cost_usd" << std::setw(16) << "avg_latency_s" << "\n";
    for (const auto* t : {&report.all_high, &report.all_low, &report.adaptive}) {
        std::cout << std::left << std::setw(10) << t->policy << std::right << std::setw(10) << t->routed_low
                  << std::setw(14) << fmt(t->avg_expected_score(), 4) << std::setw(16) << fmt(t->total_cost_usd, 6)
                  << std::setw(16) << fmt(t->avg_expected_latency_s(), 3) << "\n";
    }
    std::cout << "cost savings vs all-high     " << pct(report.cost_savings()) << "\n";
    std::cout << "latency savings vs all-high  " << pct(report.latency_savings()) << "\n";
    return 0;
}

// detect / bench-detectors

struct DetectionSetup {
    detection::CategoryRegistry registry = detection::CategoryRegistry::defaults();
    detection::RuleSet rules;
    std::shared_ptr<detection::ClassifierClient> classifier;
    std::string fallback = "unknown";
};

struct DetectionArgs {
    std::string rules_path;
    std::string seeds_path;
    std::string fallback;
};

DetectionSetup load_detection(const Globals& g, const DetectionArgs& a) {
    DetectionSetup s;
    const auto cfg_path = g.resolved_config();
    if (!a.rules_path.empty()) {
        s.rules = detection::load_rules(a.rules_path, s.registry);
        if (!a.seeds_path.empty()) {
            s.classifier = std::make_shared<detection::CentroidClassifier>(
                std::make_shared<detection::HashingEmbedder>(), detection::load_seeds(a.seeds_path, s.registry));
        }
    } else if (!cfg_path.empty()) {
        const auto cfg = config::load_config(cfg_path);
        if (!cfg.categories.empty()) s.registry = detection::CategoryRegistry(cfg.categories);
        s.rules = detection::load_rules(cfg.rules_path, s.registry);
        s.classifier = gateway::make_classifier(cfg.classifier, s.registry);
        s.fallback = cfg.fallback_category;
    } else {
        throw Error(ErrorKind::Validation, "rules: pass --rules or --config (or set QUANTCLAW_CONFIG)");
    }
    if (!a.fallback.empty()) s.fallback = a.fallback;
    s.fallback = detection::normalize_category_id(s.fallback);
    if (!s.registry.contains(s.fallback)) {
        throw Error(ErrorKind::Validation, "fallback: '" + s.fallback + "' is not a registered category");
    }
    return s;
}

int cmd_detect(const Globals& g, const std::string& query, const DetectionArgs& a) {
    auto s = load_detection(g, a);
    const auto r = detection::hybrid_detect(query, s.rules, s.classifier.get(), s.registry, s.fallback);
    if (g.json_output()) {
        std::cout << detection::to_json(r).dump(2) << "\n";
        return 0;
    }
    std::cout << r.category << "  stage=" << detection::to_string(r.stage) << "  confidence=" << fmt(r.confidence, 4);
    if (r.rule_id) std::cout << "  rule=" << *r.rule_id;
    std::cout << "\n";
    return 0;
}

int cmd_bench(const Globals& g, const std::string& corpus_path, const std::string& detector, const DetectionArgs& a) {
    const auto corpus = detection::load_corpus(corpus_path);
    if (corpus.empty()) throw Error(ErrorKind::InsufficientData, "corpus '" + corpus_path + "' has no records");

    detection::DetectorReport report;
    if (detector == "replay") {
        std::map<std::string, std::string> recorded;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (!corpus[i].predicted) {
                throw Error(ErrorKind::Validation,
                            "corpus line " + std::to_string(i + 1) + ": replay needs a 'predicted' field");
            }
        }
        std::size_t next = 0;
        report = detection::evaluate_detector([&](std::string_view) { return *corpus[next++].predicted; }, corpus);
    } else if (detector == "rule" || detector == "hybrid") {
        auto s = load_detection(g, a);
        auto* client = detector == "hybrid" ? s.classifier.get() : nullptr;
        report = detection::evaluate_detector(
            [&](std::string_view q) { return detection::hybrid_detect(q, s.rules, client, s.registry, s.fallback).category; },
            corpus);
    } else {
        throw Error(ErrorKind::Validation, "detector: expected hybrid, rule or replay");
    }

    if (g.json_output()) {
        std::cout << detection::to_json(report).dump(2) << "\n";
        return 0;
    }
    std::cout << "records      " << corpus.size() << "\n";
    std::cout << "accuracy     " << fmt(report.accuracy, 4) << "\n";
    std::cout << "macro_f1     " << fmt(report.macro_f1, 4) << "\n";
    std::cout << "avg_time_ms  " << fmt(report.avg_time_s * 1e3, 4) << "\n";
    std::cout << std::left << std::setw(22) << "class" << std::right << std::setw(10) << "precision" << std::setw(10)
              << "recall" << std::setw(10) << "f1" << std::setw(9) << "support" << "\n";
    for (const auto& [label, m] : report.per_class) {
        std::cout << std::left << std::setw(22) << label << std::right << std::setw(10) << fmt(m.precision, 4)
                  << std::setw(10) << fmt(m.recall, 4) << std::setw(10) << fmt(m.f1, 4) << std::setw(9) << m.support
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantclaw: precision-routing gateway for quantized model pools"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Gateway config file (default: $QUANTCLAW_CONFIG)");
    app.add_option("--output", g.output, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_flag("--quiet", g.quiet, "Suppress diagnostics on stderr");

    auto* serve = app.add_subcommand("serve", "Run the gateway");
    std::optional<int> port;
    serve->add_option("--port", port, "Override the configured port (0 = any free port)");

    auto* profile_cmd = app.add_subcommand("profile", "Sensitivity profile tools");
    profile_cmd->require_subcommand(1);
    auto* build = profile_cmd->add_subcommand("build", "Build a profiles file from benchmark results");
    std::string results_path, out_path;
    build->add_option("results", results_path, "Results file")->required();
    build->add_option("-o,--out", out_path, "Write the profiles file here");

    auto* fit = app.add_subcommand("fit", "Fit delta = a * N^b to degradation points");
    std::string points_path;
    fit->add_option("points", points_path, "Points file")->required();

    auto* sim = app.add_subcommand("simulate", "Compare all-high, all-low and adaptive routing over a workload");
    SimulateArgs sa;
    sim->add_option("--workload", sa.workload, "Workload file")->required();
    sim->add_option("--profiles", sa.profiles, "Profiles file")->required();
    sim->add_option("--mode", sa.mode, "latency or cost");
    sim->add_option("--discount", sa.discount, "Low-precision price factor in (0, 1]");
    sim->add_option("--input-price", sa.input_price, "High-precision input $/Mtok");
    sim->add_option("--output-price", sa.output_price, "High-precision output $/Mtok");
    sim->add_option("--epsilon", sa.policy.epsilon_score, "Max relative score drop");
    sim->add_option("--tau-latency", sa.policy.tau_latency, "Min relative latency gain");
    sim->add_option("--tau-cost", sa.policy.tau_cost, "Min relative cost gain");

    DetectionArgs da;
    auto add_detection_options = [&](CLI::App* cmd) {
        cmd->add_option("--rules", da.rules_path, "Rules file (instead of --config)");
        cmd->add_option("--seeds", da.seeds_path, "Seeds file for the hashing centroid classifier (with --rules)");
        cmd->add_option("--fallback", da.fallback, "Fallback category");
    };
    auto* detect = app.add_subcommand("detect", "Detect the task category of a query");
    std::vector<std::string> words;
    detect->add_option("query", words, "Query text")->required();
    add_detection_options(detect);

    auto* bench = app.add_subcommand("bench-detectors", "Evaluate a detector on a labeled corpus");
    std::string corpus_path, detector = "hybrid";
    bench->add_option("corpus", corpus_path, "JSONL corpus")->required();
    bench->add_option("--detector", detector, "hybrid, rule or replay")
        ->check(CLI::IsMember({"hybrid", "rule", "replay"}));
    add_detection_options(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*serve) return cmd_serve(g, port);
        if (*build) return cmd_profile_build(g, results_path, out_path);
        if (*fit) return cmd_fit(g, points_path);
        if (*sim) return cmd_simulate(g, sa);
        if (*detect) {
            std::string query;
            for (const auto& w : words) query += (query.empty() ? "" : " ") + w;
            return cmd_detect(g, query, da);
        }
        if (*bench) return cmd_bench(g, corpus_path, detector, da);
    } catch (const Error& e) {
        std::cerr << "quantclaw: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "quantclaw: runtime: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
