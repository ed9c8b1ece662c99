#include "quantclaw/detection.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "quantclaw/errors.hpp"
#include "quantclaw/profiles.hpp"

namespace quantclaw::detection {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_token_char(char c, bool allow_wildcards) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '+' || c == '#' || c == '_' || c == '-') return true;
    return allow_wildcards && (c == '*' || c == '?');
}

std::vector<std::string> tokenize(std::string_view text, bool allow_wildcards = false) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (is_token_char(c, allow_wildcards)) {
            current.push_back(lower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    // Trailing hyphens come from dashes used as punctuation.
    for (auto& t : tokens) {
        while (t.size() > 1 && t.back() == '-') t.pop_back();
    }
    return tokens;
}

// Glob match with '*' (any run) and '?' (one char).
bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool phrase_matches(const std::vector<std::string>& phrase, const std::vector<std::string>& tokens) {
    if (phrase.empty() || phrase.size() > tokens.size()) return false;
    for (std::size_t start = 0; start + phrase.size() <= tokens.size(); ++start) {
        bool all = true;
        for (std::size_t k = 0; k < phrase.size() && all; ++k) {
            all = glob_match(phrase[k], tokens[start + k]);
        }
        if (all) return true;
    }
    return false;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool has_shell_prompt(std::string_view query) {
    std::size_t pos = 0;
    while (pos <= query.size()) {
        const auto end = query.find('\n', pos);
        auto line = trim(query.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        if (line.starts_with("$ ") || line.starts_with("PS>")) return true;
        // user@host:~/dir$ cmd
        const auto at = line.find('@');
        const auto colon = line.find(':');
        const auto dollar = line.find("$ ");
        if (at != std::string_view::npos && colon != std::string_view::npos && dollar != std::string_view::npos &&
            at < colon && colon < dollar) {
            return true;
        }
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return false;
}

constexpr std::array<std::string_view, 14> kQuestionWords{"what",  "why",  "how", "who",    "when",
                                                          "where", "which", "is", "are",    "can",
                                                          "does",  "do",   "should", "could"};

bool is_question(std::string_view query) {
    const auto t = trim(query);
    if (t.empty()) return false;
    if (t.back() == '?') return true;
    const auto tokens = tokenize(t);
    return !tokens.empty() &&
           std::find(kQuestionWords.begin(), kQuestionWords.end(), tokens.front()) != kQuestionWords.end();
}

bool has_inline_code(std::string_view query) {
    std::size_t ticks = 0;
    for (std::size_t i = 0; i < query.size(); ++i) {
        if (query.compare(i, 3, "```") == 0) {
            i += 2;
            continue;
        }
        if (query[i] == '`') ++ticks;
    }
    return ticks >= 2;
}

}  // namespace

std::string normalize_category_id(std::string_view id) {
    std::string out(trim(id));
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

CategoryRegistry::CategoryRegistry(std::vector<std::string> ids) {
    std::set<std::string> seen;
    for (auto& raw : ids) {
        auto id = normalize_category_id(raw);
        if (id.empty()) throw Error(ErrorKind::Validation, "categories: empty category id");
        if (!seen.insert(id).second) throw Error(ErrorKind::Validation, "categories: duplicate id '" + id + "'");
        ids_.push_back(std::move(id));
    }
    if (!seen.contains(std::string(kUnknownCategory))) ids_.emplace_back(kUnknownCategory);
}

CategoryRegistry CategoryRegistry::defaults() {
    return CategoryRegistry({"code", "compliance", "terminal", "safety", "rewriting", "content-generation", "research",
                             "comprehension", "retrieval", "analysis", "unknown"});
}

bool CategoryRegistry::contains(std::string_view id) const {
    return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

std::string_view to_string(StructuralCue cue) {
    switch (cue) {
        case StructuralCue::CodeFence: return "contains-code-fence";
        case StructuralCue::ShellPrompt: return "contains-shell-prompt";
        case StructuralCue::QuestionForm: return "is-question-form";
        case StructuralCue::Url: return "contains-url";
        case StructuralCue::InlineCode: return "contains-inline-code";
    }
    return "?";
}

StructuralCue parse_cue(std::string_view name) {
    for (auto cue : {StructuralCue::CodeFence, StructuralCue::ShellPrompt, StructuralCue::QuestionForm,
                     StructuralCue::Url, StructuralCue::InlineCode}) {
        if (to_string(cue) == name) return cue;
    }
    throw Error(ErrorKind::Validation, "unknown structural cue '" + std::string(name) + "'");
}

bool cue_matches(StructuralCue cue, std::string_view query) {
    switch (cue) {
        case StructuralCue::CodeFence: return query.find("```") != std::string_view::npos;
        case StructuralCue::ShellPrompt: return has_shell_prompt(query);
        case StructuralCue::QuestionForm: return is_question(query);
        case StructuralCue::Url:
            return query.find("http://") != std::string_view::npos || query.find("https://") != std::string_view::npos;
        case StructuralCue::InlineCode: return has_inline_code(query);
    }
    return false;
}

RuleSet::RuleSet(std::vector<DetectionRule> rules, const CategoryRegistry& registry) : rules_(std::move(rules)) {
    std::set<int> priorities;
    std::set<std::string> ids;
    for (auto& r : rules_) {
        const std::string where = "rules['" + r.id + "']";
        if (r.id.empty()) throw Error(ErrorKind::Validation, "rules: rule with empty id");
        if (!ids.insert(r.id).second) throw Error(ErrorKind::Validation, where + ": duplicate rule id");
        r.category = normalize_category_id(r.category);
        if (!registry.contains(r.category)) {
            throw Error(ErrorKind::Validation, where + ": category '" + r.category + "' is not registered");
        }
        if (r.keyword_patterns.empty() && r.structural_cues.empty()) {
            throw Error(ErrorKind::Validation, where + ": needs at least one keyword pattern or structural cue");
        }
        for (const auto& p : r.keyword_patterns) {
            if (tokenize(p, true).empty()) throw Error(ErrorKind::Validation, where + ": empty keyword pattern");
        }
        if (r.min_hits < 1) throw Error(ErrorKind::Validation, where + ": min_hits must be >= 1");
        if (!priorities.insert(r.priority).second) {
            throw Error(ErrorKind::Validation, where + ": priority " + std::to_string(r.priority) + " is not unique");
        }
    }
    std::sort(rules_.begin(), rules_.end(), [](const auto& a, const auto& b) { return a.priority > b.priority; });
}

RuleSet RuleSet::from_json(const json& j, const CategoryRegistry& registry) {
    try {
        const json& arr = j.is_object() ? j.at("rules") : j;
        if (!arr.is_array()) throw Error(ErrorKind::Validation, "rules: expected an array");
        std::vector<DetectionRule> rules;
        for (const auto& rj : arr) {
            DetectionRule r;
            r.category = rj.at("category").get<std::string>();
            r.id = rj.value("id", normalize_category_id(r.category));
            r.keyword_patterns = rj.value("keywords", std::vector<std::string>{});
            for (const auto& c : rj.value("cues", std::vector<std::string>{})) r.structural_cues.push_back(parse_cue(c));
            r.priority = rj.at("priority").get<int>();
            r.min_hits = rj.value("min_hits", 1);
            rules.push_back(std::move(r));
        }
        return RuleSet(std::move(rules), registry);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Validation, std::string("rules: ") + e.what());
    }
}

json RuleSet::to_json() const {
    json arr = json::array();
    for (const auto& r : rules_) {
        json cues = json::array();
        for (auto c : r.structural_cues) cues.push_back(detection::to_string(c));
        arr.push_back({{"id", r.id},
                       {"category", r.category},
                       {"keywords", r.keyword_patterns},
                       {"cues", cues},
                       {"priority", r.priority},
                       {"min_hits", r.min_hits}});
    }
    return {{"rules", arr}};
}

RuleSet load_rules(const std::filesystem::path& path, const CategoryRegistry& registry) {
    return RuleSet::from_json(profile::read_json_file(path), registry);
}

std::string_view to_string(DetectionStage stage) {
    switch (stage) {
        case DetectionStage::Rule: return "Rule";
        case DetectionStage::Classifier: return "Classifier";
        case DetectionStage::Fallback: return "Fallback";
    }
    return "?";
}

DetectionStage parse_stage(std::string_view name) {
    if (name == "Rule") return DetectionStage::Rule;
    if (name == "Classifier") return DetectionStage::Classifier;
    if (name == "Fallback") return DetectionStage::Fallback;
    throw Error(ErrorKind::Validation, "unknown detection stage '" + std::string(name) + "'");
}

json to_json(const DetectionResult& r) {
    json j = {{"category", r.category},
              {"confidence", r.confidence},
              {"stage", to_string(r.stage)},
              {"elapsed_s", r.elapsed_s}};
    j["rule_id"] = r.rule_id ? json(*r.rule_id) : json(nullptr);
    return j;
}

DetectionResult detection_result_from_json(const json& j) {
    try {
        DetectionResult r;
        r.category = j.at("category").get<std::string>();
        r.confidence = j.at("confidence").get<double>();
        r.stage = parse_stage(j.at("stage").get<std::string>());
        r.elapsed_s = j.value("elapsed_s", 0.0);
        if (j.contains("rule_id") && !j.at("rule_id").is_null()) r.rule_id = j.at("rule_id").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Protocol, std::string("detection result: ") + e.what());
    }
}

namespace {

int count_hits(const DetectionRule& rule, std::string_view query, const std::vector<std::string>& tokens) {
    int hits = 0;
    for (const auto& pattern : rule.keyword_patterns) {
        if (phrase_matches(tokenize(pattern, true), tokens)) ++hits;
    }
    for (auto cue : rule.structural_cues) {
        if (cue_matches(cue, query)) ++hits;
    }
    return hits;
}

}  // namespace

int count_rule_hits(const DetectionRule& rule, std::string_view query) {
    return count_hits(rule, query, tokenize(query));
}

std::optional<DetectionResult> rule_detect(std::string_view query, const RuleSet& rules) {
    const auto start = Clock::now();
    const auto tokens = tokenize(query);
    for (const auto& rule : rules.rules()) {
        if (count_hits(rule, query, tokens) >= rule.min_hits) {
            DetectionResult r;
            r.category = rule.category;
            r.confidence = 1.0;
            r.stage = DetectionStage::Rule;
            r.rule_id = rule.id;
            r.elapsed_s = seconds_since(start);
            return r;
        }
    }
    return std::nullopt;
}

DetectionResult classifier_detect(std::string_view query, ClassifierClient& client, const CategoryRegistry& registry) {
    const auto start = Clock::now();
    auto label = client.label(query);
    auto category = normalize_category_id(label.category);
    if (!registry.contains(category)) {
        throw Error(ErrorKind::Protocol, "classifier returned unregistered category '" + label.category + "'");
    }
    if (!(label.confidence >= 0.0 && label.confidence <= 1.0)) {
        throw Error(ErrorKind::Protocol, "classifier confidence outside [0,1]");
    }
    DetectionResult r;
    r.category = std::move(category);
    r.confidence = label.confidence;
    r.stage = DetectionStage::Classifier;
    r.elapsed_s = seconds_since(start);
    return r;
}

DetectionResult hybrid_detect(std::string_view query, const RuleSet& rules, ClassifierClient* client,
                              const CategoryRegistry& registry, std::string_view fallback_category) {
    const auto start = Clock::now();
    if (auto hit = rule_detect(query, rules)) return *hit;
    if (client != nullptr) {
        try {
            auto r = classifier_detect(query, *client, registry);
            r.elapsed_s = seconds_since(start);
            return r;
        } catch (const std::exception&) {
            // detection must never stall routing
        }
    }
    DetectionResult r;
    r.category = std::string(fallback_category);
    r.confidence = 0.0;
    r.stage = DetectionStage::Fallback;
    r.elapsed_s = seconds_since(start);
    return r;
}

}  // namespace quantclaw::detection
