#include "himm/model_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "himm/text_format.hpp"

namespace himm {

const char* schema_name(ReplySchema s) {
    switch (s) {
        case ReplySchema::YesNo: return "yes-no";
        case ReplySchema::IndexChoice: return "index-choice";
        case ReplySchema::GoalDecomposition: return "goal-decomposition";
        case ReplySchema::Workflow: return "workflow";
        case ReplySchema::Rules: return "rules";
        case ReplySchema::FreeText: return "free-text";
    }
    return "?";
}

const char* rule_form_name(RuleForm f) {
    switch (f) {
        case RuleForm::IfThen: return "if_then";
        case RuleForm::SituationSuggestion: return "situation_suggestion";
        case RuleForm::ProblemSolution: return "problem_solution";
    }
    return "?";
}

std::optional<RuleForm> parse_rule_form(const std::string& s) {
    std::string t;
    for (char c : s)
        if (c != '-' && c != '_' && c != ' ') t.push_back(char(std::tolower((unsigned char)c)));
    if (t == "ifthen") return RuleForm::IfThen;
    if (t == "situationsuggestion") return RuleForm::SituationSuggestion;
    if (t == "problemsolution") return RuleForm::ProblemSolution;
    return std::nullopt;
}

namespace {

using nlohmann::json;

// Pulls the first JSON value out of a reply that may carry prose or
// markdown fences around it.
std::optional<json> extract_json(const std::string& raw) {
    auto try_parse = [](const std::string& s) -> std::optional<json> {
        json j = json::parse(s, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(raw)) return j;
    size_t obj = raw.find('{');
    size_t arr = raw.find('[');
    size_t start = std::min(obj == std::string::npos ? raw.size() : obj,
                            arr == std::string::npos ? raw.size() : arr);
    if (start == raw.size()) return std::nullopt;
    char close = raw[start] == '{' ? '}' : ']';
    size_t end = raw.rfind(close);
    if (end == std::string::npos || end <= start) return std::nullopt;
    return try_parse(raw.substr(start, end - start + 1));
}

std::string lower_trim(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(char(std::tolower((unsigned char)c)));
    size_t b = out.find_first_not_of(" \t\r\n");
    size_t e = out.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    return out.substr(b, e - b + 1);
}

std::optional<bool> parse_yes_no(const std::string& raw) {
    std::string t = lower_trim(raw);
    std::string word;
    for (size_t i = 0; i <= t.size(); ++i) {
        if (i < t.size() && std::isalpha((unsigned char)t[i])) {
            word.push_back(t[i]);
            continue;
        }
        if (word == "yes") return true;
        if (word == "no") return false;
        word.clear();
    }
    return std::nullopt;
}

std::optional<int> parse_index(const std::string& raw, int option_count) {
    for (size_t i = 0; i < raw.size(); ++i) {
        if (std::isdigit((unsigned char)raw[i])) {
            size_t j = i;
            while (j < raw.size() && std::isdigit((unsigned char)raw[j])) ++j;
            int v = std::stoi(raw.substr(i, j - i));
            if (option_count > 0 && v >= option_count) return std::nullopt;
            return v;
        }
    }
    return std::nullopt;
}

std::optional<GoalParts> parse_goal(const std::string& raw) {
    auto j = extract_json(raw);
    if (!j || !j->is_object()) return std::nullopt;
    GoalParts g;
    if (!j->contains("target") || !(*j)["target"].is_string()) return std::nullopt;
    g.target = (*j)["target"].get<std::string>();
    if (g.target.empty()) return std::nullopt;
    auto read_list = [&](const char* key, std::vector<std::string>& out) -> bool {
        if (!j->contains(key)) return true;
        if (!(*j)[key].is_array()) return false;
        for (const auto& e : (*j)[key]) {
            if (!e.is_string()) return false;
            out.push_back(e.get<std::string>());
        }
        return true;
    };
    if (!read_list("relative_objects", g.relative_objects)) return std::nullopt;
    if (!read_list("relative_areas", g.relative_areas)) return std::nullopt;
    return g;
}

std::optional<std::vector<WorkflowSymbol>> parse_symbols(const json& j) {
    if (!j.is_array()) return std::nullopt;
    std::vector<WorkflowSymbol> out;
    for (const auto& e : j) {
        WorkflowSymbol s;
        if (e.is_string()) {
            s.name = e.get<std::string>();
        } else if (e.is_object() && e.contains("name") && e["name"].is_string()) {
            s.name = e["name"].get<std::string>();
            if (e.contains("description") && e["description"].is_string())
                s.description = e["description"].get<std::string>();
        } else {
            return std::nullopt;
        }
        if (s.name.empty()) return std::nullopt;
        out.push_back(std::move(s));
    }
    return out;
}

std::optional<WorkflowParts> parse_workflow(const std::string& raw) {
    auto j = extract_json(raw);
    if (!j || !j->is_object()) return std::nullopt;
    WorkflowParts w;
    if (j->contains("variables")) {
        auto v = parse_symbols((*j)["variables"]);
        if (!v) return std::nullopt;
        w.variables = std::move(*v);
    }
    if (j->contains("functions")) {
        auto v = parse_symbols((*j)["functions"]);
        if (!v) return std::nullopt;
        w.functions = std::move(*v);
    }
    if (!j->contains("body") || !(*j)["body"].is_array()) return std::nullopt;
    for (const auto& e : (*j)["body"]) {
        if (!e.is_string()) return std::nullopt;
        w.body.push_back(e.get<std::string>());
    }
    if (w.body.empty()) return std::nullopt;
    return w;
}

std::optional<std::vector<RuleDraft>> parse_rules(const std::string& raw) {
    auto j = extract_json(raw);
    if (!j) return std::nullopt;
    const json* arr = nullptr;
    if (j->is_array())
        arr = &*j;
    else if (j->is_object() && j->contains("rules") && (*j)["rules"].is_array())
        arr = &(*j)["rules"];
    else
        return std::nullopt;
    std::vector<RuleDraft> out;
    for (const auto& e : *arr) {
        if (!e.is_object()) return std::nullopt;
        RuleDraft r;
        for (const char* key : {"form", "key", "value", "anchor"})
            if (!e.contains(key) || !e[key].is_string()) return std::nullopt;
        auto form = parse_rule_form(e["form"].get<std::string>());
        if (!form) return std::nullopt;
        r.form = *form;
        r.key = e["key"].get<std::string>();
        r.value = e["value"].get<std::string>();
        r.anchor = e["anchor"].get<std::string>();
        if (r.key.empty() || r.value.empty() || r.anchor.empty()) return std::nullopt;
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

std::optional<ParsedReply> try_parse_reply(const ChatRequest& req, const std::string& raw) {
    ParsedReply out;
    out.schema = req.schema;
    out.raw = raw;
    switch (req.schema) {
        case ReplySchema::YesNo: {
            auto v = parse_yes_no(raw);
            if (!v) return std::nullopt;
            out.yes = *v;
            return out;
        }
        case ReplySchema::IndexChoice: {
            auto v = parse_index(raw, req.option_count);
            if (!v) return std::nullopt;
            out.index = *v;
            return out;
        }
        case ReplySchema::GoalDecomposition: {
            auto v = parse_goal(raw);
            if (!v) return std::nullopt;
            out.goal = std::move(*v);
            return out;
        }
        case ReplySchema::Workflow: {
            auto v = parse_workflow(raw);
            if (!v) return std::nullopt;
            out.workflow = std::move(*v);
            return out;
        }
        case ReplySchema::Rules: {
            auto v = parse_rules(raw);
            if (!v) return std::nullopt;
            out.rules = std::move(*v);
            return out;
        }
        case ReplySchema::FreeText: {
            if (lower_trim(raw).empty()) return std::nullopt;
            out.text = raw;
            return out;
        }
    }
    return std::nullopt;
}

ParsedReply complete(ChatClient& client, const ChatRequest& req) {
    ChatRequest attempt = req;
    std::string last_raw;
    const int tries = std::max(0, req.max_retries) + 1;
    for (int i = 0; i < tries; ++i) {
        if (i > 0) {
            ChatTurn corrective;
            corrective.role = "user";
            corrective.text = std::string("Your previous reply could not be parsed as ") +
                              schema_name(req.schema) +
                              ". Answer again in exactly the required format, with no extra text.";
            attempt.turns.push_back(corrective);
        }
        last_raw = client.raw_complete(attempt);
        if (auto parsed = try_parse_reply(req, last_raw)) return *parsed;
    }
    throw SchemaError(std::string("reply failed ") + schema_name(req.schema) +
                          " schema after retries",
                      last_raw);
}

void normalize_in_place(std::vector<float>& v) {
    double norm2 = 0.0;
    for (float x : v) norm2 += double(x) * double(x);
    if (norm2 <= 0.0) {
        if (!v.empty()) v[0] = 1.0f;
        return;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (float& x : v) x = float(x * inv);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

std::vector<float> hash_to_unit_vector(uint64_t seed, const std::string& text, size_t dim) {
    uint64_t mix = seed ^ (text::fnv1a(text) * 0x9E3779B97F4A7C15ULL);
    std::mt19937_64 rng(mix);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> v(dim);
    for (size_t i = 0; i < dim; ++i) v[i] = float(gauss(rng));
    normalize_in_place(v);
    return v;
}

std::vector<float> MockEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("embed: empty text");
    return hash_to_unit_vector(seed_, text, dim_);
}

ScriptedChatClient::ScriptedChatClient(std::string default_reply)
    : default_reply_(std::move(default_reply)) {}

ScriptedChatClient::ScriptedChatClient(ScriptedChatClient&& other) noexcept {
    std::lock_guard<std::mutex> lock(other.mu_);
    rules_ = std::move(other.rules_);
    default_reply_ = std::move(other.default_reply_);
    calls_ = other.calls_;
}

void ScriptedChatClient::add_rule(ScriptRule rule) {
    std::lock_guard<std::mutex> lock(mu_);
    rules_.push_back(std::move(rule));
}

std::string ScriptedChatClient::raw_complete(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
    std::string haystack = req.system;
    for (const ChatTurn& t : req.turns) {
        haystack += '\n';
        haystack += t.text;
        for (const std::string& r : t.image_refs) {
            haystack += '\n';
            haystack += r;
        }
    }
    for (ScriptRule& rule : rules_) {
        if (rule.remaining == 0) continue;
        if (!rule.tag.empty() &&
            std::find(req.tags.begin(), req.tags.end(), rule.tag) == req.tags.end())
            continue;
        if (!rule.contains.empty() && haystack.find(rule.contains) == std::string::npos)
            continue;
        if (rule.remaining > 0) --rule.remaining;
        return rule.reply;
    }
    return default_reply_;
}

int ScriptedChatClient::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

ScriptedChatClient ScriptedChatClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ConfigError("malformed script file: " + path);
    ScriptedChatClient client(j.value("default", std::string("yes")));
    if (j.contains("rules")) {
        for (const auto& e : j["rules"]) {
            ScriptRule r;
            r.tag = e.value("tag", std::string());
            r.contains = e.value("contains", std::string());
            r.reply = e.value("reply", std::string());
            r.remaining = e.value("times", -1);
            client.add_rule(std::move(r));
        }
    }
    return client;
}

} // namespace himm
