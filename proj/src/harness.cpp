#include "himm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "himm/text_format.hpp"
#include "himm/wire_client.hpp"

namespace fs = std::filesystem;

namespace himm {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected on/off, got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        return text::parse_double(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    }
}

long long parse_integer(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        long long n = std::stoll(v, &used);
        if (used != v.size()) throw ConfigError("");
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
    }
}

std::string stem_of(const std::string& path) {
    return fs::path(path).stem().string();
}

} // namespace

void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "resolution") cfg.agent.resolution = parse_real(value, key);
    else if (key == "max_range") cfg.agent.max_range = parse_real(value, key);
    else if (key == "d_min") cfg.agent.d_min = parse_real(value, key);
    else if (key == "min_unknown_area") cfg.agent.min_unknown_area = int(parse_integer(value, key));
    else if (key == "k_retrieve") cfg.agent.k_retrieve = size_t(parse_integer(value, key));
    else if (key == "k_match") cfg.agent.k_match = size_t(parse_integer(value, key));
    else if (key == "rule_top_k") cfg.agent.rule_top_k = size_t(parse_integer(value, key));
    else if (key == "step_budget") cfg.agent.step_budget = int(parse_integer(value, key));
    else if (key == "success_radius") cfg.agent.success_radius = parse_real(value, key);
    else if (key == "candidate_trigger") cfg.agent.candidate_trigger = parse_real(value, key);
    else if (key == "step_length") cfg.agent.step_length = parse_real(value, key);
    else if (key == "recall") cfg.agent.recall_enabled = parse_bool(value, key);
    else if (key == "rules") cfg.agent.rules_enabled = parse_bool(value, key);
    else if (key == "seed") {
        cfg.seed = uint64_t(parse_integer(value, key));
        cfg.agent.rng_seed = cfg.seed;
    } else if (key == "gateway") {
        if (value == "mock") cfg.gateway = GatewayMode::Mock;
        else if (value == "wire") cfg.gateway = GatewayMode::Wire;
        else throw ConfigError("config key 'gateway': expected mock or wire, got '" + value + "'");
    } else if (key == "chat_script") cfg.chat_script = value;
    else if (key == "api_base") cfg.api_base = value;
    else if (key == "api_key") cfg.api_key = value;
    else if (key == "chat_model") cfg.chat_model = value;
    else if (key == "embed_model") cfg.embed_model = value;
    else if (key == "vocabulary") cfg.vocabulary_file = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::pair<std::string, std::string>>& env,
                         const std::vector<std::pair<std::string, std::string>>& flags) {
    RunConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file: " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw ConfigError("malformed config file: " + config_path);
        for (const auto& [key, value] : j.items()) {
            std::string text_value;
            if (value.is_string()) text_value = value.get<std::string>();
            else if (value.is_boolean()) text_value = value.get<bool>() ? "true" : "false";
            else if (value.is_number()) text_value = value.dump();
            else throw ConfigError("config key '" + key + "': unsupported value type");
            apply_config_value(cfg, key, text_value);
        }
    }
    for (const auto& [key, value] : env) apply_config_value(cfg, key, value);
    for (const auto& [key, value] : flags) apply_config_value(cfg, key, value);
    return cfg;
}

std::vector<std::pair<std::string, std::string>> config_env_pairs() {
    std::vector<std::pair<std::string, std::string>> out;
    const std::pair<const char*, const char*> vars[] = {
        {"HIMM_API_BASE", "api_base"},
        {"HIMM_API_KEY", "api_key"},
        {"HIMM_CHAT_MODEL", "chat_model"},
        {"HIMM_EMBED_MODEL", "embed_model"},
    };
    for (const auto& [env_name, key] : vars)
        if (const char* v = std::getenv(env_name)) out.push_back({key, v});
    return out;
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "resolution " << text::format_double(cfg.agent.resolution) << "\n";
    os << "max_range " << text::format_double(cfg.agent.max_range) << "\n";
    os << "d_min " << text::format_double(cfg.agent.d_min) << "\n";
    os << "min_unknown_area " << cfg.agent.min_unknown_area << "\n";
    os << "k_retrieve " << cfg.agent.k_retrieve << "\n";
    os << "k_match " << cfg.agent.k_match << "\n";
    os << "rule_top_k " << cfg.agent.rule_top_k << "\n";
    os << "step_budget " << cfg.agent.step_budget << "\n";
    os << "success_radius " << text::format_double(cfg.agent.success_radius) << "\n";
    os << "candidate_trigger " << text::format_double(cfg.agent.candidate_trigger) << "\n";
    os << "step_length " << text::format_double(cfg.agent.step_length) << "\n";
    os << "recall " << (cfg.agent.recall_enabled ? "on" : "off") << "\n";
    os << "rules " << (cfg.agent.rules_enabled ? "on" : "off") << "\n";
    os << "gateway " << (cfg.gateway == GatewayMode::Mock ? "mock" : "wire") << "\n";
    os << "chat_script " << text::encode_field(cfg.chat_script) << "\n";
    os << "api_base " << text::encode_field(cfg.api_base) << "\n";
    os << "api_key " << (cfg.api_key.empty() ? "unset" : "set") << "\n";
    os << "chat_model " << text::encode_field(cfg.chat_model) << "\n";
    os << "embed_model " << text::encode_field(cfg.embed_model) << "\n";
    os << "vocabulary " << text::encode_field(cfg.vocabulary_file) << "\n";
    os << "seed " << cfg.seed << "\n";
    return os.str();
}

std::string config_fingerprint(const RunConfig& cfg) {
    return text::checksum_hex(render_config(cfg));
}

namespace {

std::vector<ScriptRule> policy_rules() {
    // Anchored on the request tags the loop and the distiller send.
    return {
        {"decide-explore", "", "no", -1},
        {"verify-locality", "", "yes", -1},
        {"choose-frontier", "", "0", -1},
        {"verify-target", "", "yes", -1},
        {"ready-check", "", "yes", -1},
        {"answer", "", "unknown", -1},
        {"judge", "", "no", -1},
        {"extract-pseudocode", "",
         "{\"variables\":[{\"name\":\"target\",\"description\":\"what the task asks about\"},"
         "{\"name\":\"answer\",\"description\":\"the reply under construction\"}],"
         "\"functions\":[{\"name\":\"explore\",\"description\":\"visit ranked frontiers\"},"
         "{\"name\":\"verify_target\",\"description\":\"confirm a candidate sighting\"},"
         "{\"name\":\"compose_answer\",\"description\":\"answer from gathered views\"}],"
         "\"body\":[\"call explore until target\",\"call verify_target\","
         "\"set answer to call compose_answer\",\"return answer\"]}",
         -1},
        {"extract-rules", "", "[]", -1},
    };
}

} // namespace

ScriptedChatClient make_policy_client() {
    ScriptedChatClient client("yes");
    for (ScriptRule& r : policy_rules()) client.add_rule(std::move(r));
    return client;
}

std::unique_ptr<ChatClient> make_chat_client(const RunConfig& cfg) {
    if (cfg.gateway == GatewayMode::Wire) {
        WireConfig wc;
        wc.api_base = cfg.api_base;
        wc.api_key = cfg.api_key;
        if (!cfg.chat_model.empty()) wc.chat_model = cfg.chat_model;
        if (!cfg.embed_model.empty()) wc.embed_model = cfg.embed_model;
        return std::make_unique<WireChatClient>(wc);
    }
    auto client = cfg.chat_script.empty()
                      ? std::make_unique<ScriptedChatClient>(make_policy_client())
                      : std::make_unique<ScriptedChatClient>(
                            ScriptedChatClient::from_file(cfg.chat_script));
    if (!cfg.chat_script.empty())
        // File rules were added first and win; the policy backs them up.
        for (ScriptRule& r : policy_rules()) client->add_rule(std::move(r));
    return client;
}

SuiteSpec load_suite(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open suite file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IntegrityError(path + ": empty file");
    {
        const auto head = text::split_tokens(line);
        if (head.size() != 2 || head[0] != "himm-suite")
            throw ValidationError(path + ": expected a himm-suite file");
        if (head[1] != "v1")
            throw MigrationError(path + ": unsupported himm-suite version " + head[1]);
    }
    const fs::path base = fs::path(path).parent_path();
    const auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_relative() ? (base / fp).string() : p;
    };
    SuiteSpec suite;
    bool ended = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto t = text::split_tokens(line);
        if (t.empty()) continue;
        if (ended) throw ValidationError(path + ": content after end marker");
        if (t.size() == 3 && t[0] == "episode") {
            suite.episodes.push_back({resolve(text::decode_field(t[1])),
                                      resolve(text::decode_field(t[2]))});
        } else if (t.size() == 1 && t[0] == "end") {
            ended = true;
        } else {
            throw ValidationError(path + ": malformed line '" + line + "'");
        }
    }
    if (!ended) throw IntegrityError(path + ": missing end marker (truncated?)");
    return suite;
}

void save_suite(const SuiteSpec& suite, const std::string& path) {
    std::ostringstream os;
    os << "himm-suite v1\n";
    for (const SuiteEpisodeRef& e : suite.episodes)
        os << "episode " << text::encode_field(e.scene_path) << ' '
           << text::encode_field(e.script_path) << "\n";
    os << "end\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << os.str();
    if (!out) throw IoError("write failed for " + path);
}

SuiteAggregates compute_aggregates(const std::vector<EpisodeResult>& rows) {
    SuiteAggregates agg;
    if (rows.empty()) return agg;
    double successes = 0.0, spl = 0.0, steps = 0.0, matches = 0.0;
    for (const EpisodeResult& r : rows) {
        successes += r.success ? 1.0 : 0.0;
        spl += r.spl;
        steps += double(r.steps);
        matches += r.judged_match ? 1.0 : 0.0;
    }
    const double n = double(rows.size());
    agg.success_rate = successes / n;
    agg.mean_spl = spl / n;
    agg.mean_steps = steps / n;
    agg.match_rate = matches / n;
    return agg;
}

SuiteResult run_suite(const SuiteSpec& suite, const RunConfig& cfg, int jobs,
                      EpisodicStore* episodic, const RuleStore* rules) {
    validate_config(cfg.agent);
    const std::vector<std::string> vocab = cfg.vocabulary_file.empty()
                                               ? default_vocabulary()
                                               : load_vocabulary(cfg.vocabulary_file);
    SyntheticEmbedder sim_embedder(vocab, 384, cfg.seed);
    std::unique_ptr<Embedder> wire_embedder;
    if (cfg.gateway == GatewayMode::Wire) {
        WireConfig wc;
        wc.api_base = cfg.api_base;
        wc.api_key = cfg.api_key;
        if (!cfg.embed_model.empty()) wc.embed_model = cfg.embed_model;
        wc.embed_dim = sim_embedder.dim();
        wire_embedder = std::make_unique<WireEmbedder>(wc);
    }
    Embedder& agent_embedder =
        wire_embedder ? static_cast<Embedder&>(*wire_embedder) : sim_embedder;

    EpisodicStore local_store(sim_embedder.dim());
    EpisodicStore* shared = nullptr;
    if (cfg.agent.recall_enabled) shared = episodic ? episodic : &local_store;

    SuiteResult result;
    result.episodes.resize(suite.episodes.size());
    result.config_fingerprint = config_fingerprint(cfg);
    result.seed = cfg.seed;

    const auto run_one = [&](size_t i) {
        const SuiteEpisodeRef& ref = suite.episodes[i];
        std::ostringstream id;
        id << 's' << std::setw(3) << std::setfill('0') << i << '-' << stem_of(ref.script_path);
        EpisodeResult row;
        row.episode_id = id.str();
        try {
            SceneSpec scene = load_scene(ref.scene_path);
            EpisodeScript script = load_script(ref.script_path);
            validate_scene(scene, vocab);
            validate_script(script, scene);
            auto chat = make_chat_client(cfg);
            ChatClient* judge = cfg.gateway == GatewayMode::Wire ? chat.get() : nullptr;
            SimEnvironment env(scene, script, sim_embedder, judge);
            AgentConfig agent_cfg = cfg.agent;
            agent_cfg.rng_seed = cfg.seed + i;
            GoalSpec goal =
                make_goal(script.question, script.target_category, {}, {}, agent_embedder);
            row = run_episode(agent_cfg, goal, row.episode_id, env, *chat, agent_embedder,
                              shared, rules);
        } catch (const std::exception& e) {
            row.aborted = true;
            row.abort_reason = e.what();
        }
        result.episodes[i] = std::move(row);
    };

    const size_t n = suite.episodes.size();
    const bool parallel = shared == nullptr && jobs > 1 && n > 1;
    if (!parallel) {
        for (size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        const size_t workers = std::min(size_t(jobs), n);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
            });
        for (std::thread& t : pool) t.join();
    }

    result.aggregates = compute_aggregates(result.episodes);
    return result;
}

namespace {

std::string aggregate_text(const std::optional<double>& v) {
    return v ? text::format_double(*v) : "n/a";
}

std::optional<double> parse_aggregate(const std::string& s, const std::string& path) {
    if (s == "n/a") return std::nullopt;
    try {
        return text::parse_double(s);
    } catch (const std::exception&) {
        throw ValidationError(path + ": bad aggregate value '" + s + "'");
    }
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || *a == *b;
}

} // namespace

void save_suite_result(const SuiteResult& result, const std::string& path) {
    const SuiteAggregates check = compute_aggregates(result.episodes);
    if (!same(check.success_rate, result.aggregates.success_rate) ||
        !same(check.mean_spl, result.aggregates.mean_spl) ||
        !same(check.mean_steps, result.aggregates.mean_steps) ||
        !same(check.match_rate, result.aggregates.match_rate))
        throw ValidationError("suite aggregates disagree with the per-episode rows");
    std::ostringstream os;
    os << "seed " << result.seed << "\n";
    os << "config " << result.config_fingerprint << "\n";
    for (const EpisodeResult& r : result.episodes)
        os << "episode " << text::encode_field(r.episode_id) << ' '
           << text::encode_field(r.answer) << ' ' << (r.success ? 1 : 0) << ' '
           << (r.judged_match ? 1 : 0) << ' ' << (r.judge_error ? 1 : 0) << ' ' << r.steps
           << ' ' << text::format_double(r.path_len) << ' '
           << text::format_double(r.shortest_len) << ' ' << text::format_double(r.spl)
           << ' ' << text::format_double(r.final_distance) << ' ' << (r.aborted ? 1 : 0)
           << ' ' << text::encode_field(r.abort_reason) << "\n";
    os << "agg success_rate " << aggregate_text(result.aggregates.success_rate) << "\n";
    os << "agg mean_spl " << aggregate_text(result.aggregates.mean_spl) << "\n";
    os << "agg mean_steps " << aggregate_text(result.aggregates.mean_steps) << "\n";
    os << "agg match_rate " << aggregate_text(result.aggregates.match_rate) << "\n";

    const std::string body = os.str();
    std::string out = "himm-result v1\n" + body + "checksum " + text::checksum_hex(body) +
                      "\nend\n";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << out;
    if (!f) throw IoError("write failed for " + path);
}

SuiteResult load_suite_result(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::vector<std::string> lines;
    {
        std::string line;
        std::istringstream is(buf.str());
        while (std::getline(is, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
    }
    if (lines.empty()) throw IntegrityError(path + ": empty file");
    const auto head = text::split_tokens(lines[0]);
    if (head.size() != 2 || head[0] != "himm-result")
        throw ValidationError(path + ": expected a himm-result file");
    if (head[1] != "v1")
        throw MigrationError(path + ": unsupported himm-result version " + head[1]);
    if (lines.size() < 3 || lines.back() != "end")
        throw IntegrityError(path + ": missing end marker (truncated?)");
    const auto ck = text::split_tokens(lines[lines.size() - 2]);
    if (ck.size() != 2 || ck[0] != "checksum")
        throw IntegrityError(path + ": missing checksum line");
    std::string body;
    for (size_t i = 1; i + 2 < lines.size(); ++i) {
        body += lines[i];
        body += '\n';
    }
    if (text::checksum_hex(body) != ck[1])
        throw IntegrityError(path + ": checksum mismatch");

    SuiteResult result;
    for (size_t i = 1; i + 2 < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.size() == 2 && t[0] == "seed") {
            result.seed = uint64_t(std::stoull(t[1]));
        } else if (t.size() == 2 && t[0] == "config") {
            result.config_fingerprint = t[1];
        } else if (t.size() == 13 && t[0] == "episode") {
            EpisodeResult r;
            r.episode_id = text::decode_field(t[1]);
            r.answer = text::decode_field(t[2]);
            r.success = t[3] == "1";
            r.judged_match = t[4] == "1";
            r.judge_error = t[5] == "1";
            r.steps = int(std::stoll(t[6]));
            r.path_len = text::parse_double(t[7]);
            r.shortest_len = text::parse_double(t[8]);
            r.spl = text::parse_double(t[9]);
            r.final_distance = text::parse_double(t[10]);
            r.aborted = t[11] == "1";
            r.abort_reason = text::decode_field(t[12]);
            result.episodes.push_back(std::move(r));
        } else if (t.size() == 3 && t[0] == "agg") {
            if (t[1] == "success_rate") result.aggregates.success_rate = parse_aggregate(t[2], path);
            else if (t[1] == "mean_spl") result.aggregates.mean_spl = parse_aggregate(t[2], path);
            else if (t[1] == "mean_steps") result.aggregates.mean_steps = parse_aggregate(t[2], path);
            else if (t[1] == "match_rate") result.aggregates.match_rate = parse_aggregate(t[2], path);
            else throw ValidationError(path + ": unknown aggregate '" + t[1] + "'");
        } else {
            throw ValidationError(path + ": malformed line '" + lines[i] + "'");
        }
    }
    return result;
}

std::string render_suite_table(const SuiteResult& result) {
    std::ostringstream os;
    size_t id_width = 7;
    for (const EpisodeResult& r : result.episodes)
        id_width = std::max(id_width, r.episode_id.size());
    os << std::left << std::setw(int(id_width) + 2) << "episode" << std::right
       << std::setw(8) << "success" << std::setw(7) << "match" << std::setw(7) << "steps"
       << std::setw(8) << "spl" << std::setw(10) << "path_m" << "  answer\n";
    os << std::setprecision(3) << std::fixed;
    for (const EpisodeResult& r : result.episodes) {
        os << std::left << std::setw(int(id_width) + 2) << r.episode_id << std::right
           << std::setw(8) << (r.aborted ? "abort" : (r.success ? "yes" : "no"))
           << std::setw(7) << (r.judged_match ? "yes" : "no") << std::setw(7) << r.steps
           << std::setw(8) << r.spl << std::setw(10) << r.path_len << "  "
           << (r.aborted ? r.abort_reason : r.answer) << "\n";
    }
    const auto pct = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        std::ostringstream p;
        p << std::setprecision(3) << std::fixed << *v;
        return p.str();
    };
    os << "aggregates: success_rate=" << pct(result.aggregates.success_rate)
       << " mean_spl=" << pct(result.aggregates.mean_spl)
       << " mean_steps=" << pct(result.aggregates.mean_steps)
       << " match_rate=" << pct(result.aggregates.match_rate) << "\n";
    return os.str();
}

std::string render_episode_result(const EpisodeResult& r) {
    std::ostringstream os;
    os << "id " << r.episode_id << "\n";
    os << "answer " << r.answer << "\n";
    os << "success " << (r.success ? 1 : 0) << "\n";
    os << "judged_match " << (r.judged_match ? 1 : 0) << "\n";
    os << "judge_error " << (r.judge_error ? 1 : 0) << "\n";
    os << "steps " << r.steps << "\n";
    os << "path_len " << text::format_double(r.path_len) << "\n";
    os << "shortest_len " << text::format_double(r.shortest_len) << "\n";
    os << "spl " << text::format_double(r.spl) << "\n";
    os << "final_distance " << text::format_double(r.final_distance) << "\n";
    os << "aborted " << (r.aborted ? 1 : 0) << "\n";
    if (!r.abort_reason.empty()) os << "abort_reason " << r.abort_reason << "\n";
    return os.str();
}

DistillSummary build_semantic_memory(const std::string& train_dir,
                                     const ThresholdSchedule& schedule, ChatClient& llm,
                                     Embedder& embedder, RuleStore& store) {
    if (!fs::is_directory(train_dir))
        throw IoError("not a directory: " + train_dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(train_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".trace")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    DistillSummary summary;
    for (const std::string& path : paths) {
        ++summary.traces;
        const size_t before = store.size();
        try {
            EpisodeTrace trace = load_trace(path);
            distill_episode(trace.gt_answer, trace.log, trace.gt, schedule, llm, embedder,
                            store);
            ++summary.distilled;
            summary.rules_added += store.size() - before;
        } catch (const Error&) {
            ++summary.failed;
        }
    }
    return summary;
}

} // namespace himm
