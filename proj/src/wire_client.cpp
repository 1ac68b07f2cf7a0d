#include "himm/wire_client.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifdef HIMM_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "himm/text_format.hpp"

namespace himm {

namespace {

using nlohmann::json;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

// Splits "scheme://host[:port]/prefix" into client root and path prefix.
void split_base(const std::string& base, std::string& root, std::string& prefix) {
    size_t scheme = base.find("://");
    size_t path_start = scheme == std::string::npos ? base.find('/')
                                                    : base.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        root = base;
        prefix = "";
    } else {
        root = base.substr(0, path_start);
        prefix = base.substr(path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }
}

std::string guess_mime(const std::string& path) {
    auto ends_with = [&](const char* suf) {
        std::string s(suf);
        return path.size() >= s.size() &&
               path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
    if (ends_with(".pgm")) return "image/x-portable-graymap";
    return "image/png";
}

// File refs become base64 data URIs here, at the wire boundary; refs that
// are not readable files travel as inline text instead.
json content_for_turn(const ChatTurn& turn) {
    json parts = json::array();
    std::string text = turn.text;
    for (const std::string& ref : turn.image_refs) {
        std::ifstream in(ref, std::ios::binary);
        if (!in) {
            text += "\n[image: " + ref + "]";
            continue;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string b64 = text::encode_bytes(buf.str());
        json img = {{"type", "image_url"},
                    {"image_url", {{"url", "data:" + guess_mime(ref) + ";base64," + b64}}}};
        parts.push_back(img);
    }
    parts.insert(parts.begin(), json{{"type", "text"}, {"text", text}});
    return parts;
}

json post_json(const WireConfig& cfg, const std::string& endpoint, const json& body) {
    std::string root, prefix;
    split_base(cfg.api_base, root, prefix);
    if (root.empty()) throw ConfigError("wire client: HIMM_API_BASE not set");
#ifndef HIMM_WITH_TLS
    if (root.rfind("https://", 0) == 0)
        throw ConfigError("wire client built without TLS cannot reach https endpoints");
#endif
    httplib::Client cli(root);
    cli.set_read_timeout(cfg.timeout_sec, 0);
    cli.set_connection_timeout(10, 0);
    httplib::Headers headers;
    if (!cfg.api_key.empty())
        headers.emplace("Authorization", "Bearer " + cfg.api_key);
    auto res = cli.Post(prefix + endpoint, headers, body.dump(), "application/json");
    if (!res)
        throw GatewayError("wire client: transport failure reaching " + root + endpoint,
                           true);
    if (res->status != 200)
        throw GatewayError("wire client: HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 300),
                           res->status >= 500 || res->status == 429);
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
        throw GatewayError("wire client: non-JSON response body", false);
    return reply;
}

} // namespace

WireConfig wire_config_from_env(WireConfig base) {
    base.api_base = env_or("HIMM_API_BASE", base.api_base);
    base.api_key = env_or("HIMM_API_KEY", base.api_key);
    base.chat_model = env_or("HIMM_CHAT_MODEL", base.chat_model);
    base.embed_model = env_or("HIMM_EMBED_MODEL", base.embed_model);
    return base;
}

WireChatClient::WireChatClient(WireConfig cfg) : cfg_(std::move(cfg)) {}

std::string WireChatClient::raw_complete(const ChatRequest& req) {
    json messages = json::array();
    if (!req.system.empty())
        messages.push_back({{"role", "system"}, {"content", req.system}});
    for (const ChatTurn& t : req.turns)
        messages.push_back({{"role", t.role}, {"content", content_for_turn(t)}});
    json body = {{"model", cfg_.chat_model},
                 {"messages", messages},
                 {"temperature", 0}};
    json reply = post_json(cfg_, "/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw GatewayError("wire client: unexpected chat-completions payload", false);
    }
}

WireEmbedder::WireEmbedder(WireConfig cfg) : cfg_(std::move(cfg)) {}

std::vector<float> WireEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("embed: empty text");
    json body = {{"model", cfg_.embed_model}, {"input", text}};
    json reply = post_json(cfg_, "/embeddings", body);
    std::vector<float> v;
    try {
        for (const auto& x : reply.at("data").at(0).at("embedding")) v.push_back(x.get<float>());
    } catch (const json::exception&) {
        throw GatewayError("wire client: unexpected embeddings payload", false);
    }
    if (v.size() != cfg_.embed_dim)
        throw ConfigError("embedding dimension mismatch: provider returned " +
                          std::to_string(v.size()) + ", configured " +
                          std::to_string(cfg_.embed_dim));
    normalize_in_place(v);
    return v;
}

} // namespace himm
