#pragma once

// OpenAI-compatible chat-completions and embeddings over HTTP(S).
// Endpoint, models and credentials come from the environment
// (HIMM_API_BASE, HIMM_API_KEY, HIMM_CHAT_MODEL, HIMM_EMBED_MODEL) or a
// config file; nothing here is exercised by the test suite's mocks.

#include <string>

#include "himm/model_gateway.hpp"

namespace himm {

struct WireConfig {
    std::string api_base; // e.g. https://api.openai.com/v1
    std::string api_key;
    std::string chat_model = "gpt-4o";
    std::string embed_model = "text-embedding-3-small";
    size_t embed_dim = 384;
    int timeout_sec = 120;
};

// Reads HIMM_* variables on top of `base` values.
WireConfig wire_config_from_env(WireConfig base = {});

class WireChatClient : public ChatClient {
public:
    explicit WireChatClient(WireConfig cfg);
    std::string raw_complete(const ChatRequest& req) override;

private:
    WireConfig cfg_;
};

class WireEmbedder : public Embedder {
public:
    explicit WireEmbedder(WireConfig cfg);
    size_t dim() const override { return cfg_.embed_dim; }
    std::vector<float> embed(const std::string& text) override;

private:
    WireConfig cfg_;
};

} // namespace himm
