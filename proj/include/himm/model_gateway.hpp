#pragma once

// Uniform access to chat-with-images and text-embedding providers. Every
// model decision in the loop goes through complete() with a named reply
// schema; backends are an OpenAI-compatible wire client and a fully
// deterministic scripted mock.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "himm/errors.hpp"

namespace himm {

enum class ReplySchema { YesNo, IndexChoice, GoalDecomposition, Workflow, Rules, FreeText };

const char* schema_name(ReplySchema s);

struct ChatTurn {
    std::string role = "user";
    std::string text;
    std::vector<std::string> image_refs;
};

struct ChatRequest {
    std::string system;
    std::vector<ChatTurn> turns;
    ReplySchema schema = ReplySchema::FreeText;
    int max_retries = 2;
    std::vector<std::string> tags; // routing hints, matched by scripted behaviors
    int option_count = 0;          // IndexChoice: number of valid options (0 = unbounded)
};

struct GoalParts {
    std::string target;
    std::vector<std::string> relative_objects;
    std::vector<std::string> relative_areas;
};

struct WorkflowSymbol {
    std::string name;
    std::string description;
};

struct WorkflowParts {
    std::vector<WorkflowSymbol> variables;
    std::vector<WorkflowSymbol> functions;
    std::vector<std::string> body;
};

enum class RuleForm { IfThen, SituationSuggestion, ProblemSolution };

const char* rule_form_name(RuleForm f);
std::optional<RuleForm> parse_rule_form(const std::string& s);

struct RuleDraft {
    RuleForm form = RuleForm::IfThen;
    std::string key;
    std::string value;
    std::string anchor;
};

// One reply, already validated against the request's schema. Only the
// member matching `schema` is meaningful.
struct ParsedReply {
    ReplySchema schema = ReplySchema::FreeText;
    std::string raw;
    bool yes = false;
    int index = -1;
    GoalParts goal;
    WorkflowParts workflow;
    std::vector<RuleDraft> rules;
    std::string text;
};

// Attempts to parse `raw` under `schema`; nullopt on shape violations.
std::optional<ParsedReply> try_parse_reply(const ChatRequest& req, const std::string& raw);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Raw model text for one request. Throws GatewayError on transport failure.
    virtual std::string raw_complete(const ChatRequest& req) = 0;
};

// Runs the request, parsing the reply under its schema. Malformed replies
// are retried with a fixed corrective suffix up to req.max_retries extra
// attempts; exhaustion throws SchemaError carrying the last raw text.
ParsedReply complete(ChatClient& client, const ChatRequest& req);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual size_t dim() const = 0;
    // Unit-norm vector for the text. Throws ValidationError on empty input,
    // GatewayError on transport failure, ConfigError on dimension mismatch.
    virtual std::vector<float> embed(const std::string& text) = 0;
};

// Deterministic seeded hash-to-vector construction; the mock embedding
// substrate. Same (seed, text, dim) always yields the same unit vector.
std::vector<float> hash_to_unit_vector(uint64_t seed, const std::string& text, size_t dim);

void normalize_in_place(std::vector<float>& v);
double cosine(const std::vector<float>& a, const std::vector<float>& b);

class MockEmbedder : public Embedder {
public:
    explicit MockEmbedder(size_t dim = 384, uint64_t seed = 0) : dim_(dim), seed_(seed) {}
    size_t dim() const override { return dim_; }
    std::vector<float> embed(const std::string& text) override;

private:
    size_t dim_;
    uint64_t seed_;
};

// One entry of a scripted behavior: both predicates must hold when set.
struct ScriptRule {
    std::string tag;      // empty = matches any request
    std::string contains; // substring over system + turn text + image refs
    std::string reply;
    int remaining = -1; // -1 = unlimited uses
};

// Deterministic canned-reply client. First matching rule wins; the
// default reply covers everything else. Matching is serialized so replay
// order is stable under concurrent callers.
class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(std::string default_reply = "yes");
    // Moving takes the script and call count; the mutex starts fresh.
    ScriptedChatClient(ScriptedChatClient&& other) noexcept;
    void add_rule(ScriptRule rule);
    std::string raw_complete(const ChatRequest& req) override;
    int calls() const;

    // Structured script file, see docs/formats.md.
    static ScriptedChatClient from_file(const std::string& path);

private:
    mutable std::mutex mu_;
    std::vector<ScriptRule> rules_;
    std::string default_reply_;
    int calls_ = 0;
};

// A client that always throws, for exercising fail-open paths.
class FailingChatClient : public ChatClient {
public:
    std::string raw_complete(const ChatRequest&) override {
        throw GatewayError("scripted transport failure", true);
    }
};

} // namespace himm
