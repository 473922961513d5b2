#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

// Reasoner contract: every model call made by the agent, the benchmark
// generator and the evaluator goes through `Reasoner::complete`. Backends
// are chosen by URL scheme (script://, heuristic://, http(s)://).
namespace wayfinder {

enum class Role {
    explorer,
    critic_filter,
    critic_sufficiency,
    vlm_perceive,
    relevance,
    judge,
    classifier,
    generator,
    teacher,
};

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct ReasonerRequest {
    Role role = Role::explorer;
    std::string template_id;
    std::map<std::string, std::string> variables;
    std::optional<std::string> image_payload;
    std::size_t step = 0;  // 1-based episode step, 0 outside episodes
    int attempt = 0;       // 0 on first try, 1 on the protocol retry
};

struct ReasonerResponse {
    std::string text;
    std::optional<nlohmann::json> parsed;
};

class Reasoner {
public:
    virtual ~Reasoner() = default;
    /// Must be safe to call concurrently. Throws BackendError on transport failure.
    virtual ReasonerResponse complete(const ReasonerRequest& request) = 0;
};

/// First balanced {...} object in `text` that parses as JSON. Tolerates code
/// fences and surrounding prose.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

// Prompt templates keyed by id. Placeholders are written {name}.
class PromptLibrary {
public:
    /// Built-in templates.
    static PromptLibrary defaults();
    /// Overrides/extends with every `<id>.txt` file in `dir`.
    void load_dir(const std::string& dir);
    void set(std::string id, std::string text) { templates_[std::move(id)] = std::move(text); }
    bool has(std::string_view id) const { return templates_.count(std::string(id)) > 0; }
    const std::string& get(std::string_view id) const;
    std::string render(std::string_view id, const std::map<std::string, std::string>& vars) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::string> templates_;
};

std::string default_template_id(Role r);

// Deterministic rule-of-thumb behaviour for every role. Useful as an offline
// baseline and as the fallthrough of scripted backends.
class HeuristicReasoner : public Reasoner {
public:
    ReasonerResponse complete(const ReasonerRequest& request) override;
};

// Canned responses from a JSON file:
//   {"fallback": "heuristic",
//    "responses": [{"role": "explorer", "step": 2, "text": "..."},
//                  {"role": "critic_filter", "when": {"observation": ["deadline"]}, "json": {...}},
//                  {"role": "critic_sufficiency", "json": {...}}]}
// A rule matches on role; "step" pins it to one step, "when" requires every
// listed substring to appear in the named variable. Precedence: step rules,
// then "when" rules, then plain role defaults, each in file order. Without a
// match the fallback (if any) answers, otherwise BackendError.
class ScriptedReasoner : public Reasoner {
public:
    struct Rule {
        Role role = Role::explorer;
        std::optional<std::size_t> step;
        std::optional<int> attempt;
        std::map<std::string, std::vector<std::string>> when;
        std::string text;
    };

    explicit ScriptedReasoner(std::vector<Rule> rules, std::shared_ptr<Reasoner> fallback = nullptr);
    static std::shared_ptr<ScriptedReasoner> from_file(const std::string& path);
    static std::shared_ptr<ScriptedReasoner> from_json(const nlohmann::json& doc, const std::string& source);

    ReasonerResponse complete(const ReasonerRequest& request) override;

    /// Number of requests answered so far (all roles).
    std::size_t calls() const;

private:
    std::vector<Rule> rules_;
    std::shared_ptr<Reasoner> fallback_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

struct HttpBackendConfig {
    std::string endpoint;  // full URL of an OpenAI-compatible chat completions route
    std::string model = "default";
    std::string api_key_env;  // name of the env var holding the key; empty = none
    double timeout_s = 60.0;
};

class HttpReasoner : public Reasoner {
public:
    HttpReasoner(HttpBackendConfig cfg, std::shared_ptr<const PromptLibrary> prompts);
    ReasonerResponse complete(const ReasonerRequest& request) override;

private:
    HttpBackendConfig cfg_;
    std::shared_ptr<const PromptLibrary> prompts_;
};

// Dispatches each role to its own backend, with a default for unmapped roles.
class RoutingReasoner : public Reasoner {
public:
    explicit RoutingReasoner(std::shared_ptr<Reasoner> fallback) : fallback_(std::move(fallback)) {}
    void route(Role role, std::shared_ptr<Reasoner> backend) { routes_[role] = std::move(backend); }
    ReasonerResponse complete(const ReasonerRequest& request) override;

private:
    std::map<Role, std::shared_ptr<Reasoner>> routes_;
    std::shared_ptr<Reasoner> fallback_;
};

struct BackendContext {
    std::shared_ptr<const PromptLibrary> prompts;
    std::string model = "default";
    std::string api_key_env;
    double timeout_s = 60.0;
    /// Substituted for "{qa_id}" in script:// paths.
    std::string qa_id;
};

/// Builds a backend from "script://PATH", "heuristic://" or "http(s)://...".
std::shared_ptr<Reasoner> make_reasoner(std::string_view spec, const BackendContext& ctx);

}  // namespace wayfinder
