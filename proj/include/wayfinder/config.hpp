#pragma once

#include <map>
#include <optional>
#include <string>

#include "wayfinder/benchgen.hpp"
#include "wayfinder/environment.hpp"
#include "wayfinder/eval.hpp"
#include "wayfinder/orchestrator.hpp"
#include "wayfinder/reasoner.hpp"

// One INI file configures every workflow. Unknown sections or keys and
// out-of-range values are rejected at load time.
namespace wayfinder {

struct BackendsConfig {
    /// Default backend for every role.
    std::string reasoner = "heuristic://";
    /// Per-role overrides keyed by role name.
    std::map<std::string, std::string> per_role;
    std::string model = "default";
    std::string api_key_env;
    double timeout_s = 60.0;
    std::string prompts_dir;  // extra/override templates; empty = built-in only
};

struct GlobalConfig {
    AgentConfig agent;  // includes [score] and [markers]
    FetchPolicy fetch;
    BenchConfig bench;
    BackendsConfig backends;
    RefusalPhrases refusal;
};

GlobalConfig parse_config(const std::string& ini_text, const std::string& base_dir = "");
GlobalConfig load_config(const std::string& path);
/// --config wins, then $WAYFINDER_CONFIG, then built-in defaults.
GlobalConfig resolve_config(const std::optional<std::string>& cli_path);

std::shared_ptr<const PromptLibrary> make_prompt_library(const BackendsConfig& cfg);

/// Routing reasoner for all roles; `override_spec` replaces the default
/// backend when non-empty. `qa_id` fills "{qa_id}" in script paths.
std::shared_ptr<Reasoner> make_role_reasoner(const BackendsConfig& cfg, const std::string& override_spec = "",
                                             const std::string& qa_id = "");

/// Endpoint-backed relevance scorer when [backends] names a relevance
/// backend, otherwise the keyword fallback alone.
RelevanceScorer make_relevance_scorer(const BackendsConfig& cfg);

}  // namespace wayfinder
