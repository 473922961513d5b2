#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wayfinder/environment.hpp"
#include "wayfinder/nav_memory.hpp"
#include "wayfinder/page_model.hpp"
#include "wayfinder/reasoner.hpp"
#include "wayfinder/symbolic_counter.hpp"
#include "wayfinder/understanding_score.hpp"

// Explorer-Critic episode loop. Per step: fetch, summarize, score, pick the
// modality, filter, check sufficiency, act. The counter and the URL stack act
// as hard guards around whatever the reasoner proposes.
namespace wayfinder {

struct ModuleToggles {
    bool counter_on = true;  // C
    bool stack_on = true;    // S
    bool vlm_on = true;      // U

    /// "{}", "C", "S", "U", "CS", "CU", "SU" or "CSU".
    std::string label() const;
    static std::optional<ModuleToggles> from_label(std::string_view label);
    /// The eight subsets of {C, S, U} in grid order.
    static std::vector<ModuleToggles> all();

    bool operator==(const ModuleToggles&) const = default;
};

struct AgentConfig {
    std::size_t step_cap = kDefaultStepCap;
    std::size_t links_per_page = 50;
    ModuleToggles toggles;
    ScoreConfig score;
    MarkerKeywords markers;

    nlohmann::json to_json() const;
};

enum class ActionKind { visit, backtrack, answer, give_up };

std::string_view to_string(ActionKind k);

struct Action {
    ActionKind kind = ActionKind::give_up;
    std::string target;  // url for visit, text for answer
    std::string rationale;

    bool operator==(const Action&) const = default;
};

struct FilterVerdict {
    bool is_useful = false;
    std::optional<std::string> extracted_info;
    /// Optional explicit entity list offered to the counter.
    std::vector<std::string> entities;
};

struct SufficiencyVerdict {
    bool is_sufficient = false;
    std::optional<std::string> final_answer;
};

struct CounterSnapshot {
    CounterMode mode = CounterMode::inactive;
    std::optional<std::size_t> target;
    std::size_t count = 0;
    bool terminated = false;
};

struct Step {
    std::size_t index = 0;  // 1-based
    std::string url;
    int status = 0;
    std::optional<std::string> transport_error;
    DomSummary summary;  // extracted_text is not serialized
    MarkerSet markers;
    int relevance_points = 0;
    ScoreBreakdown score;
    std::optional<Viability> viability;  // stack_on only
    bool vlm_used = false;
    std::optional<FilterVerdict> filter;
    std::optional<SufficiencyVerdict> sufficiency;
    std::optional<Action> proposed;  // what the explorer asked for
    std::optional<Action> action;    // what was executed
    std::vector<std::string> guard_events;
    CounterSnapshot counter;
    std::vector<std::string> breadcrumb;
};

enum class Outcome { answered, refused, step_capped };

std::string_view to_string(Outcome o);

struct Episode {
    std::string query;
    std::string root_url;
    AgentConfig config;
    std::vector<Step> steps;
    std::vector<std::string> accumulated_info;
    Outcome outcome = Outcome::refused;
    std::string answer;
    CounterConstraint constraint;
    std::vector<std::string> counted_entities;
    std::vector<std::string> pagination_pages;
    std::vector<std::string> visited;  // fetch order
};

/// Throws EnvUnavailable when the root cannot be fetched and
/// ReasonerProtocol when the reasoner breaks the response format twice.
Episode run_episode(std::string_view query, std::string_view root_url, Environment& env, Reasoner& reasoner,
                    const AgentConfig& cfg, const RelevanceScorer& scorer = {});

FilterVerdict critic_filter(std::string_view query, std::string_view observation, Reasoner& reasoner,
                            std::size_t step = 0);
SufficiencyVerdict critic_sufficiency(std::string_view query, const std::vector<std::string>& accumulated,
                                      Reasoner& reasoner, std::size_t step = 0);

struct PresentedLink {
    std::string url;
    std::string text;
    bool visited = false;
};

struct ExplorerContext {
    std::vector<std::string> breadcrumb;
    std::vector<PresentedLink> links;
    std::string counter_status;
    bool can_backtrack = false;
    bool show_visited = true;
    std::size_t step = 0;
};

/// Parses the Thought / Action / Action Input block. Guards are applied by
/// the episode loop, not here.
Action select_action(std::string_view query, const ExplorerContext& ctx, Reasoner& reasoner);
std::optional<Action> parse_action(std::string_view text);

// ---- traces -----------------------------------------------------------------

/// Header, one record per step, footer; one JSON object per line.
std::string episode_to_jsonl(const Episode& episode);

struct ReplayResult {
    std::size_t steps = 0;
    std::size_t mismatches = 0;
};

/// Recomputes every step's score from the recorded statistics and compares.
ReplayResult replay_trace(const std::string& jsonl, const ScoreConfig& cfg);

}  // namespace wayfinder
