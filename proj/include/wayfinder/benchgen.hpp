#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wayfinder/environment.hpp"
#include "wayfinder/reasoner.hpp"

// Benchmark construction: crawl a site into a depth-limited URL tree, sample
// target pages by difficulty, have a generator write a QA pair and a teacher
// vet it, then fill the kind x difficulty quota grid.
namespace wayfinder {

enum class TaskKind { single_source, multi_source };
enum class Difficulty { easy, medium, hard };
enum class Domain { education, conference, organization, game };
enum class Language { en, zh };

std::string_view to_string(TaskKind k);
std::string_view to_string(Difficulty d);
std::string_view to_string(Domain d);
std::string_view to_string(Language l);
TaskKind parse_task_kind(std::string_view s);
Difficulty parse_difficulty(std::string_view s);
Domain parse_domain(std::string_view s);
Language parse_language(std::string_view s);

struct TreeNode {
    std::string url;
    int depth = 1;
    std::optional<std::string> parent;
    std::vector<std::string> children;
    int status = 200;
    std::string title;
    std::string content;  // extracted visible text
};

struct UrlTree {
    std::string root;
    std::map<std::string, TreeNode> nodes;  // canonical url -> node
    std::vector<std::string> order;         // breadth-first discovery order

    const TreeNode& at(const std::string& url) const { return nodes.at(url); }
};

inline constexpr int kMaxTreeDepth = 4;
inline constexpr std::size_t kDefaultBreadthCap = 30;

/// Breadth-first expansion over same-host links. Each url keeps its
/// shallowest depth and first discoverer as parent; at most `breadth_cap`
/// children per node. Throws EnvUnavailable when the root fails.
UrlTree build_url_tree(Environment& env, std::string_view root, int max_depth = kMaxTreeDepth,
                       std::size_t breadth_cap = kDefaultBreadthCap);

/// single: depth 2/3/4 -> easy/medium/hard. multi: depth sum in [2,4) easy,
/// [4,6) medium, [6,8] hard. Throws OutOfRangeDepth.
Difficulty classify_difficulty(TaskKind kind, const std::vector<int>& depths);

struct TargetSelection {
    TaskKind kind = TaskKind::single_source;
    Difficulty difficulty = Difficulty::easy;
    std::vector<std::string> urls;
    std::vector<int> depths;

    bool operator==(const TargetSelection&) const = default;
};

/// Uniform in [0, n) from a 64-bit engine, identical on every platform.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

/// All qualifying selections in deterministic order (the sampling support).
std::vector<TargetSelection> enumerate_targets(const UrlTree& tree, TaskKind kind, Difficulty difficulty,
                                               bool allow_root_pairs = false);
/// Throws Unsatisfiable when nothing qualifies.
TargetSelection sample_targets(const UrlTree& tree, TaskKind kind, Difficulty difficulty, std::uint64_t seed,
                               bool allow_root_pairs = false);

struct QAItem {
    std::string id;
    std::string question;
    std::string answer;
    TaskKind kind = TaskKind::single_source;
    Difficulty difficulty = Difficulty::easy;
    Domain domain = Domain::organization;
    Language language = Language::en;
    std::vector<std::string> source_urls;
    std::vector<int> source_depths;
    std::string root_url;
    std::string teacher_reason;

    bool operator==(const QAItem&) const = default;
};

nlohmann::json to_json(const QAItem& item);
QAItem qa_item_from_json(const nlohmann::json& j);
/// Throws InvariantViolation naming the item id.
void validate_item(const QAItem& item);

struct VetResult {
    std::optional<QAItem> item;
    std::string reason;  // teacher's reason, also set on rejection
};

/// Throws BackendError when the generator or teacher breaks format twice.
VetResult synthesize_and_vet(const UrlTree& tree, const TargetSelection& selection, Reasoner& generator,
                             Reasoner& teacher, Domain domain, Language language, const std::string& id);

using CellKey = std::pair<TaskKind, Difficulty>;

struct Quotas {
    std::map<CellKey, std::size_t> per_cell;

    /// 80 / 140 / 120 per kind (680 in total).
    static Quotas defaults();
    static Quotas uniform(std::size_t easy, std::size_t medium, std::size_t hard);
    std::size_t total() const;
};

struct Benchmark {
    std::vector<QAItem> items;
    std::map<CellKey, std::size_t> counts;
    std::map<CellKey, std::size_t> shortfall;
    std::size_t overflow = 0;
};

Benchmark assemble(const Quotas& quotas, const std::vector<QAItem>& candidates);

struct RootSpec {
    std::string url;
    Domain domain = Domain::organization;
    std::optional<Language> language;  // detected from content when absent
};

/// Root list file: one root per line, "URL [domain] [language]"; '#' comments.
std::vector<RootSpec> load_roots(const std::string& path);

struct BenchConfig {
    Quotas quotas = Quotas::defaults();
    std::uint64_t seed = 7;
    int max_depth = kMaxTreeDepth;
    std::size_t breadth_cap = kDefaultBreadthCap;
    std::size_t attempts_per_item = 4;
    bool allow_root_pairs = false;
    std::string date;  // YYYY-MM-DD stamped into the manifest; today when empty
};

struct GenerationResult {
    Benchmark benchmark;
    std::vector<std::string> rejections;  // "selection: reason"
    std::vector<std::string> roots;
};

GenerationResult generate_benchmark(Environment& env, const std::vector<RootSpec>& roots, const BenchConfig& cfg,
                                    Reasoner& generator, Reasoner& teacher);

/// Manifest line then one line per item.
std::string benchmark_to_jsonl(const GenerationResult& result, const BenchConfig& cfg);
std::vector<QAItem> read_benchmark_jsonl(const std::string& path);

std::string today_utc();

}  // namespace wayfinder
