#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wayfinder/benchgen.hpp"
#include "wayfinder/reasoner.hpp"

// Judging, failure taxonomy, Shapley attribution over the module ablation
// grid, and report aggregation.
namespace wayfinder {

enum class ErrorCategory { correct, refusal, hallucination, totally_incorrect, missing_key_info, imprecise };

std::string_view to_string(ErrorCategory c);
std::optional<ErrorCategory> parse_category(std::string_view s);

struct EvalRecord {
    std::string qa_id;
    std::string prediction;
    bool correct = false;
    ErrorCategory category = ErrorCategory::refusal;
    std::string judge_reasoning;
};

struct RefusalPhrases {
    std::vector<std::string> phrases{"cannot find",    "can't find",     "unable to answer", "unable to find",
                                     "no information", "not available",  "i don't know",     "无法找到",
                                     "找不到",         "无法回答",       "没有相关信息",     "未找到"};
};

bool detect_refusal(std::string_view prediction, const RefusalPhrases& phrases = {});

struct JudgeVerdict {
    bool correct = false;
    std::string reasoning;
};

/// Case-folded, whitespace-collapsed substring test.
JudgeVerdict fallback_judge(std::string_view gold, std::string_view prediction);
/// Backend path parses "REASONING: ... SCORE: 0|1"; without a backend the
/// fallback is used. BackendError after one retry.
JudgeVerdict judge(std::string_view question, std::string_view gold, std::string_view prediction,
                   Reasoner* backend);

/// Only for predictions already judged incorrect and not refusals.
ErrorCategory classify_error(std::string_view question, std::string_view gold, std::string_view prediction,
                             std::string_view context, Reasoner& backend);

struct Prediction {
    std::string qa_id;
    std::string prediction;
    std::string context;
};

/// Judge first; only incorrect answers are checked for refusal, and only
/// non-refusals are classified.
EvalRecord evaluate_one(const QAItem& item, const Prediction& p, Reasoner* judge_backend,
                        Reasoner* classifier_backend, const RefusalPhrases& phrases = {});

std::vector<Prediction> read_predictions_jsonl(const std::string& path);
std::string predictions_to_jsonl(const std::vector<Prediction>& preds);

// ---- Shapley ----------------------------------------------------------------

/// Coalition bitmask: bit 0 = C, bit 1 = S, bit 2 = U.
inline constexpr unsigned kModC = 1u;
inline constexpr unsigned kModS = 2u;
inline constexpr unsigned kModU = 4u;

std::string subset_label(unsigned mask);
std::optional<unsigned> parse_subset_label(std::string_view label);

struct AblationGrid {
    std::vector<std::string> columns;
    /// values[mask][column]
    std::map<unsigned, std::map<std::string, double>> values;

    /// Throws MissingSubset when any of the 8 coalitions lacks the column.
    std::array<double, 8> column(const std::string& name) const;
};

struct ShapleyResult {
    double phi_C = 0;
    double phi_S = 0;
    double phi_U = 0;

    double sum() const { return phi_C + phi_S + phi_U; }
};

/// Three-player Shapley values scaled by 1e3; acc indexed by coalition mask.
ShapleyResult shapley3(const std::array<double, 8>& acc);
ShapleyResult shapley3(const AblationGrid& grid, const std::string& column);

/// CSV with a "modules" column ({} C S U CS CU SU CSU) and one column per task.
AblationGrid read_grid_csv(const std::string& path);
AblationGrid parse_grid_csv(const std::string& content);
std::string grid_to_csv(const AblationGrid& grid);
std::string shapley_csv(const AblationGrid& grid);

// ---- reports ----------------------------------------------------------------

struct GroupStats {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::map<ErrorCategory, std::size_t> categories;

    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct Report {
    std::map<std::string, GroupStats> by_kind_difficulty;  // "single_source/easy"
    std::map<std::string, GroupStats> by_domain;
    std::map<std::string, GroupStats> by_language;
    GroupStats overall;
};

/// Throws JoinError for a record whose qa_id is not in the benchmark.
Report aggregate(const std::vector<EvalRecord>& records, const std::vector<QAItem>& benchmark);

std::string report_table_csv(const std::map<std::string, GroupStats>& groups, const std::string& key_name);
std::string report_summary_json(const Report& report, std::optional<double> baseline_accuracy = std::nullopt);

/// (new - old) / old.
double relative_improvement(double old_acc, double new_acc);

}  // namespace wayfinder
