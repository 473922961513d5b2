#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "wayfinder/page_model.hpp"

// Understanding score: four heuristic dimensions summed into a composite in
// [0, 100], and the text/vision routing decision derived from it.
namespace wayfinder {

enum class Modality { LLM, VLM };

std::string_view to_string(Modality m);

struct ScoreConfig {
    /// Pages scoring strictly above tau are handled as text; the rest go to vision.
    double tau = 50.0;

    double qual_max = 30.0;
    double rel_max = 40.0;
    double struct_max = 15.0;
    double spec_base = 15.0;

    // Length term: trapezoid 0 at low_cutoff, peak from 2*low_cutoff through
    // high_cutoff, back to 0 at 2*high_cutoff.
    double low_cutoff = 200.0;
    double high_cutoff = 20000.0;
    double f_len_peak = 15.0;

    double fmt_per_tag = 2.5;
    double fmt_cap = 5.0;

    // Navigation term: 0 at n_btn = 0, peak over [nav_lo, nav_hi], 0 at 3*nav_hi.
    double nav_lo = 5.0;
    double nav_hi = 30.0;
    double f_nav_peak = 7.0;

    /// Contribution applied when n_btn > nav_hi (dense navigation). 0 by default.
    double dense_points = 0.0;

    double p_gallery = 8.0;
    double p_captcha = 15.0;
    double p_error = 15.0;

    /// Throws ConfigError when a value is out of range.
    void validate() const;
};

struct ScoreBreakdown {
    double s_qual = 0;
    double s_rel = 0;
    double s_struct = 0;
    double s_spec = 0;
    double phi = 0;
    Modality modality = Modality::VLM;
};

struct RelevanceVerdict {
    int points = 0;  // one of 0, 10, 20, 30, 40
    std::string reason;
};

/// Relevance contract. `endpoint` (optional) is asked first; when it is
/// absent, throws, or answers off-rubric, the keyword-overlap fallback is
/// used if enabled, otherwise ScorerUnavailable is raised.
struct RelevanceScorer {
    std::function<RelevanceVerdict(std::string_view query, std::string_view observation)> endpoint;
    bool fallback_enabled = true;
};

bool is_rubric_value(int points);

double length_term(double total_chars, const ScoreConfig& cfg);
double nav_term(double n_btn, const ScoreConfig& cfg);

double score_quality(const DomSummary& summary, const ScoreConfig& cfg);
RelevanceVerdict keyword_relevance(std::string_view query, std::string_view observation);
int score_relevance(std::string_view query, const DomSummary& summary, const RelevanceScorer& scorer);
double score_structure(const DomSummary& summary, const ScoreConfig& cfg);
double score_special(const MarkerSet& markers, const ScoreConfig& cfg);

/// LLM iff phi > tau.
Modality choose_modality(double phi, double tau);

ScoreBreakdown compute_understanding(std::string_view query, const DomSummary& summary,
                                     const MarkerSet& markers, const RelevanceScorer& scorer,
                                     const ScoreConfig& cfg);

/// Same as compute_understanding with the relevance points already known
/// (used when replaying traces).
ScoreBreakdown combine_scores(const DomSummary& summary, int relevance_points,
                              const MarkerSet& markers, const ScoreConfig& cfg);

}  // namespace wayfinder
