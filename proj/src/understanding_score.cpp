#include "wayfinder/understanding_score.hpp"

#include <algorithm>
#include <set>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"

namespace wayfinder {

std::string_view to_string(Modality m) { return m == Modality::LLM ? "LLM" : "VLM"; }

void ScoreConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("score: ") + what);
    };
    require(tau >= 0.0 && tau <= 100.0, "tau must lie in [0, 100]");
    require(rel_max == 40.0, "rel_max is fixed at 40");
    require(spec_base == 15.0, "spec_base is fixed at 15");
    require(qual_max > 0 && struct_max > 0, "budgets must be positive");
    require(low_cutoff > 0, "low_cutoff must be positive");
    require(high_cutoff >= 2 * low_cutoff, "high_cutoff must be at least 2*low_cutoff");
    require(f_len_peak >= 0 && f_nav_peak >= 0, "peaks must be non-negative");
    require(fmt_per_tag >= 0 && fmt_cap >= 0, "format points must be non-negative");
    require(nav_lo > 0 && nav_hi >= nav_lo, "need 0 < nav_lo <= nav_hi");
    require(p_gallery >= 0 && p_captcha >= 0 && p_error >= 0, "penalties must be non-negative");
}

bool is_rubric_value(int points) {
    return points == 0 || points == 10 || points == 20 || points == 30 || points == 40;
}

double length_term(double n, const ScoreConfig& cfg) {
    const double lo = cfg.low_cutoff;
    const double hi = cfg.high_cutoff;
    if (n <= lo || n >= 2 * hi) return 0.0;
    if (n < 2 * lo) return cfg.f_len_peak * (n - lo) / lo;
    if (n <= hi) return cfg.f_len_peak;
    return cfg.f_len_peak * (2 * hi - n) / hi;
}

double nav_term(double n, const ScoreConfig& cfg) {
    const double lo = cfg.nav_lo;
    const double hi = cfg.nav_hi;
    if (n <= 0 || n >= 3 * hi) return 0.0;
    if (n < lo) return cfg.f_nav_peak * n / lo;
    if (n <= hi) return cfg.f_nav_peak;
    return cfg.f_nav_peak * (3 * hi - n) / (2 * hi);
}

double score_quality(const DomSummary& s, const ScoreConfig& cfg) {
    if (s.total_chars == 0) return 0.0;
    const double ratio = static_cast<double>(s.valid_chars) / static_cast<double>(s.total_chars);
    const double fmt = std::min(cfg.fmt_cap, cfg.fmt_per_tag * static_cast<double>(s.structural_tags.size()));
    const double raw = length_term(static_cast<double>(s.total_chars), cfg) + 10.0 * ratio + fmt;
    return std::clamp(raw, 0.0, cfg.qual_max);
}

RelevanceVerdict keyword_relevance(std::string_view query, std::string_view observation) {
    const auto terms = text::content_terms(query);
    if (terms.empty()) return {0, "query has no content terms"};
    const auto tokens = text::tokenize(observation);
    const std::set<std::string> vocab(tokens.begin(), tokens.end());
    std::size_t found = 0;
    for (const auto& t : terms) found += vocab.count(t);
    const std::size_t n = terms.size();
    // Integer thresholds avoid floating ties at 0.2/0.4/0.6/0.8.
    int points = 0;
    if (found * 10 >= n * 8)
        points = 40;
    else if (found * 10 >= n * 6)
        points = 30;
    else if (found * 10 >= n * 4)
        points = 20;
    else if (found * 10 >= n * 2)
        points = 10;
    return {points, std::to_string(found) + "/" + std::to_string(n) + " query terms present"};
}

int score_relevance(std::string_view query, const DomSummary& summary, const RelevanceScorer& scorer) {
    if (scorer.endpoint) {
        try {
            const auto verdict = scorer.endpoint(query, summary.extracted_text);
            if (is_rubric_value(verdict.points)) return verdict.points;
            if (!scorer.fallback_enabled)
                throw ScorerUnavailable("relevance scorer answered off-rubric value " +
                                        std::to_string(verdict.points));
        } catch (const ScorerUnavailable&) {
            throw;
        } catch (const std::exception& e) {
            if (!scorer.fallback_enabled) throw ScorerUnavailable(e.what());
        }
    } else if (!scorer.fallback_enabled) {
        throw ScorerUnavailable("no relevance scorer configured and fallback disabled");
    }
    return keyword_relevance(query, summary.extracted_text).points;
}

double score_structure(const DomSummary& s, const ScoreConfig& cfg) {
    const double n_btn = static_cast<double>(s.n_btn);
    const double indicator = s.n_para >= 3 ? 5.0 : 0.0;
    const double dense = n_btn > cfg.nav_hi ? cfg.dense_points : 0.0;
    return std::clamp(indicator + nav_term(n_btn, cfg) + dense, 0.0, cfg.struct_max);
}

double score_special(const MarkerSet& m, const ScoreConfig& cfg) {
    double penalty = 0.0;
    if (m.has_gallery) penalty += cfg.p_gallery;
    if (m.has_captcha) penalty += cfg.p_captcha;
    if (m.has_error_page) penalty += cfg.p_error;
    return std::max(0.0, cfg.spec_base - penalty);
}

Modality choose_modality(double phi, double tau) { return phi > tau ? Modality::LLM : Modality::VLM; }

ScoreBreakdown combine_scores(const DomSummary& summary, int relevance_points, const MarkerSet& markers,
                              const ScoreConfig& cfg) {
    ScoreBreakdown b;
    b.s_qual = score_quality(summary, cfg);
    b.s_rel = static_cast<double>(relevance_points);
    b.s_struct = score_structure(summary, cfg);
    b.s_spec = score_special(markers, cfg);
    b.phi = b.s_qual + b.s_rel + b.s_struct + b.s_spec;
    b.modality = choose_modality(b.phi, cfg.tau);
    return b;
}

ScoreBreakdown compute_understanding(std::string_view query, const DomSummary& summary,
                                     const MarkerSet& markers, const RelevanceScorer& scorer,
                                     const ScoreConfig& cfg) {
    return combine_scores(summary, score_relevance(query, summary, scorer), markers, cfg);
}

}  // namespace wayfinder
