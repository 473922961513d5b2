#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <random>

#include "support.hpp"
#include "wayfinder/errors.hpp"
#include "wayfinder/eval.hpp"

using namespace wayfinder;
using wftest::rule;

namespace {

// Classical Shapley value by averaging marginal contributions over all 3!
// join orders. Player bits: C=1, S=2, U=4.
std::array<double, 3> brute_force_shapley(const std::array<double, 8>& v) {
    std::array<unsigned, 3> order{1, 2, 4};
    std::array<double, 3> phi{};
    int n = 0;
    do {
        unsigned coalition = 0;
        for (unsigned p : order) {
            const double gain = v[coalition | p] - v[coalition];
            phi[p == 1 ? 0 : p == 2 ? 1 : 2] += gain;
            coalition |= p;
        }
        ++n;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& x : phi) x = x / n * 1e3;
    return phi;
}

std::array<double, 8> random_grid(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<double, 8> v{};
    for (auto& x : v) x = u(rng);
    return v;
}

// Relabel players: new bit i takes the role of old bit perm[i].
std::array<double, 8> permute_players(const std::array<double, 8>& v, const std::array<int, 3>& perm) {
    std::array<double, 8> out{};
    for (unsigned mask = 0; mask < 8; ++mask) {
        unsigned old = 0;
        for (int i = 0; i < 3; ++i)
            if (mask & (1u << i)) old |= 1u << perm[i];
        out[mask] = v[old];
    }
    return out;
}

std::array<double, 3> as_array(const ShapleyResult& r) { return {r.phi_C, r.phi_S, r.phi_U}; }

QAItem fiba_item() {
    QAItem q;
    q.id = "fiba";
    q.question = "Which team finished second in the FIBA Asia Cup 2022?";
    q.answer = "Lebanon";
    q.source_urls = {"https://x.test/a"};
    q.source_depths = {2};
    return q;
}

const char* kFibaContext = "Final standings: 1. Australia (AUS) 2. Lebanon 3. China (CHN) 4. Iran (IRI)";

}  // namespace

TEST(Refusal, Phrases) {
    EXPECT_TRUE(detect_refusal(""));
    EXPECT_TRUE(detect_refusal("   \n"));
    EXPECT_TRUE(detect_refusal("I cannot find the information"));
    EXPECT_TRUE(detect_refusal("Sorry, NO INFORMATION on that."));
    EXPECT_TRUE(detect_refusal("无法找到相关内容"));
    EXPECT_FALSE(detect_refusal("Australia"));
    RefusalPhrases custom{{"pass"}};
    EXPECT_TRUE(detect_refusal("I pass", custom));
    EXPECT_FALSE(detect_refusal("I cannot find it", custom));
}

TEST(Judge, FallbackAndBackend) {
    EXPECT_TRUE(fallback_judge("China", "The second place was China.").correct);
    EXPECT_FALSE(fallback_judge("21 Jul 2023", "Jul 2023").correct);
    EXPECT_TRUE(fallback_judge("21  JUL 2023", "made on 21 jul 2023").correct);
    EXPECT_TRUE(judge("q", "China", "china", nullptr).correct);

    ScriptedReasoner one({rule(Role::judge, "REASONING: matches.\nSCORE: 1")});
    const auto v = judge("q", "x", "y", &one);
    EXPECT_TRUE(v.correct);
    EXPECT_EQ(v.reasoning, "matches.");
    ScriptedReasoner zero({rule(Role::judge, "SCORE: 0")});
    EXPECT_FALSE(judge("q", "x", "x", &zero).correct);

    auto retry_ok = rule(Role::judge, "SCORE: 1");
    retry_ok.attempt = 1;
    ScriptedReasoner retry({retry_ok, rule(Role::judge, "I think it is right")});
    EXPECT_TRUE(judge("q", "x", "y", &retry).correct);
    ScriptedReasoner never({rule(Role::judge, "I think it is right")});
    EXPECT_THROW(judge("q", "x", "y", &never), BackendError);
}

TEST(Taxonomy, WorkedCases) {
    const auto item = fiba_item();
    ScriptedReasoner classifier({rule(Role::classifier, "hallucination", std::nullopt, {{"prediction", {"Japan"}}}),
                                 rule(Role::classifier, "totally_incorrect", std::nullopt, {{"prediction", {"Australia"}}}),
                                 rule(Role::classifier, "imprecise", std::nullopt, {{"prediction", {"Jul 2023"}}})});
    for (const auto& [pred, expect] : std::vector<std::pair<std::string, ErrorCategory>>{
             {"Japan", ErrorCategory::hallucination}, {"Australia", ErrorCategory::totally_incorrect}}) {
        EXPECT_FALSE(detect_refusal(pred));
        const auto r = evaluate_one(item, {item.id, pred, kFibaContext}, nullptr, &classifier);
        EXPECT_FALSE(r.correct);
        EXPECT_EQ(r.category, expect) << pred;
    }
    QAItem psle = item;
    psle.id = "psle";
    psle.question = "When were the PSLE results released?";
    psle.answer = "21 Jul 2023";
    const auto r = evaluate_one(psle, {psle.id, "Jul 2023", "Results were released on 21 Jul 2023."}, nullptr,
                                &classifier);
    EXPECT_EQ(r.category, ErrorCategory::imprecise);
}

TEST(Taxonomy, OrderingCorrectThenRefusalThenClassifier) {
    const auto item = fiba_item();
    ScriptedReasoner classifier({rule(Role::classifier, "hallucination")});
    // Correct answers never reach the refusal check or classifier, even if
    // they contain a refusal phrase.
    auto r = evaluate_one(item, {item.id, "Lebanon; no information on the others", ""}, nullptr, &classifier);
    EXPECT_EQ(r.category, ErrorCategory::correct);
    r = evaluate_one(item, {item.id, "I cannot find it", ""}, nullptr, &classifier);
    EXPECT_EQ(r.category, ErrorCategory::refusal);
    EXPECT_EQ(classifier.calls(), 0u);
}

TEST(Taxonomy, ClassifierOutputMapping) {
    ScriptedReasoner noisy({rule(Role::classifier, "Category:\nMissing Key Info")});
    EXPECT_EQ(classify_error("q", "a and b", "a", "", noisy), ErrorCategory::missing_key_info);
    ScriptedReasoner bad({rule(Role::classifier, "correct")});
    EXPECT_THROW(classify_error("q", "g", "p", "", bad), BackendError);
    for (auto c : {ErrorCategory::correct, ErrorCategory::refusal, ErrorCategory::hallucination,
                   ErrorCategory::totally_incorrect, ErrorCategory::missing_key_info, ErrorCategory::imprecise})
        EXPECT_EQ(*parse_category(to_string(c)), c);
}

TEST(Shapley, AverageColumnExample) {
    const std::array<double, 8> acc{0.50, 0.51, 0.59, 0.59, 0.62, 0.62, 0.64, 0.65};  // indexed by mask
    const auto r = shapley3(acc);
    // Hand evaluation: C gains .01 alone and .01 with S+U, 0 with one partner.
    EXPECT_NEAR(r.phi_C, (0.01 + 0.0 + 0.01) / 3 * 1e3, 1e-9);
    EXPECT_NEAR(r.phi_C, 6.67, 0.01);
    EXPECT_NEAR(r.phi_S, 56.67, 0.01);
    EXPECT_NEAR(r.phi_U, 86.67, 0.01);
    EXPECT_NEAR(r.sum(), 150.0, 1e-9);

    const auto grid = read_grid_csv(wftest::data_path("grids/ablation_table.csv"));
    const auto g = shapley3(grid, "avg");
    EXPECT_NEAR(g.phi_S, r.phi_S, 1e-9);
    EXPECT_EQ(grid.columns.size(), 13u);
}

TEST(Shapley, ConstantAndDummyGames) {
    const auto zero = shapley3(std::array<double, 8>{0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
    EXPECT_NEAR(zero.phi_C, 0, 1e-12);
    EXPECT_NEAR(zero.phi_S, 0, 1e-12);
    EXPECT_NEAR(zero.phi_U, 0, 1e-12);
    std::array<double, 8> only_u{};
    for (unsigned m = 0; m < 8; ++m) only_u[m] = 0.3 + ((m & kModU) ? 0.05 : 0.0);
    const auto r = shapley3(only_u);
    EXPECT_NEAR(r.phi_U, 50.0, 1e-9);
    EXPECT_NEAR(r.phi_C, 0, 1e-9);
    EXPECT_NEAR(r.phi_S, 0, 1e-9);
}

TEST(Shapley, PropertiesOnRandomGrids) {
    std::mt19937_64 rng(2024);
    const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (int trial = 0; trial < 1000; ++trial) {
        auto v = random_grid(rng);
        const auto r = as_array(shapley3(v));
        EXPECT_NEAR(r[0] + r[1] + r[2], (v[7] - v[0]) * 1e3, 1e-9);
        const auto brute = brute_force_shapley(v);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(r[i], brute[i], 1e-9);
        for (const auto& p : perms) {
            const auto pr = as_array(shapley3(permute_players(v, p)));
            for (int i = 0; i < 3; ++i) EXPECT_NEAR(pr[i], r[p[i]], 1e-9);
        }
        // Make player `d` a dummy: adding it never changes the value.
        const unsigned d = 1u << (trial % 3);
        for (unsigned m = 0; m < 8; ++m)
            if (m & d) v[m] = v[m & ~d];
        EXPECT_NEAR(as_array(shapley3(v))[trial % 3], 0.0, 1e-9);
    }
}

TEST(Grid, CsvParsingAndMissingSubset) {
    const std::string csv = "modules,a\n{},0.1\nC,0.2\nS,0.3\nCS,0.4\nU,0.5\nCU,0.6\nSU,0.7\nCSU,0.8\n";
    const auto g = parse_grid_csv(csv);
    EXPECT_EQ(parse_grid_csv(grid_to_csv(g)).values, g.values);
    EXPECT_NE(shapley_csv(g).find("a,"), std::string::npos);

    EXPECT_THROW(parse_grid_csv("modules,a\n{},0.1\nC,0.2\n").column("a"), MissingSubset);
    EXPECT_THROW(g.column("b"), MissingSubset);
    EXPECT_THROW(parse_grid_csv("mods,a\n{},0.1\n"), ParseError);
    EXPECT_THROW(parse_grid_csv("modules,a\nXY,0.1\n"), ParseError);
    EXPECT_THROW(parse_grid_csv("modules,a\n{},1.5\n"), ParseError);
    EXPECT_THROW(parse_grid_csv("modules,a\n{},abc\n"), ParseError);
    EXPECT_THROW(parse_grid_csv("modules,a\n{},0.1\n{},0.2\n"), ParseError);
    for (unsigned m = 0; m < 8; ++m) EXPECT_EQ(*parse_subset_label(subset_label(m)), m);
    EXPECT_EQ(*parse_subset_label("UC"), kModC | kModU);
}

TEST(Report, AggregateAndImprovement) {
    EXPECT_EQ(aggregate({}, {}).overall.total, 0u);
    QAItem a = fiba_item();
    a.domain = Domain::game;
    QAItem b = fiba_item();
    b.id = "b";
    b.domain = Domain::education;
    b.language = Language::zh;
    b.kind = TaskKind::multi_source;
    b.difficulty = Difficulty::hard;
    std::vector<EvalRecord> recs{{"fiba", "x", true, ErrorCategory::correct, ""},
                                 {"b", "y", false, ErrorCategory::refusal, ""},
                                 {"b", "z", false, ErrorCategory::imprecise, ""}};
    const auto rep = aggregate(recs, {a, b});
    EXPECT_EQ(rep.by_domain.size(), 2u);
    EXPECT_EQ(rep.overall.total, 3u);
    EXPECT_EQ(rep.overall.correct, 1u);
    EXPECT_EQ(rep.by_kind_difficulty.at("multi_source/hard").categories.at(ErrorCategory::imprecise), 1u);
    EXPECT_EQ(rep.by_language.at("zh").total, 2u);
    const auto table = report_table_csv(rep.by_domain, "domain");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
    const auto summary = nlohmann::json::parse(report_summary_json(rep, 0.25));
    EXPECT_NEAR(summary["relative_improvement"].get<double>(), (1.0 / 3 - 0.25) / 0.25, 1e-12);

    recs.push_back({"ghost", "", false, ErrorCategory::refusal, ""});
    EXPECT_THROW(aggregate(recs, {a, b}), JoinError);
    EXPECT_NEAR(relative_improvement(0.49, 0.65), 0.3265, 1e-4);
    EXPECT_THROW(relative_improvement(0.0, 0.5), PreconditionError);
}

TEST(Predictions, JsonlRoundTrip) {
    const std::vector<Prediction> preds{{"a", "x", "ctx"}, {"b", "", ""}};
    const auto dir = wftest::scratch_dir("preds");
    wftest::spit(dir / "p.jsonl", predictions_to_jsonl(preds));
    const auto back = read_predictions_jsonl((dir / "p.jsonl").string());
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].context, "ctx");
    EXPECT_EQ(back[1].prediction, "");
    wftest::spit(dir / "bad.jsonl", "{nope\n");
    EXPECT_THROW(read_predictions_jsonl((dir / "bad.jsonl").string()), ParseError);
}
