#include "wayfinder/eval.hpp"

#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

std::string normalize(std::string_view s) { return text::collapse_whitespace(text::fold_case(s)); }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(text::trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(text::trim(cur));
    return out;
}

std::string fmt(double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

double player_value(const std::array<double, 8>& v, unsigned p) {
    unsigned others[2];
    int k = 0;
    for (unsigned m : {kModC, kModS, kModU})
        if (m != p) others[k++] = m;
    const unsigned q = others[0];
    const unsigned r = others[1];
    const double alone = v[p] - v[0];
    const double with_one = ((v[p | q] - v[q]) + (v[p | r] - v[r])) / 2.0;
    const double with_both = v[p | q | r] - v[q | r];
    return (alone + with_one + with_both) / 3.0 * 1e3;
}

void add(GroupStats& g, const EvalRecord& r) {
    ++g.total;
    if (r.correct) ++g.correct;
    ++g.categories[r.category];
}

constexpr ErrorCategory kCategories[] = {ErrorCategory::correct,          ErrorCategory::refusal,
                                         ErrorCategory::hallucination,    ErrorCategory::totally_incorrect,
                                         ErrorCategory::missing_key_info, ErrorCategory::imprecise};

}  // namespace

std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::correct: return "correct";
        case ErrorCategory::refusal: return "refusal";
        case ErrorCategory::hallucination: return "hallucination";
        case ErrorCategory::totally_incorrect: return "totally_incorrect";
        case ErrorCategory::missing_key_info: return "missing_key_info";
        case ErrorCategory::imprecise: return "imprecise";
    }
    return "refusal";
}

std::optional<ErrorCategory> parse_category(std::string_view raw) {
    auto s = normalize(raw);
    for (char& c : s)
        if (c == ' ' || c == '-') c = '_';
    while (!s.empty() && (s.back() == '.' || s.back() == '_')) s.pop_back();
    for (auto c : kCategories)
        if (to_string(c) == s) return c;
    if (s == "missing_key_information" || s == "missing_information") return ErrorCategory::missing_key_info;
    if (s == "incorrect") return ErrorCategory::totally_incorrect;
    return std::nullopt;
}

bool detect_refusal(std::string_view prediction, const RefusalPhrases& phrases) {
    const auto p = normalize(prediction);
    if (p.empty()) return true;
    for (const auto& phrase : phrases.phrases)
        if (p.find(normalize(phrase)) != std::string::npos) return true;
    return false;
}

JudgeVerdict fallback_judge(std::string_view gold, std::string_view prediction) {
    const auto g = normalize(gold);
    const auto p = normalize(prediction);
    const bool ok = !g.empty() && p.find(g) != std::string::npos;
    return {ok, ok ? "reference found in prediction" : "reference not found in prediction"};
}

JudgeVerdict judge(std::string_view question, std::string_view gold, std::string_view prediction,
                   Reasoner* backend) {
    if (!backend) return fallback_judge(gold, prediction);
    static const std::regex score_re(R"(SCORE\s*:\s*\**\s*([01])\b)", std::regex::icase);
    static const std::regex reason_re(R"(REASONING\s*:\s*([\s\S]*?)(?:\n\s*SCORE\s*:|$))", std::regex::icase);
    ReasonerRequest req;
    req.role = Role::judge;
    req.template_id = "judge";
    req.variables = {{"question", std::string(question)},
                     {"gold", std::string(gold)},
                     {"prediction", std::string(prediction)}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        const auto text = backend->complete(req).text;
        std::smatch m;
        if (std::regex_search(text, m, score_re)) {
            JudgeVerdict v;
            v.correct = m[1].str() == "1";
            std::smatch r;
            if (std::regex_search(text, r, reason_re)) v.reasoning = text::trim(r[1].str());
            return v;
        }
    }
    throw BackendError("judge output has no SCORE line after retry");
}

ErrorCategory classify_error(std::string_view question, std::string_view gold, std::string_view prediction,
                             std::string_view context, Reasoner& backend) {
    ReasonerRequest req;
    req.role = Role::classifier;
    req.template_id = "error_classification";
    req.variables = {{"question", std::string(question)},
                     {"gold", std::string(gold)},
                     {"prediction", std::string(prediction)},
                     {"context", std::string(context)}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        const auto text = text::trim(backend.complete(req).text);
        // Accept the bare name or a name on the last line.
        if (auto c = parse_category(text)) {
            if (*c != ErrorCategory::correct && *c != ErrorCategory::refusal) return *c;
        }
        const auto nl = text.find_last_of('\n');
        if (nl != std::string::npos) {
            if (auto c = parse_category(text.substr(nl + 1)))
                if (*c != ErrorCategory::correct && *c != ErrorCategory::refusal) return *c;
        }
    }
    throw BackendError("classifier output is not a failure category after retry");
}

EvalRecord evaluate_one(const QAItem& item, const Prediction& p, Reasoner* judge_backend,
                        Reasoner* classifier_backend, const RefusalPhrases& phrases) {
    EvalRecord r;
    r.qa_id = item.id;
    r.prediction = p.prediction;
    const auto v = judge(item.question, item.answer, p.prediction, judge_backend);
    r.correct = v.correct;
    r.judge_reasoning = v.reasoning;
    if (r.correct) {
        r.category = ErrorCategory::correct;
    } else if (detect_refusal(p.prediction, phrases)) {
        r.category = ErrorCategory::refusal;
    } else if (classifier_backend) {
        r.category = classify_error(item.question, item.answer, p.prediction, p.context, *classifier_backend);
    } else {
        HeuristicReasoner h;
        r.category = classify_error(item.question, item.answer, p.prediction, p.context, h);
    }
    return r;
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open predictions " + path);
    std::vector<Prediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("qa_id").get<std::string>(), j.value("prediction", ""), j.value("context", "")});
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string predictions_to_jsonl(const std::vector<Prediction>& preds) {
    std::string out;
    for (const auto& p : preds)
        out += json{{"qa_id", p.qa_id}, {"prediction", p.prediction}, {"context", p.context}}.dump() + "\n";
    return out;
}

std::string subset_label(unsigned mask) {
    std::string s;
    if (mask & kModC) s += 'C';
    if (mask & kModS) s += 'S';
    if (mask & kModU) s += 'U';
    return s.empty() ? "{}" : s;
}

std::optional<unsigned> parse_subset_label(std::string_view raw) {
    const auto l = text::trim(raw);
    if (l == "{}" || l == "none" || l == "-" || l == "∅" || l.empty()) return 0u;
    unsigned mask = 0;
    for (char c : l) {
        switch (c) {
            case 'C': case 'c': mask |= kModC; break;
            case 'S': case 's': mask |= kModS; break;
            case 'U': case 'u': mask |= kModU; break;
            case '+': case ' ': break;
            default: return std::nullopt;
        }
    }
    return mask;
}

std::array<double, 8> AblationGrid::column(const std::string& name) const {
    std::array<double, 8> out{};
    for (unsigned mask = 0; mask < 8; ++mask) {
        auto row = values.find(mask);
        if (row == values.end()) throw MissingSubset("grid has no row for subset " + subset_label(mask));
        auto cell = row->second.find(name);
        if (cell == row->second.end())
            throw MissingSubset("subset " + subset_label(mask) + " has no value for column " + name);
        out[mask] = cell->second;
    }
    return out;
}

ShapleyResult shapley3(const std::array<double, 8>& acc) {
    return {player_value(acc, kModC), player_value(acc, kModS), player_value(acc, kModU)};
}

ShapleyResult shapley3(const AblationGrid& grid, const std::string& column) { return shapley3(grid.column(column)); }

AblationGrid parse_grid_csv(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    AblationGrid g;
    std::vector<std::string> header;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
        auto cells = split_csv_line(line);
        if (header.empty()) {
            header = cells;
            if (header.empty() || text::fold_case(header[0]) != "modules")
                throw ParseError("grid csv must start with a \"modules\" column");
            g.columns.assign(header.begin() + 1, header.end());
            continue;
        }
        if (cells.size() != header.size())
            throw ParseError("grid csv line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(header.size()));
        const auto mask = parse_subset_label(cells[0]);
        if (!mask) throw ParseError("grid csv line " + std::to_string(lineno) + ": bad subset " + cells[0]);
        if (g.values.count(*mask)) throw ParseError("grid csv repeats subset " + subset_label(*mask));
        auto& row = g.values[*mask];
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cells[i], &used);
                if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
                if (v < 0.0 || v > 1.0) throw ParseError("grid accuracy outside [0,1]: " + cells[i]);
                row[header[i]] = v;
            } catch (const std::logic_error&) {
                throw ParseError("grid csv line " + std::to_string(lineno) + ": not a number: " + cells[i]);
            }
        }
    }
    return g;
}

AblationGrid read_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grid " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_grid_csv(ss.str());
}

std::string grid_to_csv(const AblationGrid& g) {
    std::string out = "modules";
    for (const auto& c : g.columns) out += "," + c;
    out += "\n";
    for (const auto& [mask, row] : g.values) {
        out += subset_label(mask);
        for (const auto& c : g.columns) {
            auto it = row.find(c);
            out += "," + (it == row.end() ? std::string() : fmt(it->second, 4));
        }
        out += "\n";
    }
    return out;
}

std::string shapley_csv(const AblationGrid& g) {
    std::string out = "column,phi_C,phi_S,phi_U,sum,acc_full_minus_empty_x1e3\n";
    for (const auto& c : g.columns) {
        const auto acc = g.column(c);
        const auto r = shapley3(acc);
        out += c + "," + fmt(r.phi_C, 2) + "," + fmt(r.phi_S, 2) + "," + fmt(r.phi_U, 2) + "," + fmt(r.sum(), 2) +
               "," + fmt((acc[7] - acc[0]) * 1e3, 2) + "\n";
    }
    return out;
}

Report aggregate(const std::vector<EvalRecord>& records, const std::vector<QAItem>& benchmark) {
    std::map<std::string, const QAItem*> index;
    for (const auto& item : benchmark) index[item.id] = &item;
    Report rep;
    for (const auto& r : records) {
        auto it = index.find(r.qa_id);
        if (it == index.end()) throw JoinError("prediction for unknown qa_id " + r.qa_id);
        const auto& item = *it->second;
        add(rep.overall, r);
        add(rep.by_kind_difficulty[std::string(to_string(item.kind)) + "/" + std::string(to_string(item.difficulty))],
            r);
        add(rep.by_domain[std::string(to_string(item.domain))], r);
        add(rep.by_language[std::string(to_string(item.language))], r);
    }
    return rep;
}

std::string report_table_csv(const std::map<std::string, GroupStats>& groups, const std::string& key_name) {
    std::string out = key_name + ",total,correct,accuracy";
    for (auto c : kCategories) out += "," + std::string(to_string(c));
    out += "\n";
    for (const auto& [key, g] : groups) {
        out += key + "," + std::to_string(g.total) + "," + std::to_string(g.correct) + "," + fmt(g.accuracy(), 4);
        for (auto c : kCategories) {
            auto it = g.categories.find(c);
            out += "," + std::to_string(it == g.categories.end() ? 0 : it->second);
        }
        out += "\n";
    }
    return out;
}

std::string report_summary_json(const Report& rep, std::optional<double> baseline_accuracy) {
    json cats = json::object();
    for (auto c : kCategories) {
        auto it = rep.overall.categories.find(c);
        cats[std::string(to_string(c))] = it == rep.overall.categories.end() ? 0 : it->second;
    }
    json j{{"total", rep.overall.total},
           {"correct", rep.overall.correct},
           {"accuracy", rep.overall.accuracy()},
           {"categories", cats}};
    if (baseline_accuracy) {
        j["baseline_accuracy"] = *baseline_accuracy;
        if (*baseline_accuracy > 0)
            j["relative_improvement"] = relative_improvement(*baseline_accuracy, rep.overall.accuracy());
    }
    return j.dump(2) + "\n";
}

double relative_improvement(double old_acc, double new_acc) {
    if (old_acc == 0.0) throw PreconditionError("relative improvement over a zero baseline is undefined");
    return (new_acc - old_acc) / old_acc;
}

}  // namespace wayfinder
