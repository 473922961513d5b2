#include "wayfinder/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"
#include "wayfinder/understanding_score.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

// Generated from data/prompts at build time.
const std::map<std::string, std::string>& embedded_prompts();

namespace {

using nlohmann::json;

const std::map<Role, std::string_view>& role_names() {
    static const std::map<Role, std::string_view> names{
        {Role::explorer, "explorer"},
        {Role::critic_filter, "critic_filter"},
        {Role::critic_sufficiency, "critic_sufficiency"},
        {Role::vlm_perceive, "vlm_perceive"},
        {Role::relevance, "relevance"},
        {Role::judge, "judge"},
        {Role::classifier, "classifier"},
        {Role::generator, "generator"},
        {Role::teacher, "teacher"},
    };
    return names;
}

std::string var(const ReasonerRequest& r, const std::string& name) {
    auto it = r.variables.find(name);
    return it == r.variables.end() ? std::string() : it->second;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            out.push_back(text::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(text::trim(cur));
    return out;
}

bool is_link_line(const std::string& line) {
    return !line.empty() && (line.front() == '[' || line.rfind("- [", 0) == 0 || line.rfind("* [", 0) == 0);
}

std::set<std::string> token_set(std::string_view s) {
    auto toks = text::tokenize(s);
    return {toks.begin(), toks.end()};
}

std::string normalize_for_match(std::string_view s) {
    return text::collapse_whitespace(text::fold_case(s));
}

// ---- heuristic roles -------------------------------------------------------

std::string heuristic_explorer(const ReasonerRequest& r) {
    const auto terms = text::content_terms(var(r, "query"));
    json links = json::array();
    try {
        links = json::parse(var(r, "links_json"));
    } catch (const json::exception&) {
    }
    std::optional<std::string> best;
    std::size_t best_score = 0;
    for (const auto& l : links) {
        if (l.value("visited", false)) continue;
        const std::string url = l.value("url", "");
        const auto vocab = token_set(l.value("text", "") + " " + url);
        std::size_t score = 0;
        for (const auto& t : terms) score += vocab.count(t);
        if (!best || score > best_score) {
            best = url;
            best_score = score;
        }
    }
    if (best) {
        return "Thought: the link with the most task terms is the best next step.\nAction: visit\nAction Input: " +
               json{{"url", *best}}.dump();
    }
    if (var(r, "can_backtrack") == "true")
        return "Thought: nothing left to open here.\nAction: backtrack\nAction Input: {}";
    return "Thought: no unvisited links remain.\nAction: give_up\nAction Input: {}";
}

std::string heuristic_critic_filter(const ReasonerRequest& r) {
    const auto query = var(r, "query");
    const auto observation = var(r, "observation");
    const auto terms = text::content_terms(query);
    std::vector<std::string> kept;
    for (const auto& line : split_lines(observation)) {
        if (line.empty() || is_link_line(line)) continue;
        const auto vocab = token_set(line);
        if (std::any_of(terms.begin(), terms.end(), [&](const auto& t) { return vocab.count(t) > 0; }))
            kept.push_back(line);
        if (kept.size() == 8) break;
    }
    if (kept.empty() || keyword_relevance(query, observation).points < 20)
        return json{{"is_useful", false}, {"extracted_info", nullptr}}.dump();
    std::string info;
    for (const auto& k : kept) info += (info.empty() ? "" : "\n") + k;
    return json{{"is_useful", true}, {"extracted_info", info}}.dump();
}

std::string heuristic_sufficiency(const ReasonerRequest& r) {
    json acc = json::array();
    try {
        acc = json::parse(var(r, "accumulated_json"));
    } catch (const json::exception&) {
    }
    if (!acc.is_array() || acc.empty()) return json{{"is_sufficient", false}, {"final_answer", nullptr}}.dump();
    return json{{"is_sufficient", true}, {"final_answer", acc.back()}}.dump();
}

std::string heuristic_judge(const ReasonerRequest& r) {
    const auto gold = normalize_for_match(var(r, "gold"));
    const auto pred = normalize_for_match(var(r, "prediction"));
    const bool ok = !gold.empty() && pred.find(gold) != std::string::npos;
    return std::string("REASONING: reference ") + (ok ? "appears" : "does not appear") +
           " in the prediction.\nSCORE: " + (ok ? "1" : "0");
}

std::string heuristic_classifier(const ReasonerRequest& r) {
    const auto question_terms = token_set(var(r, "question"));
    auto fresh_terms = [&](const std::string& s) {
        std::set<std::string> out;
        for (const auto& t : text::content_terms(s))
            if (!question_terms.count(t)) out.insert(t);
        return out;
    };
    const auto pred = fresh_terms(var(r, "prediction"));
    const auto gold_raw = var(r, "gold");
    const auto gold = fresh_terms(gold_raw);
    const auto context = token_set(var(r, "context"));
    const bool within_gold =
        !pred.empty() && std::all_of(pred.begin(), pred.end(), [&](const auto& t) { return gold.count(t) > 0; });
    if (within_gold) {
        const auto g = text::fold_case(gold_raw);
        const bool multi_part = text::contains_word(g, "and") || g.find(';') != std::string::npos ||
                                g.find(',') != std::string::npos;
        return multi_part ? "missing_key_info" : "imprecise";
    }
    for (const auto& t : pred)
        if (!context.count(t) && !gold.count(t)) return "hallucination";
    return "totally_incorrect";
}

std::string pick_fact_line(const std::string& content) {
    std::string fallback;
    for (const auto& line : split_lines(content)) {
        if (line.size() < 20 || line.front() == '#' || is_link_line(line)) continue;
        if (std::any_of(line.begin(), line.end(), [](unsigned char c) { return std::isdigit(c); })) return line;
        if (fallback.empty()) fallback = line;
    }
    return fallback;
}

std::string topic_of(const std::string& line) {
    std::string topic;
    std::size_t n = 0;
    for (const auto& t : text::content_terms(line)) {
        if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
        topic += (topic.empty() ? "" : " ") + t;
        if (++n == 3) break;
    }
    return topic;
}

std::string heuristic_generator(const ReasonerRequest& r) {
    if (var(r, "kind") == "multi_source") {
        const auto a = pick_fact_line(var(r, "content_1"));
        const auto b = pick_fact_line(var(r, "content_2"));
        if (a.empty() || b.empty()) return json{{"question", ""}, {"answer", ""}}.dump();
        return json{{"question", "What do the \"" + var(r, "title_1") + "\" and \"" + var(r, "title_2") +
                                     "\" pages state about " + topic_of(a) + " and " + topic_of(b) + "?"},
                    {"answer", a + "; " + b}}
            .dump();
    }
    const auto line = pick_fact_line(var(r, "content"));
    if (line.empty()) return json{{"question", ""}, {"answer", ""}}.dump();
    return json{{"question", "What does the \"" + var(r, "title") + "\" page state about " + topic_of(line) + "?"},
                {"answer", line}}
        .dump();
}

std::string heuristic_teacher(const ReasonerRequest& r) {
    const auto question = text::collapse_whitespace(var(r, "question"));
    const auto answer = text::collapse_whitespace(var(r, "answer"));
    const auto sources = token_set(var(r, "sources"));
    const auto answer_tokens = text::tokenize(answer);
    bool valid = !question.empty() && !answer_tokens.empty();
    for (const auto& t : answer_tokens)
        if (!sources.count(t)) valid = false;
    std::string refined = question;
    if (!refined.empty() && refined.back() != '?') refined += '?';
    return json{{"is_valid", valid},
                {"refined_question", refined},
                {"refined_answer", answer},
                {"reason", valid ? "every answer token occurs in the sources" : "answer not supported by sources"}}
        .dump();
}

std::string heuristic_relevance(const ReasonerRequest& r) {
    const auto v = keyword_relevance(var(r, "query"), var(r, "observation"));
    return json{{"score", v.points}, {"reason", v.reason}}.dump();
}

bool when_matches(const ScriptedReasoner::Rule& rule, const ReasonerRequest& req) {
    for (const auto& [name, needles] : rule.when) {
        const auto value = var(req, name);
        for (const auto& n : needles)
            if (value.find(n) == std::string::npos) return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(Role r) { return role_names().at(r); }

std::optional<Role> parse_role(std::string_view s) {
    for (const auto& [role, name] : role_names())
        if (name == s) return role;
    return std::nullopt;
}

std::optional<nlohmann::json> extract_json_object(std::string_view s) {
    for (std::size_t start = s.find('{'); start != std::string_view::npos; start = s.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < s.size(); ++i) {
            const char c = s[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                try {
                    auto j = nlohmann::json::parse(s.substr(start, i - start + 1));
                    if (j.is_object()) return j;
                } catch (const nlohmann::json::exception&) {
                }
                break;
            }
        }
    }
    return std::nullopt;
}

PromptLibrary PromptLibrary::defaults() {
    PromptLibrary lib;
    for (const auto& [id, body] : embedded_prompts()) lib.set(id, body);
    return lib;
}

void PromptLibrary::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        set(entry.path().stem().string(), ss.str());
    }
}

const std::string& PromptLibrary::get(std::string_view id) const {
    auto it = templates_.find(std::string(id));
    if (it == templates_.end()) throw ConfigError("unknown prompt template: " + std::string(id));
    return it->second;
}

std::string PromptLibrary::render(std::string_view id, const std::map<std::string, std::string>& vars) const {
    const auto& tpl = get(id);
    std::string out;
    out.reserve(tpl.size());
    for (std::size_t i = 0; i < tpl.size();) {
        if (tpl[i] == '{') {
            const auto close = tpl.find('}', i + 1);
            if (close != std::string::npos) {
                const auto name = tpl.substr(i + 1, close - i - 1);
                if (auto it = vars.find(name); it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tpl[i++];
    }
    return out;
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string default_template_id(Role r) {
    switch (r) {
        case Role::classifier: return "error_classification";
        case Role::generator: return "qa_single";
        default: return std::string(to_string(r));
    }
}

ReasonerResponse HeuristicReasoner::complete(const ReasonerRequest& r) {
    ReasonerResponse resp;
    switch (r.role) {
        case Role::explorer: resp.text = heuristic_explorer(r); break;
        case Role::critic_filter: resp.text = heuristic_critic_filter(r); break;
        case Role::critic_sufficiency: resp.text = heuristic_sufficiency(r); break;
        case Role::vlm_perceive: resp.text = r.image_payload.value_or(""); break;
        case Role::relevance: resp.text = heuristic_relevance(r); break;
        case Role::judge: resp.text = heuristic_judge(r); break;
        case Role::classifier: resp.text = heuristic_classifier(r); break;
        case Role::generator: resp.text = heuristic_generator(r); break;
        case Role::teacher: resp.text = heuristic_teacher(r); break;
    }
    resp.parsed = extract_json_object(resp.text);
    return resp;
}

ScriptedReasoner::ScriptedReasoner(std::vector<Rule> rules, std::shared_ptr<Reasoner> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

std::shared_ptr<ScriptedReasoner> ScriptedReasoner::from_json(const nlohmann::json& doc, const std::string& source) {
    if (!doc.is_object() || !doc.contains("responses") || !doc["responses"].is_array())
        throw ConfigError(source + ": script needs a \"responses\" array");
    std::vector<Rule> rules;
    for (const auto& item : doc["responses"]) {
        Rule rule;
        const auto role = parse_role(item.value("role", ""));
        if (!role) throw ConfigError(source + ": unknown role in script: " + item.value("role", ""));
        rule.role = *role;
        if (item.contains("step")) rule.step = item["step"].get<std::size_t>();
        if (item.contains("attempt")) rule.attempt = item["attempt"].get<int>();
        if (item.contains("when")) {
            for (const auto& [name, needles] : item["when"].items()) {
                auto& list = rule.when[name];
                if (needles.is_string())
                    list.push_back(needles.get<std::string>());
                else
                    for (const auto& n : needles) list.push_back(n.get<std::string>());
            }
        }
        if (item.contains("json"))
            rule.text = item["json"].dump();
        else if (item.contains("text"))
            rule.text = item["text"].get<std::string>();
        else
            throw ConfigError(source + ": script entry needs \"text\" or \"json\"");
        rules.push_back(std::move(rule));
    }
    std::shared_ptr<Reasoner> fallback;
    const auto fb = doc.value("fallback", std::string());
    if (fb == "heuristic")
        fallback = std::make_shared<HeuristicReasoner>();
    else if (!fb.empty())
        throw ConfigError(source + ": unsupported fallback \"" + fb + "\"");
    return std::make_shared<ScriptedReasoner>(std::move(rules), std::move(fallback));
}

std::shared_ptr<ScriptedReasoner> ScriptedReasoner::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open script: " + path);
    try {
        return from_json(nlohmann::json::parse(in), path);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ReasonerResponse ScriptedReasoner::complete(const ReasonerRequest& req) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    const Rule* chosen = nullptr;
    auto applicable = [&](const Rule& rule) {
        return rule.role == req.role && (!rule.attempt || *rule.attempt == req.attempt) && when_matches(rule, req);
    };
    for (const auto& rule : rules_)
        if (!chosen && applicable(rule) && rule.step && *rule.step == req.step) chosen = &rule;
    for (const auto& rule : rules_)
        if (!chosen && applicable(rule) && !rule.step && !rule.when.empty()) chosen = &rule;
    for (const auto& rule : rules_)
        if (!chosen && applicable(rule) && !rule.step && rule.when.empty()) chosen = &rule;
    if (!chosen) {
        if (fallback_) return fallback_->complete(req);
        throw BackendError("script has no response for role " + std::string(to_string(req.role)) + " at step " +
                           std::to_string(req.step));
    }
    return {chosen->text, extract_json_object(chosen->text)};
}

std::size_t ScriptedReasoner::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

HttpReasoner::HttpReasoner(HttpBackendConfig cfg, std::shared_ptr<const PromptLibrary> prompts)
    : cfg_(std::move(cfg)), prompts_(std::move(prompts)) {
    if (!prompts_) prompts_ = std::make_shared<PromptLibrary>(PromptLibrary::defaults());
}

ReasonerResponse HttpReasoner::complete(const ReasonerRequest& req) {
    const auto parts = parse_url(cfg_.endpoint);
    if (!parts) throw BackendError("bad endpoint url: " + cfg_.endpoint);
    const auto tpl = req.template_id.empty() ? default_template_id(req.role) : req.template_id;
    const auto prompt = prompts_->render(tpl, req.variables);

    json content;
    if (req.image_payload && (req.image_payload->rfind("data:", 0) == 0 || is_absolute_url(*req.image_payload))) {
        content = json::array({json{{"type", "text"}, {"text", prompt}},
                               json{{"type", "image_url"}, {"image_url", {{"url", *req.image_payload}}}}});
    } else if (req.image_payload) {
        content = prompt + "\n\n" + *req.image_payload;
    } else {
        content = prompt;
    }
    const json body{{"model", cfg_.model},
                    {"temperature", 0},
                    {"messages", json::array({json{{"role", "user"}, {"content", content}}})}};

    httplib::Client cli(parts->scheme + "://" + parts->host);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    httplib::Headers headers;
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    std::string path = parts->path.empty() ? "/" : parts->path;
    if (parts->query) path += "?" + *parts->query;
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) throw BackendError("request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError("endpoint " + cfg_.endpoint + " answered HTTP " + std::to_string(res->status));
    try {
        const auto j = json::parse(res->body);
        ReasonerResponse out;
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        out.parsed = extract_json_object(out.text);
        return out;
    } catch (const json::exception& e) {
        throw BackendError("malformed completion from " + cfg_.endpoint + ": " + e.what());
    }
}

ReasonerResponse RoutingReasoner::complete(const ReasonerRequest& req) {
    if (auto it = routes_.find(req.role); it != routes_.end()) return it->second->complete(req);
    if (!fallback_) throw BackendError("no backend for role " + std::string(to_string(req.role)));
    return fallback_->complete(req);
}

std::shared_ptr<Reasoner> make_reasoner(std::string_view spec_in, const BackendContext& ctx) {
    const std::string spec = text::trim(spec_in);
    if (spec.rfind("script://", 0) == 0) {
        std::string path = spec.substr(9);
        if (const auto pos = path.find("{qa_id}"); pos != std::string::npos) path.replace(pos, 7, ctx.qa_id);
        return ScriptedReasoner::from_file(path);
    }
    if (spec.rfind("heuristic:", 0) == 0) return std::make_shared<HeuristicReasoner>();
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        HttpBackendConfig cfg;
        cfg.endpoint = spec;
        cfg.model = ctx.model;
        cfg.api_key_env = ctx.api_key_env;
        cfg.timeout_s = ctx.timeout_s;
        return std::make_shared<HttpReasoner>(cfg, ctx.prompts);
    }
    throw ConfigError("unsupported backend spec: " + spec);
}

}  // namespace wayfinder
