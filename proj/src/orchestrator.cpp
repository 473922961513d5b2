#include "wayfinder/orchestrator.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

template <typename Validate>
auto ask_with_retry(Reasoner& reasoner, ReasonerRequest req, Validate validate) {
    std::string last;
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        const auto resp = reasoner.complete(req);
        if (auto parsed = validate(resp)) return *parsed;
        last = resp.text;
    }
    throw ReasonerProtocol(std::string(to_string(req.role)) + " response unusable after retry: " +
                           last.substr(0, 200));
}

std::optional<json> response_json(const ReasonerResponse& resp) {
    if (resp.parsed && resp.parsed->is_object()) return resp.parsed;
    return extract_json_object(resp.text);
}

std::vector<std::string> split_entities(const std::string& info) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        auto t = text::trim(cur);
        while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = text::trim(t.substr(1));
        if (!t.empty()) out.push_back(t);
        cur.clear();
    };
    for (char c : info) {
        if (c == '\n' || c == ';')
            flush();
        else
            cur += c;
    }
    flush();
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string counter_status(const CounterState& c, bool active) {
    if (!active) return "no numeric constraint";
    const auto& k = c.constraint();
    if (k.mode == CounterMode::quota)
        return "quota: " + std::to_string(c.count()) + " of " + std::to_string(*k.target) + " " + k.subject +
               (c.terminated() ? " (target met)" : " (target not met, keep exploring)");
    return "exhaustive count of " + k.subject + ": " + std::to_string(c.count()) + " so far" +
           (c.env_exhausted() ? " (pagination exhausted)" : " (keep following pagination)");
}

CounterSnapshot snapshot(const CounterState& c) {
    return {c.constraint().mode, c.constraint().target, c.count(), c.terminated()};
}

json action_json(const Action& a) {
    return json{{"kind", to_string(a.kind)}, {"target", a.target}, {"rationale", a.rationale}};
}

json markers_json(const MarkerSet& m) {
    json j{{"has_gallery", m.has_gallery},
           {"has_captcha", m.has_captcha},
           {"has_error_page", m.has_error_page},
           {"has_next_page", m.has_next_page}};
    if (m.next_page_link) j["next_page_link"] = m.next_page_link->href;
    return j;
}

json step_json(const Step& s) {
    json j{{"type", "step"},
           {"index", s.index},
           {"url", s.url},
           {"status", s.status},
           {"summary",
            {{"total_chars", s.summary.total_chars},
             {"valid_chars", s.summary.valid_chars},
             {"n_para", s.summary.n_para},
             {"n_btn", s.summary.n_btn},
             {"structural_tags", s.summary.structural_tags}}},
           {"markers", markers_json(s.markers)},
           {"relevance_points", s.relevance_points},
           {"score",
            {{"s_qual", s.score.s_qual},
             {"s_rel", s.score.s_rel},
             {"s_struct", s.score.s_struct},
             {"s_spec", s.score.s_spec},
             {"phi", s.score.phi},
             {"modality", to_string(s.score.modality)}}},
           {"vlm_used", s.vlm_used},
           {"guard_events", s.guard_events},
           {"counter",
            {{"mode", to_string(s.counter.mode)},
             {"count", s.counter.count},
             {"terminated", s.counter.terminated}}},
           {"breadcrumb", s.breadcrumb}};
    if (s.counter.target) j["counter"]["target"] = *s.counter.target;
    if (s.transport_error) j["transport_error"] = *s.transport_error;
    if (s.viability)
        j["viability"] = {{"verdict", to_string(s.viability->verdict)}, {"reason", to_string(s.viability->reason)}};
    if (s.filter) {
        j["filter"] = {{"is_useful", s.filter->is_useful}, {"extracted_info", nullptr}};
        if (s.filter->extracted_info) j["filter"]["extracted_info"] = *s.filter->extracted_info;
    }
    if (s.sufficiency) {
        j["sufficiency"] = {{"is_sufficient", s.sufficiency->is_sufficient}, {"final_answer", nullptr}};
        if (s.sufficiency->final_answer) j["sufficiency"]["final_answer"] = *s.sufficiency->final_answer;
    }
    if (s.proposed) j["proposed"] = action_json(*s.proposed);
    if (s.action) j["action"] = action_json(*s.action);
    return j;
}

std::string synthesize_answer(const CounterState& c, const std::vector<std::string>& pagination_pages) {
    const auto& k = c.constraint();
    if (k.mode == CounterMode::quota) return join(c.entities(), "; ");
    return std::to_string(c.count()) + " " + k.subject + " (pages: " + join(pagination_pages, " -> ") + ")";
}

}  // namespace

std::string ModuleToggles::label() const {
    std::string s;
    if (counter_on) s += 'C';
    if (stack_on) s += 'S';
    if (vlm_on) s += 'U';
    return s.empty() ? "{}" : s;
}

std::optional<ModuleToggles> ModuleToggles::from_label(std::string_view label) {
    ModuleToggles t{false, false, false};
    const auto l = text::trim(label);
    if (l == "{}" || l == "none" || l.empty()) return t;
    for (char c : l) {
        switch (c) {
            case 'C': case 'c': t.counter_on = true; break;
            case 'S': case 's': t.stack_on = true; break;
            case 'U': case 'u': t.vlm_on = true; break;
            case '+': break;
            default: return std::nullopt;
        }
    }
    return t;
}

std::vector<ModuleToggles> ModuleToggles::all() {
    return {{false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
            {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true}};
}

nlohmann::json AgentConfig::to_json() const {
    return json{{"step_cap", step_cap},
                {"links_per_page", links_per_page},
                {"modules", toggles.label()},
                {"score",
                 {{"tau", score.tau},
                  {"low_cutoff", score.low_cutoff},
                  {"high_cutoff", score.high_cutoff},
                  {"f_len_peak", score.f_len_peak},
                  {"f_nav_peak", score.f_nav_peak},
                  {"p_gallery", score.p_gallery},
                  {"p_captcha", score.p_captcha},
                  {"p_error", score.p_error}}}};
}

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::visit: return "visit";
        case ActionKind::backtrack: return "backtrack";
        case ActionKind::answer: return "answer";
        case ActionKind::give_up: return "give_up";
    }
    return "give_up";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::answered: return "answered";
        case Outcome::refused: return "refused";
        case Outcome::step_capped: return "step_capped";
    }
    return "refused";
}

FilterVerdict critic_filter(std::string_view query, std::string_view observation, Reasoner& reasoner,
                            std::size_t step) {
    ReasonerRequest req;
    req.role = Role::critic_filter;
    req.template_id = "critic_filter";
    req.variables = {{"query", std::string(query)}, {"observation", std::string(observation)}};
    req.step = step;
    return ask_with_retry(reasoner, req, [](const ReasonerResponse& r) -> std::optional<FilterVerdict> {
        const auto j = response_json(r);
        if (!j || !j->contains("is_useful") || !(*j)["is_useful"].is_boolean()) return std::nullopt;
        FilterVerdict v;
        v.is_useful = (*j)["is_useful"].get<bool>();
        if (j->contains("extracted_info")) {
            const auto& e = (*j)["extracted_info"];
            if (e.is_string())
                v.extracted_info = e.get<std::string>();
            else if (!e.is_null())
                return std::nullopt;
        }
        if (j->contains("entities") && (*j)["entities"].is_array())
            for (const auto& e : (*j)["entities"])
                if (e.is_string()) v.entities.push_back(e.get<std::string>());
        if (!v.is_useful) {
            v.extracted_info.reset();
            v.entities.clear();
        }
        return v;
    });
}

SufficiencyVerdict critic_sufficiency(std::string_view query, const std::vector<std::string>& accumulated,
                                      Reasoner& reasoner, std::size_t step) {
    ReasonerRequest req;
    req.role = Role::critic_sufficiency;
    req.template_id = "critic_sufficiency";
    std::string listing;
    for (const auto& a : accumulated) listing += "- " + a + "\n";
    req.variables = {{"query", std::string(query)},
                     {"accumulated", listing},
                     {"accumulated_json", json(accumulated).dump()}};
    req.step = step;
    return ask_with_retry(reasoner, req, [](const ReasonerResponse& r) -> std::optional<SufficiencyVerdict> {
        const auto j = response_json(r);
        if (!j || !j->contains("is_sufficient") || !(*j)["is_sufficient"].is_boolean()) return std::nullopt;
        SufficiencyVerdict v;
        v.is_sufficient = (*j)["is_sufficient"].get<bool>();
        if (j->contains("final_answer") && (*j)["final_answer"].is_string())
            v.final_answer = (*j)["final_answer"].get<std::string>();
        if (v.is_sufficient && (!v.final_answer || text::trim(*v.final_answer).empty())) return std::nullopt;
        return v;
    });
}

std::optional<Action> parse_action(std::string_view raw) {
    static const std::regex action_re(R"(Action\s*:\s*([A-Za-z_\- ]+))", std::regex::icase);
    static const std::regex input_re(R"(Action\s+Input\s*:\s*([\s\S]*)$)", std::regex::icase);
    static const std::regex thought_re(R"(Thought\s*:\s*([\s\S]*?)(?:\n\s*Action\s*:|$))", std::regex::icase);
    const std::string s(raw);
    std::smatch m;
    // The Action line must not be the "Action Input" line.
    std::optional<std::string> verb;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), action_re); it != std::sregex_iterator(); ++it) {
        const auto pos = static_cast<std::size_t>(it->position(0));
        const auto before = s.substr(pos, 12);
        if (text::fold_case(before).rfind("action input", 0) == 0) continue;
        verb = text::fold_case(text::trim((*it)[1].str()));
        break;
    }
    if (!verb) return std::nullopt;
    std::replace(verb->begin(), verb->end(), ' ', '_');
    std::replace(verb->begin(), verb->end(), '-', '_');

    Action a;
    if (std::regex_search(s, m, thought_re)) a.rationale = text::trim(m[1].str());
    std::string input;
    if (std::regex_search(s, m, input_re)) input = text::trim(m[1].str());
    const auto obj = extract_json_object(input);

    if (*verb == "visit" || *verb == "click" || *verb == "open") {
        a.kind = ActionKind::visit;
        if (obj && obj->contains("url") && (*obj)["url"].is_string())
            a.target = (*obj)["url"].get<std::string>();
        else if (!input.empty() && input.front() != '{')
            a.target = text::trim(input.substr(0, input.find('\n')));
        if (a.target.empty()) return std::nullopt;
    } else if (*verb == "backtrack" || *verb == "back") {
        a.kind = ActionKind::backtrack;
    } else if (*verb == "answer" || *verb == "finish") {
        a.kind = ActionKind::answer;
        if (obj && obj->contains("answer") && (*obj)["answer"].is_string())
            a.target = (*obj)["answer"].get<std::string>();
        else if (!input.empty() && input.front() != '{')
            a.target = input;
    } else if (*verb == "give_up" || *verb == "stop") {
        a.kind = ActionKind::give_up;
    } else {
        return std::nullopt;
    }
    return a;
}

Action select_action(std::string_view query, const ExplorerContext& ctx, Reasoner& reasoner) {
    ReasonerRequest req;
    req.role = Role::explorer;
    req.template_id = "explorer";
    req.step = ctx.step;
    std::string listing;
    json links = json::array();
    for (std::size_t i = 0; i < ctx.links.size(); ++i) {
        const auto& l = ctx.links[i];
        listing += std::to_string(i + 1) + ". " + l.url + " | " + l.text;
        if (ctx.show_visited) listing += l.visited ? " | visited" : " | not visited";
        listing += "\n";
        json entry{{"url", l.url}, {"text", l.text}};
        if (ctx.show_visited) entry["visited"] = l.visited;
        links.push_back(std::move(entry));
    }
    req.variables = {{"query", std::string(query)},
                     {"breadcrumb", join(ctx.breadcrumb, " > ")},
                     {"links", listing.empty() ? "(none)" : listing},
                     {"links_json", links.dump()},
                     {"counter_status", ctx.counter_status},
                     {"can_backtrack", ctx.can_backtrack ? "true" : "false"}};
    return ask_with_retry(reasoner, req, [](const ReasonerResponse& r) { return parse_action(r.text); });
}

Episode run_episode(std::string_view query, std::string_view root_url, Environment& env, Reasoner& reasoner,
                    const AgentConfig& cfg, const RelevanceScorer& scorer) {
    Episode ep;
    ep.query = std::string(query);
    ep.root_url = std::string(root_url);
    ep.config = cfg;
    ep.constraint = cfg.toggles.counter_on ? parse_constraint(query) : CounterConstraint{};
    CounterState counter(ep.constraint);
    const bool counting = ep.constraint.mode != CounterMode::inactive;
    const bool stack_on = cfg.toggles.stack_on;

    // Frames are popped as well as pushed; give the stack room beyond the fetch budget.
    NavState nav(4 * cfg.step_cap + 4);
    std::string target(root_url);
    bool finished = false;

    auto finish = [&](Step& s, Outcome o, std::string answer = {}) {
        ep.outcome = o;
        ep.answer = std::move(answer);
        s.counter = snapshot(counter);
        s.breadcrumb = stack_on ? nav.breadcrumb() : std::vector<std::string>{};
        ep.steps.push_back(std::move(s));
        finished = true;
    };

    for (std::size_t index = 1; index <= cfg.step_cap && !finished; ++index) {
        Step s;
        s.index = index;
        s.url = canonicalize_url(target);

        const auto doc = env.fetch(target);
        if (index == 1 && (doc.transport_error || doc.status >= 400))
            throw EnvUnavailable("root " + std::string(root_url) + " unavailable (status " +
                                 std::to_string(doc.status) + ")");
        ep.visited.push_back(s.url);
        s.status = doc.status;
        s.transport_error = doc.transport_error;
        s.summary = summarize(doc);
        const auto links = extract_links(doc);
        s.markers = env.marker_override(target).value_or(detect_markers(doc, cfg.markers));
        s.relevance_points = score_relevance(query, s.summary, scorer);
        s.score = combine_scores(s.summary, s.relevance_points, s.markers, cfg.score);

        bool dead = false;
        if (stack_on) {
            const auto depth = nav.size();
            nav.push(target, links);
            s.viability = check_viability(doc, s.markers, s.relevance_points, depth);
            if (s.viability->verdict == Verdict::dead) {
                nav.pop();
                dead = true;
                s.guard_events.push_back("stack: pruned page (" + std::string(to_string(s.viability->reason)) + ")");
            }
        } else {
            nav.mark_visited(target);
        }

        if (!dead) {
            std::string observation = s.summary.extracted_text;
            if (cfg.toggles.vlm_on && s.score.modality == Modality::VLM) {
                ReasonerRequest req;
                req.role = Role::vlm_perceive;
                req.template_id = "vlm_perceive";
                req.variables = {{"query", ep.query}, {"url", s.url}};
                req.image_payload = env.visual_text(target);
                req.step = index;
                const auto seen = text::trim(reasoner.complete(req).text);
                s.vlm_used = true;
                if (!seen.empty()) observation += "\n" + seen;
            }

            s.filter = critic_filter(query, observation, reasoner, index);
            if (s.filter->is_useful && s.filter->extracted_info && !text::trim(*s.filter->extracted_info).empty())
                ep.accumulated_info.push_back(*s.filter->extracted_info);

            if (counting && s.filter->is_useful && !counter.terminated()) {
                auto entities = s.filter->entities;
                if (entities.empty() && s.filter->extracted_info) entities = split_entities(*s.filter->extracted_info);
                for (const auto& e : entities) {
                    if (counter.terminated()) break;
                    counter.record(e);
                }
                if (ep.constraint.mode == CounterMode::exhaustive && !counter.terminated()) {
                    ep.pagination_pages.push_back(s.url);
                    counter.signal_env(s.markers.has_next_page);
                }
            }

            if (counting && counter.should_terminate()) {
                ep.counted_entities = counter.entities();
                auto answer = synthesize_answer(counter, ep.pagination_pages);
                s.guard_events.push_back("counter: terminated");
                finish(s, Outcome::answered, std::move(answer));
                break;
            }

            if (!ep.accumulated_info.empty()) {
                s.sufficiency = critic_sufficiency(query, ep.accumulated_info, reasoner, index);
                if (s.sufficiency->is_sufficient) {
                    if (counting) {
                        s.guard_events.push_back("counter: sufficiency ignored, target not met");
                    } else {
                        finish(s, Outcome::answered, *s.sufficiency->final_answer);
                        break;
                    }
                }
            }
        }

        // Links the explorer chooses from: the current page, or the parent
        // frame after a pruned page.
        std::vector<LinkRef> source;
        if (stack_on) {
            if (nav.empty()) {
                s.guard_events.push_back("stack: nothing left to explore");
                finish(s, Outcome::refused);
                break;
            }
            if (dead)
                source = nav.top()->discovered;
            else
                source = links;
        } else {
            source = links;
        }
        std::vector<PresentedLink> presented;
        for (const auto& l : source) {
            if (presented.size() == cfg.links_per_page) break;
            presented.push_back({l.href, l.anchor_text, stack_on && nav.is_visited(l.href)});
        }
        auto is_presented = [&](const std::string& url) {
            const auto key = canonicalize_url(url);
            return std::any_of(presented.begin(), presented.end(),
                               [&](const auto& p) { return canonicalize_url(p.url) == key; });
        };

        enum class Move { visit, stay, backtrack, resume, refuse };
        Move move = Move::visit;
        Action act;
        const bool follow_pagination = !dead && counting && ep.constraint.mode == CounterMode::exhaustive &&
                                       s.filter && s.filter->is_useful && s.markers.next_page_link &&
                                       !nav.is_visited(s.markers.next_page_link->href);
        if (follow_pagination) {
            act = {ActionKind::visit, s.markers.next_page_link->href, "pagination"};
            s.guard_events.push_back("counter: following next page");
        } else {
            ExplorerContext ctx;
            ctx.breadcrumb = stack_on ? nav.breadcrumb() : std::vector<std::string>{s.url};
            ctx.links = presented;
            ctx.counter_status = counter_status(counter, counting);
            ctx.can_backtrack = stack_on;
            ctx.show_visited = stack_on;
            ctx.step = index;
            act = select_action(query, ctx, reasoner);
            s.proposed = act;

            switch (act.kind) {
                case ActionKind::visit:
                    if (!is_presented(act.target)) {
                        s.guard_events.push_back("explorer: link not on page: " + act.target);
                        move = stack_on ? Move::backtrack : Move::stay;
                    } else if (stack_on && nav.is_visited(act.target)) {
                        s.guard_events.push_back("stack: refused revisit of " + canonicalize_url(act.target));
                        move = Move::backtrack;
                    }
                    break;
                case ActionKind::backtrack:
                    if (!stack_on) s.guard_events.push_back("no back navigation without the stack");
                    move = stack_on ? Move::backtrack : Move::stay;
                    break;
                case ActionKind::give_up:
                    move = Move::refuse;
                    break;
                case ActionKind::answer: {
                    bool accept = false;
                    if (counting) {
                        s.guard_events.push_back("counter: answer blocked, target not met");
                    } else {
                        s.sufficiency = critic_sufficiency(query, ep.accumulated_info, reasoner, index);
                        accept = s.sufficiency->is_sufficient;
                        if (!accept) s.guard_events.push_back("critic: answer rejected as insufficient");
                    }
                    if (accept) {
                        s.action = act;
                        finish(s, Outcome::answered, *s.sufficiency->final_answer);
                    }
                    move = Move::resume;
                    break;
                }
            }
            if (finished) break;
        }

        if (move == Move::backtrack) {
            nav.pop();
            move = Move::resume;
            act = {ActionKind::backtrack, "", act.rationale};
        }
        if (move == Move::resume) {
            if (stack_on) {
                if (auto next = nav.next_unexplored()) {
                    while (nav.size() > next->first + 1) nav.pop();
                    if (act.kind != ActionKind::backtrack) act.kind = ActionKind::visit;
                    act.target = next->second.href;
                } else {
                    s.guard_events.push_back("stack: exploration tree exhausted");
                    move = Move::refuse;
                }
            } else {
                auto it = std::find_if(presented.begin(), presented.end(),
                                       [&](const auto& p) { return !nav.is_visited(p.url); });
                if (it == presented.end())
                    move = Move::refuse;
                else
                    act = {ActionKind::visit, it->url, "continue exploring"};
            }
        }
        if (move == Move::stay) act = {ActionKind::visit, target, "stay on page"};
        if (move == Move::refuse) {
            if (act.kind != ActionKind::give_up) act = {ActionKind::give_up, "", act.rationale};
            s.action = act;
            finish(s, Outcome::refused);
            break;
        }

        target = act.target;
        s.action = act;
        s.counter = snapshot(counter);
        s.breadcrumb = stack_on ? nav.breadcrumb() : std::vector<std::string>{};
        ep.steps.push_back(std::move(s));
    }

    if (!finished) ep.outcome = Outcome::step_capped;
    if (ep.counted_entities.empty()) ep.counted_entities = counter.entities();
    return ep;
}

std::string episode_to_jsonl(const Episode& ep) {
    std::ostringstream out;
    json header{{"type", "header"},
                {"query", ep.query},
                {"root_url", ep.root_url},
                {"config", ep.config.to_json()},
                {"toggles",
                 {{"counter_on", ep.config.toggles.counter_on},
                  {"stack_on", ep.config.toggles.stack_on},
                  {"vlm_on", ep.config.toggles.vlm_on}}},
                {"constraint", {{"mode", to_string(ep.constraint.mode)}, {"subject", ep.constraint.subject}}}};
    if (ep.constraint.target) header["constraint"]["target"] = *ep.constraint.target;
    out << header.dump() << "\n";
    for (const auto& s : ep.steps) out << step_json(s).dump() << "\n";
    json footer{{"type", "footer"},
                {"outcome", to_string(ep.outcome)},
                {"answer", ep.answer},
                {"steps", ep.steps.size()},
                {"accumulated_info", ep.accumulated_info},
                {"counted_entities", ep.counted_entities},
                {"pagination_pages", ep.pagination_pages},
                {"visited", ep.visited}};
    out << footer.dump() << "\n";
    return out.str();
}

ReplayResult replay_trace(const std::string& jsonl, const ScoreConfig& cfg) {
    ReplayResult r;
    std::istringstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto j = json::parse(line);
        if (j.value("type", "") != "step") continue;
        ++r.steps;
        DomSummary sum;
        const auto& js = j.at("summary");
        sum.total_chars = js.at("total_chars").get<std::size_t>();
        sum.valid_chars = js.at("valid_chars").get<std::size_t>();
        sum.n_para = js.at("n_para").get<std::size_t>();
        sum.n_btn = js.at("n_btn").get<std::size_t>();
        for (const auto& t : js.at("structural_tags")) sum.structural_tags.insert(t.get<std::string>());
        MarkerSet m;
        const auto& jm = j.at("markers");
        m.has_gallery = jm.at("has_gallery").get<bool>();
        m.has_captcha = jm.at("has_captcha").get<bool>();
        m.has_error_page = jm.at("has_error_page").get<bool>();
        m.has_next_page = jm.at("has_next_page").get<bool>();
        const auto b = combine_scores(sum, j.at("relevance_points").get<int>(), m, cfg);
        const auto& sc = j.at("score");
        if (b.phi != sc.at("phi").get<double>() || to_string(b.modality) != sc.at("modality").get<std::string>())
            ++r.mismatches;
    }
    return r;
}

}  // namespace wayfinder
