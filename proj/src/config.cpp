#include "wayfinder/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"

namespace wayfinder {

namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        auto t = text::trim(cur);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

class Section {
public:
    Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    template <typename T>
    void read(const std::string& key, T& into) {
        seen_.insert(key);
        auto v = tree_.get_optional<std::string>(key);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                into = text::trim(*v);
            } else if constexpr (std::is_same_v<T, bool>) {
                const auto s = text::fold_case(text::trim(*v));
                if (s == "true" || s == "1" || s == "yes" || s == "on")
                    into = true;
                else if (s == "false" || s == "0" || s == "no" || s == "off")
                    into = false;
                else
                    throw std::invalid_argument(s);
            } else if constexpr (std::is_floating_point_v<T>) {
                std::size_t used = 0;
                into = std::stod(*v, &used);
                if (text::trim(v->substr(used)) != "") throw std::invalid_argument(*v);
            } else {
                std::size_t used = 0;
                const long long n = std::stoll(*v, &used);
                if (text::trim(v->substr(used)) != "" || n < 0) throw std::invalid_argument(*v);
                into = static_cast<T>(n);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("[" + name_ + "] " + key + ": invalid value \"" + *v + "\"");
        }
    }

    void read_list(const std::string& key, std::vector<std::string>& into) {
        seen_.insert(key);
        if (auto v = tree_.get_optional<std::string>(key)) into = split_list(*v);
    }

    std::optional<std::string> raw(const std::string& key) {
        seen_.insert(key);
        auto v = tree_.get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return text::trim(*v);
    }

    void reject_unknown() const {
        for (const auto& [key, _] : tree_)
            if (!seen_.count(key)) throw ConfigError("[" + name_ + "] unknown key: " + key);
    }

private:
    const pt::ptree& tree_;
    std::string name_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

std::string resolve_script_path(const std::string& spec, const std::string& base_dir) {
    if (base_dir.empty() || spec.rfind("script://", 0) != 0) return spec;
    const std::filesystem::path p(spec.substr(9));
    if (p.is_absolute()) return spec;
    return "script://" + (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

GlobalConfig parse_config(const std::string& ini_text, const std::string& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(ini_text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    GlobalConfig g;
    static const std::set<std::string> known{"score", "fetch", "agent", "bench", "backends", "markers", "eval"};
    for (const auto& [name, _] : root)
        if (!known.count(name)) throw ConfigError("config: unknown section [" + name + "]");
    const pt::ptree empty;
    auto section = [&](const std::string& name) -> const pt::ptree& {
        auto it = root.find(name);
        return it == root.not_found() ? empty : it->second;
    };

    {
        Section s(section("score"), "score");
        auto& c = g.agent.score;
        s.read("tau", c.tau);
        s.read("qual_max", c.qual_max);
        s.read("rel_max", c.rel_max);
        s.read("struct_max", c.struct_max);
        s.read("spec_base", c.spec_base);
        s.read("low_cutoff", c.low_cutoff);
        s.read("high_cutoff", c.high_cutoff);
        s.read("f_len_peak", c.f_len_peak);
        s.read("fmt_per_tag", c.fmt_per_tag);
        s.read("fmt_cap", c.fmt_cap);
        s.read("nav_lo", c.nav_lo);
        s.read("nav_hi", c.nav_hi);
        s.read("f_nav_peak", c.f_nav_peak);
        s.read("dense_points", c.dense_points);
        s.read("p_gallery", c.p_gallery);
        s.read("p_captcha", c.p_captcha);
        s.read("p_error", c.p_error);
        s.reject_unknown();
        c.validate();
    }
    {
        Section s(section("fetch"), "fetch");
        auto& f = g.fetch;
        s.read("timeout_s", f.timeout_s);
        s.read("retries", f.max_retries);
        s.read("per_host_interval_ms", f.per_host_interval_ms);
        std::size_t kb = f.max_body_bytes / 1024;
        s.read("max_body_kb", kb);
        f.max_body_bytes = kb * 1024;
        s.read("user_agent", f.user_agent);
        s.read_list("disallow", f.disallow);
        s.reject_unknown();
        require(f.timeout_s > 0, "[fetch] timeout_s must be positive");
        require(f.max_retries >= 0 && f.max_retries <= 10, "[fetch] retries must lie in [0, 10]");
        require(f.per_host_interval_ms >= 0, "[fetch] per_host_interval_ms must be non-negative");
        require(f.max_body_bytes > 0, "[fetch] max_body_kb must be positive");
    }
    {
        Section s(section("agent"), "agent");
        auto& a = g.agent;
        s.read("step_cap", a.step_cap);
        s.read("links_per_page", a.links_per_page);
        if (auto m = s.raw("modules")) {
            auto t = ModuleToggles::from_label(*m);
            if (!t) throw ConfigError("[agent] modules: expected a subset label such as CSU, got " + *m);
            a.toggles = *t;
        }
        s.read("vlm", a.toggles.vlm_on);
        s.read("stack", a.toggles.stack_on);
        s.read("counter", a.toggles.counter_on);
        s.reject_unknown();
        require(a.step_cap >= 1 && a.step_cap <= 1000, "[agent] step_cap must lie in [1, 1000]");
        require(a.links_per_page >= 1, "[agent] links_per_page must be positive");
    }
    {
        Section s(section("markers"), "markers");
        s.read_list("gallery", g.agent.markers.gallery);
        s.read_list("captcha", g.agent.markers.captcha);
        s.read_list("error", g.agent.markers.error);
        s.read_list("pagination", g.agent.markers.pagination);
        s.reject_unknown();
    }
    {
        Section s(section("bench"), "bench");
        auto& b = g.bench;
        std::size_t easy = 80, medium = 140, hard = 120;
        s.read("quota_easy", easy);
        s.read("quota_medium", medium);
        s.read("quota_hard", hard);
        b.quotas = Quotas::uniform(easy, medium, hard);
        s.read("seed", b.seed);
        s.read("max_depth", b.max_depth);
        s.read("breadth_cap", b.breadth_cap);
        s.read("attempts_per_item", b.attempts_per_item);
        s.read("allow_root_pairs", b.allow_root_pairs);
        s.read("date", b.date);
        s.reject_unknown();
        require(b.max_depth >= 1 && b.max_depth <= kMaxTreeDepth, "[bench] max_depth must lie in [1, 4]");
        require(b.breadth_cap >= 1, "[bench] breadth_cap must be positive");
        require(b.attempts_per_item >= 1, "[bench] attempts_per_item must be positive");
    }
    {
        Section s(section("backends"), "backends");
        auto& b = g.backends;
        s.read("reasoner", b.reasoner);
        b.reasoner = resolve_script_path(b.reasoner, base_dir);
        for (const auto* role : {"explorer", "critic_filter", "critic_sufficiency", "vlm_perceive", "relevance",
                                 "judge", "classifier", "generator", "teacher"}) {
            if (auto v = s.raw(role)) b.per_role[role] = resolve_script_path(*v, base_dir);
        }
        s.read("model", b.model);
        s.read("api_key_env", b.api_key_env);
        s.read("timeout_s", b.timeout_s);
        s.read("prompts_dir", b.prompts_dir);
        if (!b.prompts_dir.empty() && !base_dir.empty() && std::filesystem::path(b.prompts_dir).is_relative())
            b.prompts_dir = (std::filesystem::path(base_dir) / b.prompts_dir).string();
        s.reject_unknown();
        require(b.timeout_s > 0, "[backends] timeout_s must be positive");
    }
    {
        Section s(section("eval"), "eval");
        s.read_list("refusal_phrases", g.refusal.phrases);
        s.reject_unknown();
    }
    return g;
}

GlobalConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

GlobalConfig resolve_config(const std::optional<std::string>& cli_path) {
    if (cli_path) return load_config(*cli_path);
    if (const char* env = std::getenv("WAYFINDER_CONFIG"); env && *env) return load_config(env);
    return {};
}

std::shared_ptr<const PromptLibrary> make_prompt_library(const BackendsConfig& cfg) {
    auto lib = std::make_shared<PromptLibrary>(PromptLibrary::defaults());
    if (!cfg.prompts_dir.empty()) lib->load_dir(cfg.prompts_dir);
    return lib;
}

std::shared_ptr<Reasoner> make_role_reasoner(const BackendsConfig& cfg, const std::string& override_spec,
                                             const std::string& qa_id) {
    BackendContext ctx;
    ctx.prompts = make_prompt_library(cfg);
    ctx.model = cfg.model;
    ctx.api_key_env = cfg.api_key_env;
    ctx.timeout_s = cfg.timeout_s;
    ctx.qa_id = qa_id;
    auto router = std::make_shared<RoutingReasoner>(
        make_reasoner(override_spec.empty() ? cfg.reasoner : override_spec, ctx));
    for (const auto& [name, spec] : cfg.per_role) {
        const auto role = parse_role(name);
        if (role) router->route(*role, make_reasoner(spec, ctx));
    }
    return router;
}

RelevanceScorer make_relevance_scorer(const BackendsConfig& cfg) {
    RelevanceScorer scorer;
    auto it = cfg.per_role.find("relevance");
    if (it == cfg.per_role.end()) return scorer;
    BackendContext ctx;
    ctx.prompts = make_prompt_library(cfg);
    ctx.model = cfg.model;
    ctx.api_key_env = cfg.api_key_env;
    ctx.timeout_s = cfg.timeout_s;
    std::shared_ptr<Reasoner> backend = make_reasoner(it->second, ctx);
    scorer.endpoint = [backend](std::string_view query, std::string_view observation) {
        ReasonerRequest req;
        req.role = Role::relevance;
        req.template_id = "relevance";
        req.variables = {{"query", std::string(query)}, {"observation", std::string(observation)}};
        const auto resp = backend->complete(req);
        const auto j = resp.parsed ? resp.parsed : extract_json_object(resp.text);
        if (!j || !j->contains("score") || !(*j)["score"].is_number_integer())
            throw BackendError("relevance backend returned no integer score");
        return RelevanceVerdict{(*j)["score"].get<int>(), j->value("reason", "")};
    };
    return scorer;
}

}  // namespace wayfinder
