#include "wayfinder/benchgen.hpp"

#include <algorithm>
#include <ctime>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "wayfinder/errors.hpp"
#include "wayfinder/page_model.hpp"
#include "wayfinder/text.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

constexpr TaskKind kKinds[] = {TaskKind::single_source, TaskKind::multi_source};
constexpr Difficulty kDifficulties[] = {Difficulty::easy, Difficulty::medium, Difficulty::hard};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(seed);
    for (auto p : parts) h = splitmix64(h ^ p);
    return h;
}

std::string first_heading(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        line = text::trim(line);
        if (!line.empty()) return line;
    }
    return {};
}

template <typename Validate>
auto ask_twice(Reasoner& r, ReasonerRequest req, Validate validate, const char* what) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        const auto resp = r.complete(req);
        auto j = resp.parsed ? resp.parsed : extract_json_object(resp.text);
        if (j) {
            if (auto v = validate(*j)) return *v;
        }
    }
    throw BackendError(std::string(what) + " output unusable after retry");
}

Language detect_language(const std::string& s) {
    std::size_t cjk = 0;
    std::size_t letters = 0;
    for (char32_t c : text::decode_utf8(s)) {
        if (text::is_cjk(c))
            ++cjk;
        else if (text::is_letter(c))
            ++letters;
    }
    return cjk > letters / 2 && cjk > 0 ? Language::zh : Language::en;
}

std::string cell_name(const CellKey& k) {
    return std::string(to_string(k.first)) + "/" + std::string(to_string(k.second));
}

}  // namespace

std::string_view to_string(TaskKind k) { return k == TaskKind::single_source ? "single_source" : "multi_source"; }

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "easy";
}

std::string_view to_string(Domain d) {
    switch (d) {
        case Domain::education: return "education";
        case Domain::conference: return "conference";
        case Domain::organization: return "organization";
        case Domain::game: return "game";
    }
    return "organization";
}

std::string_view to_string(Language l) { return l == Language::en ? "en" : "zh"; }

TaskKind parse_task_kind(std::string_view s) {
    if (s == "single_source" || s == "single") return TaskKind::single_source;
    if (s == "multi_source" || s == "multi") return TaskKind::multi_source;
    throw ParseError("unknown task kind: " + std::string(s));
}

Difficulty parse_difficulty(std::string_view s) {
    for (auto d : kDifficulties)
        if (to_string(d) == s) return d;
    throw ParseError("unknown difficulty: " + std::string(s));
}

Domain parse_domain(std::string_view s) {
    for (auto d : {Domain::education, Domain::conference, Domain::organization, Domain::game})
        if (to_string(d) == s) return d;
    throw ParseError("unknown domain: " + std::string(s));
}

Language parse_language(std::string_view s) {
    if (s == "en") return Language::en;
    if (s == "zh") return Language::zh;
    throw ParseError("unknown language: " + std::string(s));
}

UrlTree build_url_tree(Environment& env, std::string_view root, int max_depth, std::size_t breadth_cap) {
    UrlTree tree;
    tree.root = canonicalize_url(root);
    const auto host = url_host(root);

    const auto root_doc = env.fetch(root);
    if (root_doc.transport_error || root_doc.status >= 400)
        throw EnvUnavailable("cannot build tree, root " + std::string(root) + " returned " +
                             std::to_string(root_doc.status));

    tree.nodes[tree.root] = TreeNode{tree.root, 1, std::nullopt, {}, 200, "", ""};
    tree.order.push_back(tree.root);
    std::deque<std::string> queue{tree.root};
    bool first = true;
    while (!queue.empty()) {
        const auto cur = queue.front();
        queue.pop_front();
        const auto doc = first ? root_doc : env.fetch(cur);
        first = false;
        auto& node = tree.nodes.at(cur);
        node.status = doc.status;
        node.content = summarize(doc).extracted_text;
        node.title = first_heading(node.content);
        if (node.depth >= max_depth || doc.status >= 400) continue;
        const int child_depth = node.depth + 1;
        for (const auto& link : extract_links(doc)) {
            if (node.children.size() >= breadth_cap) break;
            if (url_host(link.href) != host) continue;
            const auto key = canonicalize_url(link.href);
            if (tree.nodes.count(key)) continue;
            tree.nodes[key] = TreeNode{key, child_depth, cur, {}, 0, "", ""};
            tree.nodes.at(cur).children.push_back(key);
            tree.order.push_back(key);
            queue.push_back(key);
        }
    }
    return tree;
}

Difficulty classify_difficulty(TaskKind kind, const std::vector<int>& depths) {
    if (kind == TaskKind::single_source) {
        if (depths.size() != 1) throw OutOfRangeDepth("single-source needs exactly one depth");
        switch (depths[0]) {
            case 2: return Difficulty::easy;
            case 3: return Difficulty::medium;
            case 4: return Difficulty::hard;
            default: throw OutOfRangeDepth("single-source depth " + std::to_string(depths[0]) + " outside [2,4]");
        }
    }
    if (depths.size() != 2) throw OutOfRangeDepth("multi-source needs exactly two depths");
    for (int d : depths)
        if (d < 1 || d > kMaxTreeDepth) throw OutOfRangeDepth("multi-source depth " + std::to_string(d) + " outside [1,4]");
    const int sum = depths[0] + depths[1];
    if (sum < 4) return Difficulty::easy;
    if (sum < 6) return Difficulty::medium;
    return Difficulty::hard;
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw PreconditionError("uniform_index over an empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

std::vector<TargetSelection> enumerate_targets(const UrlTree& tree, TaskKind kind, Difficulty difficulty,
                                               bool allow_root_pairs) {
    std::vector<const TreeNode*> usable;
    for (const auto& url : tree.order) {
        const auto& n = tree.at(url);
        if (n.status > 0 && n.status < 400) usable.push_back(&n);
    }
    std::vector<TargetSelection> out;
    if (kind == TaskKind::single_source) {
        for (const auto* n : usable) {
            if (n->depth < 2) continue;
            if (classify_difficulty(kind, {n->depth}) == difficulty)
                out.push_back({kind, difficulty, {n->url}, {n->depth}});
        }
        return out;
    }
    for (std::size_t i = 0; i < usable.size(); ++i) {
        for (std::size_t j = i + 1; j < usable.size(); ++j) {
            const int a = usable[i]->depth;
            const int b = usable[j]->depth;
            if (a == 1 && b == 1 && !allow_root_pairs) continue;
            if (classify_difficulty(kind, {a, b}) == difficulty)
                out.push_back({kind, difficulty, {usable[i]->url, usable[j]->url}, {a, b}});
        }
    }
    return out;
}

TargetSelection sample_targets(const UrlTree& tree, TaskKind kind, Difficulty difficulty, std::uint64_t seed,
                               bool allow_root_pairs) {
    const auto support = enumerate_targets(tree, kind, difficulty, allow_root_pairs);
    if (support.empty())
        throw Unsatisfiable("no " + std::string(to_string(kind)) + " " + std::string(to_string(difficulty)) +
                            " targets in tree rooted at " + tree.root);
    std::mt19937_64 rng(seed);
    return support[uniform_index(rng, support.size())];
}

nlohmann::json to_json(const QAItem& q) {
    return json{{"id", q.id},
                {"question", q.question},
                {"answer", q.answer},
                {"kind", to_string(q.kind)},
                {"difficulty", to_string(q.difficulty)},
                {"domain", to_string(q.domain)},
                {"language", to_string(q.language)},
                {"source_urls", q.source_urls},
                {"source_depths", q.source_depths},
                {"root_url", q.root_url},
                {"teacher_reason", q.teacher_reason}};
}

QAItem qa_item_from_json(const nlohmann::json& j) {
    try {
        QAItem q;
        q.id = j.at("id").get<std::string>();
        q.question = j.at("question").get<std::string>();
        q.answer = j.at("answer").get<std::string>();
        q.kind = parse_task_kind(j.at("kind").get<std::string>());
        q.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
        q.domain = parse_domain(j.value("domain", "organization"));
        q.language = parse_language(j.value("language", "en"));
        q.source_urls = j.value("source_urls", std::vector<std::string>{});
        q.source_depths = j.value("source_depths", std::vector<int>{});
        q.root_url = j.value("root_url", "");
        q.teacher_reason = j.value("teacher_reason", "");
        return q;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad benchmark item: ") + e.what());
    }
}

void validate_item(const QAItem& q) {
    const std::size_t want = q.kind == TaskKind::single_source ? 1 : 2;
    if (q.source_urls.size() != want || q.source_depths.size() != want)
        throw InvariantViolation(q.id + ": wrong number of sources for " + std::string(to_string(q.kind)));
    if (q.kind == TaskKind::multi_source && q.source_urls[0] == q.source_urls[1])
        throw InvariantViolation(q.id + ": multi-source item repeats one page");
    if (classify_difficulty(q.kind, q.source_depths) != q.difficulty)
        throw InvariantViolation(q.id + ": difficulty label disagrees with source depths");
    if (text::trim(q.question).empty() || text::trim(q.answer).empty())
        throw InvariantViolation(q.id + ": empty question or answer");
}

VetResult synthesize_and_vet(const UrlTree& tree, const TargetSelection& sel, Reasoner& generator, Reasoner& teacher,
                             Domain domain, Language language, const std::string& id) {
    ReasonerRequest gen;
    gen.role = Role::generator;
    gen.template_id = sel.kind == TaskKind::single_source ? "qa_single" : "qa_multi";
    gen.variables = {{"kind", std::string(to_string(sel.kind))},
                     {"difficulty", std::string(to_string(sel.difficulty))},
                     {"domain", std::string(to_string(domain))},
                     {"language", std::string(to_string(language))}};
    std::string sources;
    json sources_json = json::array();
    for (std::size_t i = 0; i < sel.urls.size(); ++i) {
        const auto& n = tree.at(sel.urls[i]);
        if (sel.kind == TaskKind::single_source) {
            gen.variables["url"] = n.url;
            gen.variables["title"] = n.title;
            gen.variables["content"] = n.content;
        } else {
            const auto k = std::to_string(i + 1);
            gen.variables["url_" + k] = n.url;
            gen.variables["title_" + k] = n.title;
            gen.variables["content_" + k] = n.content;
        }
        sources += "Source " + std::to_string(i + 1) + " (" + n.url + "):\n" + n.content + "\n\n";
        sources_json.push_back(json{{"url", n.url}, {"content", n.content}});
    }

    const auto candidate = ask_twice(
        generator, gen,
        [](const json& j) -> std::optional<std::pair<std::string, std::string>> {
            if (!j.contains("question") || !j.contains("answer") || !j["question"].is_string() ||
                !j["answer"].is_string())
                return std::nullopt;
            return std::make_pair(j["question"].get<std::string>(), j["answer"].get<std::string>());
        },
        "generator");
    if (text::trim(candidate.first).empty() || text::trim(candidate.second).empty())
        return {std::nullopt, "generator produced an empty candidate"};

    ReasonerRequest vet;
    vet.role = Role::teacher;
    vet.template_id = "teacher";
    vet.variables = {{"question", candidate.first},
                     {"answer", candidate.second},
                     {"sources", sources},
                     {"sources_json", sources_json.dump()}};
    struct Verdict {
        bool valid;
        std::string question, answer, reason;
    };
    const auto verdict = ask_twice(
        teacher, vet,
        [](const json& j) -> std::optional<Verdict> {
            if (!j.contains("is_valid") || !j["is_valid"].is_boolean()) return std::nullopt;
            Verdict v{j["is_valid"].get<bool>(), "", "", ""};
            if (j.contains("reason") && j["reason"].is_string()) v.reason = j["reason"].get<std::string>();
            if (!v.valid) return v;
            if (!j.contains("refined_question") || !j["refined_question"].is_string() ||
                !j.contains("refined_answer") || !j["refined_answer"].is_string())
                return std::nullopt;
            v.question = j["refined_question"].get<std::string>();
            v.answer = j["refined_answer"].get<std::string>();
            if (text::trim(v.question).empty() || text::trim(v.answer).empty()) return std::nullopt;
            return v;
        },
        "teacher");
    if (!verdict.valid) return {std::nullopt, verdict.reason};

    QAItem item;
    item.id = id;
    item.question = text::trim(verdict.question);
    item.answer = text::trim(verdict.answer);
    item.kind = sel.kind;
    item.difficulty = classify_difficulty(sel.kind, sel.depths);
    item.domain = domain;
    item.language = language;
    item.source_urls = sel.urls;
    item.source_depths = sel.depths;
    item.root_url = tree.root;
    item.teacher_reason = verdict.reason;
    return {item, verdict.reason};
}

Quotas Quotas::defaults() { return uniform(80, 140, 120); }

Quotas Quotas::uniform(std::size_t easy, std::size_t medium, std::size_t hard) {
    Quotas q;
    for (auto k : kKinds) {
        q.per_cell[{k, Difficulty::easy}] = easy;
        q.per_cell[{k, Difficulty::medium}] = medium;
        q.per_cell[{k, Difficulty::hard}] = hard;
    }
    return q;
}

std::size_t Quotas::total() const {
    std::size_t t = 0;
    for (const auto& [_, n] : per_cell) t += n;
    return t;
}

Benchmark assemble(const Quotas& quotas, const std::vector<QAItem>& candidates) {
    Benchmark b;
    for (const auto& [cell, _] : quotas.per_cell) b.counts[cell] = 0;
    for (const auto& item : candidates) {
        validate_item(item);
        const CellKey cell{item.kind, item.difficulty};
        const auto it = quotas.per_cell.find(cell);
        const std::size_t quota = it == quotas.per_cell.end() ? 0 : it->second;
        if (b.counts[cell] >= quota) {
            ++b.overflow;
            continue;
        }
        ++b.counts[cell];
        b.items.push_back(item);
    }
    for (const auto& [cell, quota] : quotas.per_cell) {
        const auto have = b.counts[cell];
        if (have < quota) b.shortfall[cell] = quota - have;
    }
    return b;
}

std::vector<RootSpec> load_roots(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open roots file " + path);
    std::vector<RootSpec> roots;
    std::string line;
    while (std::getline(in, line)) {
        line = text::trim(line);
        if (line.empty() || line.front() == '#') continue;
        std::istringstream fields(line);
        RootSpec r;
        std::string domain, language;
        fields >> r.url >> domain >> language;
        if (!is_absolute_url(r.url)) throw ParseError("roots file: not an absolute url: " + r.url);
        if (!domain.empty()) r.domain = parse_domain(domain);
        if (!language.empty()) r.language = parse_language(language);
        roots.push_back(std::move(r));
    }
    return roots;
}

GenerationResult generate_benchmark(Environment& env, const std::vector<RootSpec>& roots, const BenchConfig& cfg,
                                    Reasoner& generator, Reasoner& teacher) {
    GenerationResult result;
    std::vector<std::pair<RootSpec, UrlTree>> trees;
    for (const auto& r : roots) {
        trees.emplace_back(r, build_url_tree(env, r.url, cfg.max_depth, cfg.breadth_cap));
        result.roots.push_back(trees.back().second.root);
    }

    std::vector<QAItem> candidates;
    std::set<std::string> seen_questions;
    for (const auto& [cell, quota] : cfg.quotas.per_cell) {
        const auto [kind, difficulty] = cell;
        std::size_t produced = 0;
        const std::size_t attempts = quota * cfg.attempts_per_item;
        for (std::size_t attempt = 0; attempt < attempts && produced < quota; ++attempt) {
            const auto root_index = attempt % trees.size();
            const auto& [spec, tree] = trees[root_index];
            const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(kind),
                                                     static_cast<std::uint64_t>(difficulty), attempt});
            TargetSelection sel;
            try {
                sel = sample_targets(tree, kind, difficulty, seed, cfg.allow_root_pairs);
            } catch (const Unsatisfiable& e) {
                result.rejections.push_back(cell_name(cell) + ": " + e.what());
                continue;
            }
            std::string content;
            for (const auto& u : sel.urls) content += tree.at(u).content;
            const auto language = spec.language.value_or(detect_language(content));
            char id[64];
            std::snprintf(id, sizeof id, "%s-%s-%04zu", kind == TaskKind::single_source ? "ss" : "ms",
                          std::string(to_string(difficulty)).c_str(), produced + 1);
            auto vetted = synthesize_and_vet(tree, sel, generator, teacher, spec.domain, language, id);
            if (!vetted.item) {
                std::string where;
                for (const auto& u : sel.urls) where += (where.empty() ? "" : " + ") + u;
                result.rejections.push_back(cell_name(cell) + " " + where + ": " + vetted.reason);
                continue;
            }
            if (!seen_questions.insert(vetted.item->question).second) continue;
            candidates.push_back(std::move(*vetted.item));
            ++produced;
        }
    }
    result.benchmark = assemble(cfg.quotas, candidates);
    return result;
}

std::string today_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

std::string benchmark_to_jsonl(const GenerationResult& result, const BenchConfig& cfg) {
    json quotas = json::object();
    json shortfall = json::object();
    json counts = json::object();
    for (const auto& [cell, n] : cfg.quotas.per_cell) quotas[cell_name(cell)] = n;
    for (const auto& [cell, n] : result.benchmark.shortfall) shortfall[cell_name(cell)] = n;
    for (const auto& [cell, n] : result.benchmark.counts) counts[cell_name(cell)] = n;
    json manifest{{"record", "manifest"},
                  {"date", cfg.date.empty() ? today_utc() : cfg.date},
                  {"seed", cfg.seed},
                  {"max_depth", cfg.max_depth},
                  {"breadth_cap", cfg.breadth_cap},
                  {"allow_root_pairs", cfg.allow_root_pairs},
                  {"roots", result.roots},
                  {"quotas", quotas},
                  {"counts", counts},
                  {"shortfall", shortfall},
                  {"overflow", result.benchmark.overflow},
                  {"rejected", result.rejections.size()}};
    std::string out = manifest.dump() + "\n";
    for (const auto& item : result.benchmark.items) out += to_json(item).dump() + "\n";
    return out;
}

std::vector<QAItem> read_benchmark_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open benchmark " + path);
    std::vector<QAItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (j.value("record", "") == "manifest") continue;
        items.push_back(qa_item_from_json(j));
    }
    return items;
}

}  // namespace wayfinder
