#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wayfinder/environment.hpp"
#include "wayfinder/reasoner.hpp"
#include "wayfinder/url.hpp"

namespace wftest {

inline std::string data_path(const std::string& rel) { return std::string(WAYFINDER_TEST_DATA) + "/" + rel; }

inline std::string conference_site() { return data_path("fixtures/conference-site/site.json"); }
inline std::string conference_qa() { return data_path("fixtures/conference-site/qa.jsonl"); }
inline std::string conference_script(const std::string& id) {
    return data_path("fixtures/conference-site/scripts/" + id + ".json");
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("wayfinder-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

inline std::string explorer_visit(const std::string& url) {
    return "Thought: follow the link.\nAction: visit\nAction Input: {\"url\": \"" + url + "\"}";
}
inline const char* kExplorerBacktrack = "Thought: dead end.\nAction: backtrack\nAction Input: {}";
inline const char* kExplorerGiveUp = "Thought: nothing left.\nAction: give_up\nAction Input: {}";

inline wayfinder::ScriptedReasoner::Rule rule(wayfinder::Role role, std::string text,
                                              std::optional<std::size_t> step = std::nullopt,
                                              std::map<std::string, std::vector<std::string>> when = {}) {
    wayfinder::ScriptedReasoner::Rule r;
    r.role = role;
    r.step = step;
    r.when = std::move(when);
    r.text = std::move(text);
    return r;
}

inline std::string filter_json(bool useful, const std::string& info = "") {
    nlohmann::json j{{"is_useful", useful}, {"extracted_info", nullptr}};
    if (useful) j["extracted_info"] = info;
    return j.dump();
}

inline std::string sufficiency_json(bool sufficient, const std::string& answer = "") {
    nlohmann::json j{{"is_sufficient", sufficient}, {"final_answer", nullptr}};
    if (sufficient) j["final_answer"] = answer;
    return j.dump();
}

/// Random directed site graph with nodes "https://g.test/n<i>" rooted at n0.
/// Every node is reachable from the root through a random spanning tree;
/// extra edges add cycles and back links.
inline wayfinder::SiteFixture random_site(std::mt19937_64& rng, std::size_t n_nodes, double extra_edge_p) {
    auto url = [](std::size_t i) { return "https://g.test/n" + std::to_string(i); };
    std::vector<std::vector<std::size_t>> adj(n_nodes);
    for (std::size_t i = 1; i < n_nodes; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        adj[pick(rng)].push_back(i);
    }
    std::bernoulli_distribution extra(extra_edge_p);
    for (std::size_t a = 0; a < n_nodes; ++a)
        for (std::size_t b = 0; b < n_nodes; ++b)
            if (a != b && extra(rng) &&
                std::find(adj[a].begin(), adj[a].end(), b) == adj[a].end())
                adj[a].push_back(b);
    // BFS depths.
    std::vector<int> depth(n_nodes, 0);
    std::vector<std::size_t> queue{0};
    depth[0] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q)
        for (auto b : adj[queue[q]])
            if (!depth[b]) {
                depth[b] = depth[queue[q]] + 1;
                queue.push_back(b);
            }
    wayfinder::SiteFixture f;
    f.root = url(0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        wayfinder::SimPage p;
        p.url = url(i);
        p.title = "Node " + std::to_string(i);
        p.body = "Graph node number " + std::to_string(i) + " of the random site.";
        p.depth = depth[i];
        for (auto b : adj[i]) p.links.emplace_back(url(b), "node " + std::to_string(b));
        f.pages.emplace(wayfinder::canonicalize_url(p.url), p);
    }
    return f;
}

}  // namespace wftest
