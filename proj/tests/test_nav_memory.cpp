#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "wayfinder/errors.hpp"
#include "wayfinder/nav_memory.hpp"

using namespace wayfinder;

namespace {

std::vector<LinkRef> links(std::initializer_list<const char*> urls) {
    std::vector<LinkRef> out;
    std::size_t i = 0;
    for (const char* u : urls) out.push_back({u, u, i++});
    return out;
}

}  // namespace

TEST(NavState, PushRoot) {
    NavState s;
    s.push("https://a.test/", {});
    EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(s.visited(), std::set<std::string>{"https://a.test"});
    EXPECT_EQ(s.frames()[0].depth, 0u);
}

TEST(NavState, PushTwiceThrows) {
    NavState s;
    s.push("https://a.test/x", {});
    EXPECT_THROW(s.push("https://A.test/x#frag", {}), AlreadyVisited);
}

TEST(NavState, StepCapBoundary) {
    NavState s(2);
    s.push("https://a.test/1", {});
    s.push("https://a.test/2", {});
    EXPECT_THROW(s.push("https://a.test/3", {}), StepCapExceeded);
    EXPECT_THROW(s.pop(), StepCapExceeded);
}

TEST(NavState, PopKeepsVisited) {
    NavState s;
    s.push("https://a.test/a", {});
    s.push("https://a.test/b", {});
    EXPECT_EQ(s.pop(), "https://a.test/b");
    EXPECT_EQ(s.top()->url, "https://a.test/a");
    EXPECT_TRUE(s.is_visited("https://a.test/b"));
    EXPECT_EQ(s.visited().size(), 2u);
}

TEST(NavState, PopEmptyThrows) {
    NavState s;
    EXPECT_THROW(s.pop(), EmptyStack);
}

TEST(NavState, BreadcrumbTraces) {
    NavState s;
    EXPECT_TRUE(s.breadcrumb().empty());
    s.push("https://a.test/a", {});
    s.push("https://a.test/b", {});
    EXPECT_EQ(s.breadcrumb(), (std::vector<std::string>{"https://a.test/a", "https://a.test/b"}));
    s.push("https://a.test/c", {});
    s.pop();
    EXPECT_EQ(s.breadcrumb(), (std::vector<std::string>{"https://a.test/a", "https://a.test/b"}));
    s.pop();
    EXPECT_EQ(s.breadcrumb(), (std::vector<std::string>{"https://a.test/a"}));
}

TEST(NextUnexplored, AllVisitedIsAbsent) {
    NavState s;
    s.push("https://a.test/r", links({"https://a.test/r"}));
    EXPECT_FALSE(s.next_unexplored().has_value());
}

TEST(NextUnexplored, FreshFrameReturnsFirst) {
    NavState s;
    s.push("https://a.test/r", links({"https://a.test/x", "https://a.test/y"}));
    const auto n = s.next_unexplored();
    ASSERT_TRUE(n);
    EXPECT_EQ(n->first, 0u);
    EXPECT_EQ(n->second.href, "https://a.test/x");
    EXPECT_EQ(s.frames()[0].cursor, 1u);
}

TEST(NextUnexplored, FallsBackToParent) {
    NavState s;
    s.push("https://a.test/r", links({"https://a.test/a", "https://a.test/b"}));
    s.next_unexplored();
    s.push("https://a.test/a", links({"https://a.test/r"}));
    const auto n = s.next_unexplored();
    ASSERT_TRUE(n);
    EXPECT_EQ(n->first, 0u);
    EXPECT_EQ(n->second.href, "https://a.test/b");
}

TEST(Viability, RuleTable) {
    RawDocument ok{"https://a.test/", 200, "", ContentKind::html, false, std::nullopt};
    RawDocument missing = ok;
    missing.status = 404;
    EXPECT_EQ(check_viability(missing, {}, 40, 1), (Viability{Verdict::dead, ViabilityReason::http_error}));
    EXPECT_EQ(check_viability(ok, {}, 40, 1), (Viability{Verdict::viable, ViabilityReason::ok}));
    EXPECT_EQ(check_viability(ok, {}, 0, 1), (Viability{Verdict::dead, ViabilityReason::irrelevant}));
    EXPECT_EQ(check_viability(ok, {}, 0, 0).verdict, Verdict::viable);
    MarkerSet captcha;
    captcha.has_captcha = true;
    EXPECT_EQ(check_viability(ok, captcha, 40, 2).reason, ViabilityReason::marker_blocked);
}

TEST(NavProperties, LifoLaw) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        NavState s(1000);
        int next = 0;
        for (int i = 0; i < static_cast<int>(rng() % 8); ++i)
            s.push("https://l.test/" + std::to_string(next++), links({"https://l.test/z"}));
        const auto frames = s.frames();
        const auto u = "https://l.test/" + std::to_string(next++);
        s.push(u, {});
        s.pop();
        EXPECT_EQ(s.frames(), frames);
        EXPECT_TRUE(s.is_visited(u));
    }
}

TEST(NavProperties, NeverPushedTwiceAndBreadcrumbMatchesDepth) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        NavState s(10000);
        std::multiset<std::string> pushed;
        for (int op = 0; op < 60; ++op) {
            const auto u = "https://r.test/" + std::to_string(rng() % 15);
            if (rng() % 3 == 0 && !s.empty()) {
                s.pop();
            } else if (!s.is_visited(u)) {
                s.push(u, {});
                pushed.insert(canonicalize_url(u));
            } else {
                EXPECT_THROW(s.push(u, {}), AlreadyVisited);
            }
            if (!s.empty()) EXPECT_EQ(s.breadcrumb().size(), s.top()->depth + 1);
            for (std::size_t i = 0; i < s.frames().size(); ++i) EXPECT_EQ(s.frames()[i].depth, i);
            for (const auto& f : s.frames()) EXPECT_TRUE(s.is_visited(f.url));
        }
        for (const auto& u : pushed) EXPECT_EQ(pushed.count(u), 1u);
    }
}

TEST(NavProperties, DfsDriverVisitsEachNodeOnce) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng() % 30;
        const auto site = wftest::random_site(rng, n, 0.1);
        NavState s(10000);
        std::map<std::string, int> fetched;
        auto links_of = [&](const std::string& u) {
            std::vector<LinkRef> out;
            for (const auto& [href, text] : site.find(u)->links) out.push_back({href, text, out.size()});
            return out;
        };
        s.push(site.root, links_of(site.root));
        fetched[canonicalize_url(site.root)]++;
        std::size_t steps = 1;
        while (auto next = s.next_unexplored()) {
            while (s.size() > next->first + 1) {
                s.pop();
                ++steps;
            }
            s.push(next->second.href, links_of(next->second.href));
            fetched[canonicalize_url(next->second.href)]++;
            ++steps;
        }
        EXPECT_EQ(fetched.size(), n);
        for (const auto& [u, c] : fetched) EXPECT_EQ(c, 1) << u;
        EXPECT_LE(steps, 2 * n);
    }
}
