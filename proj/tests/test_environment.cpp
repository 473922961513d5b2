#include <gtest/gtest.h>

#include <deque>
#include <thread>

#include <httplib.h>

#include "support.hpp"
#include "wayfinder/errors.hpp"

using namespace wayfinder;
using nlohmann::json;

namespace {

json one_page(const std::string& root) {
    return json{{"root", root}, {"pages", json::array({{{"url", root}, {"title", "Only"}, {"body", "hello"}}})}};
}

// Scripted transport: pops queued responses, records request urls.
class FakeTransport : public HttpTransport {
public:
    std::deque<std::function<HttpResponse()>> queue;
    std::vector<std::string> requested;
    std::mutex mu;

    HttpResponse get(const std::string& url, const FetchPolicy&) override {
        std::function<HttpResponse()> next;
        {
            std::lock_guard lock(mu);
            requested.push_back(url);
            if (queue.empty()) return {200, "<p>default</p>", "text/html", std::nullopt, false};
            next = queue.front();
            queue.pop_front();
        }
        return next();
    }
};

HttpResponse ok(std::string body, std::string type = "text/html") {
    return {200, std::move(body), std::move(type), std::nullopt, false};
}

}  // namespace

TEST(Fixture, MinimalOnePage) {
    const auto f = parse_fixture(one_page("https://one.test/"));
    EXPECT_EQ(f.pages.size(), 1u);
    EXPECT_NE(f.find("https://one.test"), nullptr);
}

TEST(Fixture, UndeclaredLinkRejected) {
    auto doc = one_page("https://one.test/");
    doc["pages"][0]["links"] = json::array({json::array({"https://one.test/missing", "gone"})});
    try {
        parse_fixture(doc);
        FAIL() << "expected InvariantViolation";
    } catch (const InvariantViolation& e) {
        EXPECT_NE(std::string(e.what()).find("https://one.test/missing"), std::string::npos);
    }
}

TEST(Fixture, ExternalLinksAllowed) {
    auto doc = one_page("https://one.test/");
    doc["pages"][0]["links"] = json::array({json::array({"https://elsewhere.test/x", "out"})});
    EXPECT_NO_THROW(parse_fixture(doc));
}

TEST(Fixture, MalformedInputs) {
    EXPECT_THROW(parse_fixture(json::array()), ParseError);
    EXPECT_THROW(parse_fixture(json{{"pages", json::array()}}), ParseError);
    auto bad_status = one_page("https://one.test/");
    bad_status["pages"][0]["status"] = 700;
    EXPECT_THROW(parse_fixture(bad_status), InvariantViolation);
    auto bad_depth = one_page("https://one.test/");
    bad_depth["pages"][0]["depth"] = 2;
    EXPECT_THROW(parse_fixture(bad_depth), InvariantViolation);
    EXPECT_THROW(load_fixture("/nonexistent/site.json"), ParseError);
}

TEST(Fixture, ConferenceSiteShape) {
    const auto f = load_fixture(wftest::conference_site());
    EXPECT_EQ(f.pages.size(), 12u);
    int errors = 0, max_depth = 0;
    for (const auto& [_, p] : f.pages) {
        errors += p.status >= 400;
        max_depth = std::max(max_depth, p.depth);
    }
    EXPECT_EQ(errors, 1);
    EXPECT_EQ(max_depth, 4);

    // Independent BFS over the declared links.
    std::map<std::string, int> dist{{canonicalize_url(f.root), 1}};
    std::vector<std::string> queue{canonicalize_url(f.root)};
    bool cycle = false;
    for (std::size_t i = 0; i < queue.size(); ++i)
        for (const auto& [href, _] : f.pages.at(queue[i]).links) {
            const auto t = canonicalize_url(href);
            if (dist.count(t)) {
                cycle = true;
                continue;
            }
            dist[t] = dist[queue[i]] + 1;
            queue.push_back(t);
        }
    EXPECT_TRUE(cycle);
    for (const auto& [key, p] : f.pages) EXPECT_EQ(p.depth, dist.at(key)) << key;

    // Pagination chain of three pages.
    SimEnvironment env(std::make_shared<const SiteFixture>(f));
    std::string at = "https://webconf.example.org/papers.html";
    int chain = 1;
    for (;;) {
        const auto m = detect_markers(env.fetch(at));
        if (!m.has_next_page) break;
        at = m.next_page_link->href;
        ++chain;
    }
    EXPECT_EQ(chain, 3);
}

TEST(Fixture, RoundTrip) {
    const auto f = load_fixture(wftest::conference_site());
    EXPECT_EQ(parse_fixture(fixture_to_json(f)), f);
}

TEST(FetchSim, RootUnknownAndVisual) {
    const auto f = load_fixture(wftest::conference_site());
    const auto root = fetch_sim(f, f.root);
    EXPECT_EQ(root.status, 200);
    EXPECT_EQ(root.content_kind, ContentKind::plain_text);
    EXPECT_NE(root.body.find("WebNav 2025"), std::string::npos);
    EXPECT_EQ(fetch_sim(f, "https://webconf.example.org/nope.html").status, 404);
    EXPECT_TRUE(fetch_sim(f, "https://webconf.example.org/nope.html").body.empty());

    const auto awards = fetch_sim(f, "https://webconf.example.org/awards.html");
    EXPECT_EQ(awards.body.find("Stacks All the Way Down"), std::string::npos);
    SimEnvironment env(std::make_shared<const SiteFixture>(f));
    EXPECT_NE(env.visual_text("https://webconf.example.org/awards.html")->find("Stacks All the Way Down"),
              std::string::npos);
    EXPECT_EQ(fetch_sim(f, f.root), fetch_sim(f, f.root));
}

TEST(LiveFetch, NonHttpSchemeRejected) {
    LiveFetcher f({}, std::make_shared<FakeTransport>(), std::make_shared<FakeClock>());
    EXPECT_THROW(f.fetch("ftp://x.test/file"), PreconditionError);
    EXPECT_THROW(f.fetch("not a url"), PreconditionError);
}

TEST(LiveFetch, PerHostIntervalWithFakeClock) {
    auto clock = std::make_shared<FakeClock>(1000);
    auto transport = std::make_shared<FakeTransport>();
    std::vector<std::int64_t> at;
    for (int i = 0; i < 3; ++i)
        transport->queue.push_back([&] {
            at.push_back(clock->now_ms());
            return ok("<p>x</p>");
        });
    FetchPolicy p;
    p.per_host_interval_ms = 500;
    LiveFetcher f(p, transport, clock);
    f.fetch("https://h.test/a");
    f.fetch("https://h.test/b");
    f.fetch("https://other.test/c");
    ASSERT_EQ(at.size(), 3u);
    EXPECT_GE(at[1] - at[0], 500);
    EXPECT_EQ(at[2], at[1]);  // other host is not delayed
}

TEST(LiveFetch, ConcurrentCallersRespectInterval) {
    auto clock = std::make_shared<FakeClock>(0);
    HostScheduler sched(clock, 250);
    std::vector<std::int64_t> slots(16);
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < slots.size(); ++i) pool.emplace_back([&, i] { slots[i] = sched.acquire("h.test"); });
    for (auto& t : pool) t.join();
    std::sort(slots.begin(), slots.end());
    for (std::size_t i = 1; i < slots.size(); ++i) EXPECT_GE(slots[i] - slots[i - 1], 250);
}

TEST(LiveFetch, BodyTruncatedAtUtf8Boundary) {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back([] { return ok(std::string(9, 'a') + "é", "text/plain"); });
    FetchPolicy p;
    p.max_body_bytes = 10;
    p.per_host_interval_ms = 0;
    LiveFetcher f(p, transport, std::make_shared<FakeClock>());
    const auto d = f.fetch("https://h.test/");
    EXPECT_TRUE(d.truncated);
    EXPECT_EQ(d.body, std::string(9, 'a'));
    EXPECT_EQ(d.content_kind, ContentKind::plain_text);
}

TEST(LiveFetch, RetriesServerErrors) {
    auto transport = std::make_shared<FakeTransport>();
    transport->queue.push_back([] { return HttpResponse{503, "", "", std::nullopt, false}; });
    transport->queue.push_back([]() -> HttpResponse { throw TransportError("reset"); });
    transport->queue.push_back([] { return ok("<p>fine</p>"); });
    FetchPolicy p;
    p.per_host_interval_ms = 0;
    LiveFetcher f(p, transport, std::make_shared<FakeClock>());
    EXPECT_EQ(f.fetch("https://h.test/").status, 200);
    EXPECT_EQ(transport->requested.size(), 3u);
}

TEST(LiveFetch, RedirectsFollowedThenCapped) {
    auto transport = std::make_shared<FakeTransport>();
    for (int i = 0; i < 2; ++i)
        transport->queue.push_back(
            [i] { return HttpResponse{302, "", "", "/hop" + std::to_string(i + 1), false}; });
    transport->queue.push_back([] { return ok("<p>end</p>"); });
    FetchPolicy p;
    p.per_host_interval_ms = 0;
    LiveFetcher f(p, transport, std::make_shared<FakeClock>());
    EXPECT_EQ(f.fetch("https://h.test/start").url, "https://h.test/hop2");

    auto loop = std::make_shared<FakeTransport>();
    for (int i = 0; i < 10; ++i)
        loop->queue.push_back([] { return HttpResponse{301, "", "", std::string("/again"), false}; });
    LiveFetcher g(p, loop, std::make_shared<FakeClock>());
    EXPECT_THROW(g.fetch("https://h.test/"), TooManyRedirects);
    auto loop2 = std::make_shared<FakeTransport>();
    for (int i = 0; i < 10; ++i)
        loop2->queue.push_back([] { return HttpResponse{301, "", "", std::string("/again"), false}; });
    LiveEnvironment env(std::make_shared<LiveFetcher>(p, loop2, std::make_shared<FakeClock>()));
    const auto d = env.fetch("https://h.test/");
    EXPECT_EQ(d.status, 508);
    EXPECT_TRUE(d.transport_error);
}

TEST(LiveFetch, DisallowListAndSyntheticStatuses) {
    FetchPolicy p;
    p.per_host_interval_ms = 0;
    p.disallow = {"https://h.test/private"};
    auto transport = std::make_shared<FakeTransport>();
    LiveFetcher f(p, transport, std::make_shared<FakeClock>());
    EXPECT_THROW(f.fetch("https://h.test/private/x"), Disallowed);
    EXPECT_TRUE(transport->requested.empty());

    auto timeouts = std::make_shared<FakeTransport>();
    for (int i = 0; i < 3; ++i) timeouts->queue.push_back([]() -> HttpResponse { throw Timeout("slow"); });
    LiveEnvironment env(std::make_shared<LiveFetcher>(p, timeouts, std::make_shared<FakeClock>()));
    EXPECT_EQ(env.fetch("https://h.test/").status, 504);
    LiveEnvironment denied(std::make_shared<LiveFetcher>(p, transport, std::make_shared<FakeClock>()));
    EXPECT_EQ(denied.fetch("https://h.test/private").status, 403);
}

TEST(LiveFetch, HttplibTransportAgainstLocalServer) {
    httplib::Server server;
    server.Get("/page", [](const httplib::Request& req, httplib::Response& res) {
        res.set_content("<html><body><p>" + req.get_header_value("User-Agent") + "</p></body></html>", "text/html");
    });
    server.Get("/big", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(std::string(200000, 'x'), "text/plain");
    });
    server.Get("/moved", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/page"); });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    FetchPolicy p;
    p.per_host_interval_ms = 0;
    p.user_agent = "wayfinder-test";
    p.max_body_bytes = 1024;
    LiveFetcher f(p, std::make_shared<HttplibTransport>(), std::make_shared<SystemClock>());
    const auto page = f.fetch(base + "/moved");
    EXPECT_EQ(page.status, 200);
    EXPECT_EQ(page.url, base + "/page");
    EXPECT_NE(page.body.find("wayfinder-test"), std::string::npos);
    EXPECT_EQ(page.content_kind, ContentKind::html);
    const auto big = f.fetch(base + "/big");
    EXPECT_TRUE(big.truncated);
    EXPECT_LE(big.body.size(), 1024u);
    EXPECT_EQ(f.fetch(base + "/absent").status, 404);

    server.stop();
    t.join();

    LiveEnvironment env(std::make_shared<LiveFetcher>(p, std::make_shared<HttplibTransport>(),
                                                      std::make_shared<SystemClock>()));
    const auto down = env.fetch(base + "/page");
    EXPECT_EQ(down.status, 502);
    EXPECT_TRUE(down.transport_error);
}
