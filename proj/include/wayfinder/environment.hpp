#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wayfinder/page_model.hpp"

// Page sources behind one fetch contract: a fixture-backed simulated site
// and a polite live HTTP adapter.
namespace wayfinder {

struct SimPage {
    std::string url;
    int status = 200;
    std::string title;
    std::string body;
    std::vector<std::pair<std::string, std::string>> links;  // (href, anchor text)
    std::optional<std::string> visual_text;
    std::optional<MarkerSet> markers;
    int depth = 1;  // root = 1

    bool operator==(const SimPage&) const = default;
};

struct SiteFixture {
    std::string root;
    std::map<std::string, SimPage> pages;  // keyed by canonical url

    const SimPage* find(std::string_view url) const;
    bool operator==(const SiteFixture&) const = default;
};

/// Validates on load: ParseError for malformed input, InvariantViolation
/// (naming the url) for undeclared same-site links, bad statuses or depths.
SiteFixture load_fixture(const std::string& path);
SiteFixture parse_fixture(const nlohmann::json& doc, const std::string& source = "<fixture>");
nlohmann::json fixture_to_json(const SiteFixture& fixture);
void validate_fixture(const SiteFixture& fixture);

/// The plain-text rendering a simulated page is served as.
std::string render_sim_body(const SimPage& page);
RawDocument fetch_sim(const SiteFixture& fixture, std::string_view url);

class Environment {
public:
    virtual ~Environment() = default;
    /// Never throws for per-page failures; they surface as status codes.
    virtual RawDocument fetch(std::string_view url) = 0;
    /// Content only a vision model would see on this page.
    virtual std::optional<std::string> visual_text(std::string_view) const { return std::nullopt; }
    /// Declared markers that replace keyword detection for this page.
    virtual std::optional<MarkerSet> marker_override(std::string_view) const { return std::nullopt; }
};

class SimEnvironment : public Environment {
public:
    explicit SimEnvironment(std::shared_ptr<const SiteFixture> fixture) : fixture_(std::move(fixture)) {}
    RawDocument fetch(std::string_view url) override { return fetch_sim(*fixture_, url); }
    std::optional<std::string> visual_text(std::string_view url) const override;
    std::optional<MarkerSet> marker_override(std::string_view url) const override;
    const SiteFixture& fixture() const { return *fixture_; }

private:
    std::shared_ptr<const SiteFixture> fixture_;
};

// ---- live fetching ----------------------------------------------------------

struct FetchPolicy {
    double timeout_s = 10.0;
    int max_retries = 2;
    std::int64_t per_host_interval_ms = 1000;
    std::size_t max_body_bytes = 512 * 1024;
    std::string user_agent = "wayfinder/0.1";
    /// Url prefixes that must never be fetched.
    std::vector<std::string> disallow;
};

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_until_ms(std::int64_t t) = 0;
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
    void sleep_until_ms(std::int64_t t) override;
};

/// Virtual time: sleeping advances the clock instantly. Thread safe.
class FakeClock : public Clock {
public:
    explicit FakeClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() override;
    void sleep_until_ms(std::int64_t t) override;
    void advance_ms(std::int64_t d);

private:
    std::mutex mu_;
    std::int64_t now_;
};

/// Hands out request slots so that two requests to one host start at least
/// `interval_ms` apart, whatever the number of callers.
class HostScheduler {
public:
    HostScheduler(std::shared_ptr<Clock> clock, std::int64_t interval_ms)
        : clock_(std::move(clock)), interval_ms_(interval_ms) {}
    /// Blocks until the caller's slot; returns the slot time.
    std::int64_t acquire(const std::string& host);

private:
    std::shared_ptr<Clock> clock_;
    std::int64_t interval_ms_;
    std::mutex mu_;
    std::map<std::string, std::int64_t> next_slot_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string content_type;
    std::optional<std::string> location;
    bool truncated = false;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Throws Timeout or TransportError.
    virtual HttpResponse get(const std::string& url, const FetchPolicy& policy) = 0;
};

class HttplibTransport : public HttpTransport {
public:
    HttpResponse get(const std::string& url, const FetchPolicy& policy) override;
};

class LiveFetcher {
public:
    LiveFetcher(FetchPolicy policy, std::shared_ptr<HttpTransport> transport, std::shared_ptr<Clock> clock);

    /// GET with retries, per-host pacing, redirects (at most 5) and body
    /// truncation. Throws PreconditionError, Disallowed, Timeout,
    /// TooManyRedirects or TransportError.
    RawDocument fetch(std::string_view url);
    const FetchPolicy& policy() const { return policy_; }

private:
    HttpResponse get_with_retries(const std::string& url);

    FetchPolicy policy_;
    std::shared_ptr<HttpTransport> transport_;
    std::shared_ptr<Clock> clock_;
    HostScheduler scheduler_;
};

inline constexpr int kMaxRedirects = 5;

/// One-shot fetch through the process-wide fetcher for `policy`.
RawDocument fetch_live(std::string_view url, const FetchPolicy& policy);

/// Live site as an Environment. Fetch failures become synthetic statuses
/// (504 timeout, 502 transport, 508 redirect loop, 403 disallowed) with
/// `transport_error` set.
class LiveEnvironment : public Environment {
public:
    explicit LiveEnvironment(std::shared_ptr<LiveFetcher> fetcher) : fetcher_(std::move(fetcher)) {}
    RawDocument fetch(std::string_view url) override;

private:
    std::shared_ptr<LiveFetcher> fetcher_;
};

}  // namespace wayfinder
