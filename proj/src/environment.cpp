#include "wayfinder/environment.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "wayfinder/errors.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

json markers_to_json(const MarkerSet& m) {
    json j{{"has_gallery", m.has_gallery},
           {"has_captcha", m.has_captcha},
           {"has_error_page", m.has_error_page},
           {"has_next_page", m.has_next_page}};
    if (m.next_page_link)
        j["next_page_link"] = {{"href", m.next_page_link->href},
                               {"anchor_text", m.next_page_link->anchor_text},
                               {"position_index", m.next_page_link->position_index}};
    return j;
}

MarkerSet markers_from_json(const json& j) {
    MarkerSet m;
    m.has_gallery = j.value("has_gallery", false);
    m.has_captcha = j.value("has_captcha", false);
    m.has_error_page = j.value("has_error_page", false);
    m.has_next_page = j.value("has_next_page", false);
    if (j.contains("next_page_link") && !j["next_page_link"].is_null()) {
        const auto& l = j["next_page_link"];
        m.next_page_link = LinkRef{l.at("href").get<std::string>(), l.value("anchor_text", ""),
                                   l.value("position_index", std::size_t{0})};
    }
    return m;
}

std::string utf8_prefix(const std::string& s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return s;
    std::size_t cut = max_bytes;
    // Do not split a multi-byte sequence.
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return s.substr(0, cut);
}

bool is_redirect(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

}  // namespace

const SimPage* SiteFixture::find(std::string_view url) const {
    auto it = pages.find(canonicalize_url(url));
    return it == pages.end() ? nullptr : &it->second;
}

SiteFixture parse_fixture(const json& doc, const std::string& source) {
    SiteFixture f;
    try {
        if (!doc.is_object()) throw ParseError(source + ": fixture must be a JSON object");
        f.root = doc.at("root").get<std::string>();
        for (const auto& p : doc.at("pages")) {
            SimPage page;
            page.url = p.at("url").get<std::string>();
            page.status = p.value("status", 200);
            page.title = p.value("title", "");
            page.body = p.value("body", "");
            page.depth = p.value("depth", 1);
            if (p.contains("links")) {
                for (const auto& l : p["links"]) {
                    if (!l.is_array() || l.size() != 2)
                        throw ParseError(source + ": link entries are [href, text] pairs on " + page.url);
                    page.links.emplace_back(l[0].get<std::string>(), l[1].get<std::string>());
                }
            }
            if (p.contains("visual_text") && !p["visual_text"].is_null())
                page.visual_text = p["visual_text"].get<std::string>();
            if (p.contains("markers") && !p["markers"].is_null()) page.markers = markers_from_json(p["markers"]);
            const auto key = canonicalize_url(page.url);
            if (f.pages.count(key)) throw InvariantViolation("duplicate page " + page.url);
            f.pages.emplace(key, std::move(page));
        }
    } catch (const json::exception& e) {
        throw ParseError(source + ": " + e.what());
    }
    validate_fixture(f);
    return f;
}

SiteFixture load_fixture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open fixture " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return parse_fixture(doc, path);
}

json fixture_to_json(const SiteFixture& f) {
    json pages = json::array();
    for (const auto& [_, p] : f.pages) {
        json links = json::array();
        for (const auto& [href, text] : p.links) links.push_back(json::array({href, text}));
        json j{{"url", p.url}, {"status", p.status}, {"title", p.title},
               {"body", p.body}, {"links", links},   {"depth", p.depth}};
        if (p.visual_text) j["visual_text"] = *p.visual_text;
        if (p.markers) j["markers"] = markers_to_json(*p.markers);
        pages.push_back(std::move(j));
    }
    return json{{"root", f.root}, {"pages", pages}};
}

void validate_fixture(const SiteFixture& f) {
    const auto root_key = canonicalize_url(f.root);
    if (!f.pages.count(root_key)) throw InvariantViolation("root " + f.root + " is not a declared page");
    const auto host = url_host(f.root);

    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& [key, page] : f.pages) {
        if (!is_absolute_url(page.url)) throw InvariantViolation("page url is not absolute: " + page.url);
        if (page.status < 100 || page.status > 599)
            throw InvariantViolation("status out of range on " + page.url);
        for (const auto& [href, _] : page.links) {
            const auto target = resolve_url(page.url, href);
            if (!target || url_host(*target) != host) continue;
            const auto t = canonicalize_url(*target);
            if (!f.pages.count(t))
                throw InvariantViolation("link to undeclared url " + *target + " on " + page.url);
            edges[key].push_back(t);
        }
    }

    std::map<std::string, int> bfs{{root_key, 1}};
    std::deque<std::string> queue{root_key};
    while (!queue.empty()) {
        const auto cur = queue.front();
        queue.pop_front();
        for (const auto& next : edges[cur]) {
            if (bfs.emplace(next, bfs[cur] + 1).second) queue.push_back(next);
        }
    }
    for (const auto& [key, page] : f.pages) {
        auto it = bfs.find(key);
        if (it == bfs.end()) throw InvariantViolation("page unreachable from root: " + page.url);
        if (it->second != page.depth)
            throw InvariantViolation("declared depth " + std::to_string(page.depth) + " of " + page.url +
                                     " differs from link distance " + std::to_string(it->second));
    }
}

std::string render_sim_body(const SimPage& page) {
    std::string out;
    if (!page.title.empty()) out += "# " + page.title + "\n\n";
    out += page.body;
    if (!page.links.empty()) {
        if (!out.empty() && out.back() != '\n') out += '\n';
        out += '\n';
        for (const auto& [href, text] : page.links) out += "[" + text + "](" + href + ")\n";
    }
    return out;
}

RawDocument fetch_sim(const SiteFixture& fixture, std::string_view url) {
    RawDocument doc;
    doc.url = std::string(url);
    doc.content_kind = ContentKind::plain_text;
    if (const auto* page = fixture.find(url)) {
        doc.status = page->status;
        doc.body = render_sim_body(*page);
    } else {
        doc.status = 404;
    }
    return doc;
}

std::optional<std::string> SimEnvironment::visual_text(std::string_view url) const {
    const auto* page = fixture_->find(url);
    return page ? page->visual_text : std::nullopt;
}

std::optional<MarkerSet> SimEnvironment::marker_override(std::string_view url) const {
    const auto* page = fixture_->find(url);
    return page ? page->markers : std::nullopt;
}

// ---- clocks and scheduling --------------------------------------------------

std::int64_t SystemClock::now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until_ms(std::int64_t t) {
    const auto d = t - now_ms();
    if (d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
}

std::int64_t FakeClock::now_ms() {
    std::lock_guard lock(mu_);
    return now_;
}

void FakeClock::sleep_until_ms(std::int64_t t) {
    std::lock_guard lock(mu_);
    now_ = std::max(now_, t);
}

void FakeClock::advance_ms(std::int64_t d) {
    std::lock_guard lock(mu_);
    now_ += d;
}

std::int64_t HostScheduler::acquire(const std::string& host) {
    std::int64_t slot = 0;
    {
        std::lock_guard lock(mu_);
        const auto now = clock_->now_ms();
        auto& next = next_slot_.try_emplace(host, now).first->second;
        slot = std::max(now, next);
        next = slot + interval_ms_;
    }
    clock_->sleep_until_ms(slot);
    return slot;
}

// ---- live transport ---------------------------------------------------------

HttpResponse HttplibTransport::get(const std::string& url, const FetchPolicy& policy) {
    const auto parts = parse_url(url);
    if (!parts) throw TransportError("unparseable url " + url);
    httplib::Client cli(parts->scheme + "://" + parts->host);
    const auto secs = static_cast<time_t>(policy.timeout_s);
    const auto usecs = static_cast<time_t>((policy.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_follow_location(false);

    HttpResponse out;
    bool cut = false;
    std::string path = parts->path.empty() ? "/" : parts->path;
    if (parts->query) path += "?" + *parts->query;
    auto res = cli.Get(
        path, httplib::Headers{{"User-Agent", policy.user_agent}},
        [&](const httplib::Response& r) {
            out.status = r.status;
            out.content_type = r.get_header_value("Content-Type");
            if (r.has_header("Location")) out.location = r.get_header_value("Location");
            return true;
        },
        [&](const char* data, std::size_t len) {
            out.body.append(data, len);
            if (out.body.size() > policy.max_body_bytes) {
                cut = true;
                return false;
            }
            return true;
        });
    if (cut) {
        out.body = utf8_prefix(out.body, policy.max_body_bytes);
        out.truncated = true;
        return out;
    }
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout) throw Timeout("timed out connecting to " + url);
        if (err == httplib::Error::Read && out.status == 0) throw Timeout("timed out reading " + url);
        throw TransportError(url + ": " + httplib::to_string(err));
    }
    return out;
}

LiveFetcher::LiveFetcher(FetchPolicy policy, std::shared_ptr<HttpTransport> transport, std::shared_ptr<Clock> clock)
    : policy_(std::move(policy)),
      transport_(transport ? std::move(transport) : std::make_shared<HttplibTransport>()),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      scheduler_(clock_, policy_.per_host_interval_ms) {}

HttpResponse LiveFetcher::get_with_retries(const std::string& url) {
    const auto host = url_host(url);
    for (int attempt = 0;; ++attempt) {
        scheduler_.acquire(host);
        try {
            auto resp = transport_->get(url, policy_);
            if (resp.status >= 500 && attempt < policy_.max_retries) continue;
            return resp;
        } catch (const Timeout&) {
            if (attempt >= policy_.max_retries) throw;
        } catch (const TransportError&) {
            if (attempt >= policy_.max_retries) throw;
        }
    }
}

RawDocument LiveFetcher::fetch(std::string_view url_in) {
    const auto parts = parse_url(url_in);
    if (!parts || (parts->scheme != "http" && parts->scheme != "https"))
        throw PreconditionError("fetch_live needs an http(s) url, got " + std::string(url_in));
    std::string current(url_in);
    for (int hop = 0;; ++hop) {
        const auto canonical = canonicalize_url(current);
        for (const auto& prefix : policy_.disallow)
            if (!prefix.empty() && canonical.rfind(canonicalize_url(prefix), 0) == 0)
                throw Disallowed(current + " matches disallowed prefix " + prefix);

        auto resp = get_with_retries(current);
        if (is_redirect(resp.status) && resp.location) {
            if (hop >= kMaxRedirects) throw TooManyRedirects("more than 5 redirects starting at " + std::string(url_in));
            const auto next = resolve_url(current, *resp.location);
            if (!next) throw TransportError("unresolvable redirect target " + *resp.location);
            current = *next;
            continue;
        }

        RawDocument doc;
        doc.url = current;
        doc.status = resp.status;
        doc.truncated = resp.truncated;
        if (resp.body.size() > policy_.max_body_bytes) {
            resp.body = utf8_prefix(resp.body, policy_.max_body_bytes);
            doc.truncated = true;
        }
        doc.body = std::move(resp.body);
        const bool html = resp.content_type.find("html") != std::string::npos ||
                          (resp.content_type.empty() && doc.body.find('<') != std::string::npos);
        doc.content_kind = html ? ContentKind::html : ContentKind::plain_text;
        return doc;
    }
}

RawDocument fetch_live(std::string_view url, const FetchPolicy& policy) {
    // One fetcher per distinct pacing setup so the per-host interval holds
    // across calls.
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<LiveFetcher>> fetchers;
    auto key = std::to_string(policy.per_host_interval_ms) + "|" + std::to_string(policy.max_retries) + "|" +
                     std::to_string(policy.max_body_bytes) + "|" + std::to_string(policy.timeout_s) + "|" +
                     policy.user_agent;
    for (const auto& d : policy.disallow) key += "|" + d;
    std::shared_ptr<LiveFetcher> fetcher;
    {
        std::lock_guard lock(mu);
        auto& slot = fetchers[key];
        if (!slot) slot = std::make_shared<LiveFetcher>(policy, nullptr, nullptr);
        fetcher = slot;
    }
    return fetcher->fetch(url);
}

RawDocument LiveEnvironment::fetch(std::string_view url) {
    auto failed = [&](int status, const std::string& why) {
        RawDocument doc;
        doc.url = std::string(url);
        doc.status = status;
        doc.transport_error = why;
        return doc;
    };
    try {
        return fetcher_->fetch(url);
    } catch (const Timeout& e) {
        return failed(504, e.what());
    } catch (const TooManyRedirects& e) {
        return failed(508, e.what());
    } catch (const Disallowed& e) {
        return failed(403, e.what());
    } catch (const TransportError& e) {
        return failed(502, e.what());
    } catch (const PreconditionError& e) {
        return failed(400, e.what());
    }
}

}  // namespace wayfinder
