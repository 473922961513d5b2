#include "wayfinder/url.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace wayfinder {

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool valid_scheme(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '-' || c == '.';
    });
}

std::string remove_dot_segments(std::string_view path) {
    const bool absolute = !path.empty() && path.front() == '/';
    std::vector<std::string_view> segments;
    std::size_t i = absolute ? 1 : 0;
    while (true) {
        const std::size_t j = path.find('/', i);
        segments.push_back(path.substr(i, (j == std::string_view::npos ? path.size() : j) - i));
        if (j == std::string_view::npos) break;
        i = j + 1;
    }
    std::vector<std::string_view> out;
    bool trailing = false;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const bool last = k + 1 == segments.size();
        const auto seg = segments[k];
        if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing = last;
        } else if (seg == "." || seg.empty()) {
            trailing = last;
        } else {
            out.push_back(seg);
            trailing = false;
        }
    }
    std::string result = absolute ? "/" : "";
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (k > 0) result += '/';
        result += out[k];
    }
    if (trailing && !out.empty()) result += '/';
    return result;
}

std::string merge_paths(const UrlParts& base, std::string_view ref_path) {
    if (base.path.empty()) return "/" + std::string(ref_path);
    const auto slash = base.path.rfind('/');
    return base.path.substr(0, slash + 1) + std::string(ref_path);
}

}  // namespace

std::string UrlParts::to_string() const {
    std::string out = scheme + "://" + host + path;
    if (query) out += "?" + *query;
    if (fragment) out += "#" + *fragment;
    return out;
}

std::optional<UrlParts> parse_url(std::string_view url) {
    const auto colon = url.find("://");
    if (colon == std::string_view::npos) return std::nullopt;
    UrlParts parts;
    if (!valid_scheme(url.substr(0, colon))) return std::nullopt;
    parts.scheme = lower_ascii(url.substr(0, colon));
    std::string_view rest = url.substr(colon + 3);

    if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
        parts.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    if (const auto q = rest.find('?'); q != std::string_view::npos) {
        parts.query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    const auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    if (const auto at = authority.rfind('@'); at != std::string_view::npos)
        authority = authority.substr(at + 1);
    if (authority.empty()) return std::nullopt;
    if (std::any_of(authority.begin(), authority.end(),
                    [](unsigned char c) { return std::isspace(c); }))
        return std::nullopt;
    parts.host = std::string(authority);
    parts.path = slash == std::string_view::npos ? "" : std::string(rest.substr(slash));
    return parts;
}

bool is_absolute_url(std::string_view url) { return parse_url(url).has_value(); }

std::optional<std::string> resolve_url(std::string_view base, std::string_view ref) {
    const auto b = parse_url(base);
    if (!b) return std::nullopt;
    std::string r(ref);
    // Trim surrounding whitespace, which HTML attribute values often carry.
    const auto first = r.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return std::nullopt;
    r = r.substr(first, r.find_last_not_of(" \t\r\n") - first + 1);

    if (auto abs = parse_url(r)) return abs->to_string();
    if (const auto colon = r.find(':'); colon != std::string::npos) {
        const auto first_special = r.find_first_of("/?#");
        if (first_special == std::string::npos || colon < first_special) {
            // Non-hierarchical scheme such as mailto: or javascript:.
            if (valid_scheme(std::string_view(r).substr(0, colon))) return std::nullopt;
        }
    }

    UrlParts out;
    out.scheme = b->scheme;
    if (r.rfind("//", 0) == 0) {
        auto reparsed = parse_url(b->scheme + ":" + r);
        if (!reparsed) return std::nullopt;
        reparsed->path = remove_dot_segments(reparsed->path);
        return reparsed->to_string();
    }
    out.host = b->host;

    std::string_view rest(r);
    if (const auto hash = rest.find('#'); hash != std::string_view::npos) {
        out.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    std::optional<std::string> query;
    if (const auto q = rest.find('?'); q != std::string_view::npos) {
        query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    if (rest.empty()) {
        out.path = b->path;
        out.query = query ? query : b->query;
    } else if (rest.front() == '/') {
        out.path = remove_dot_segments(rest);
        out.query = query;
    } else {
        out.path = remove_dot_segments(merge_paths(*b, rest));
        out.query = query;
    }
    return out.to_string();
}

std::string canonicalize_url(std::string_view url) {
    auto parts = parse_url(url);
    if (!parts) {
        const auto first = url.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos) return {};
        return std::string(url.substr(first, url.find_last_not_of(" \t\r\n") - first + 1));
    }
    parts->host = lower_ascii(parts->host);
    parts->fragment.reset();
    while (!parts->path.empty() && parts->path.back() == '/') parts->path.pop_back();
    return parts->to_string();
}

std::string url_host(std::string_view url) {
    const auto parts = parse_url(url);
    return parts ? lower_ascii(parts->host) : std::string{};
}

}  // namespace wayfinder
