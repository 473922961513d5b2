#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace wayfinder {

/// Components of an absolute hierarchical URL (scheme://authority/path?query#fragment).
struct UrlParts {
    std::string scheme;
    std::string host;  // includes ":port" when present
    std::string path;
    std::optional<std::string> query;
    std::optional<std::string> fragment;

    std::string to_string() const;
};

std::optional<UrlParts> parse_url(std::string_view url);
bool is_absolute_url(std::string_view url);

/// Resolves `ref` against an absolute `base`. Returns nullopt when the base
/// is not absolute or the reference cannot be resolved (e.g. "javascript:").
std::optional<std::string> resolve_url(std::string_view base, std::string_view ref);

/// URL equality key: lowercase scheme and host, no fragment, no trailing
/// slash, query kept verbatim. Non-absolute input is returned trimmed.
std::string canonicalize_url(std::string_view url);

/// Lowercased host (with port) of an absolute URL, empty otherwise.
std::string url_host(std::string_view url);

}  // namespace wayfinder
