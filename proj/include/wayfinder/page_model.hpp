#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Reduction of one fetched page to the statistics and markers that the
// understanding score and the navigation layer consume.
namespace wayfinder {

enum class ContentKind { html, plain_text };

struct RawDocument {
    std::string url;  // absolute
    int status = 200;
    std::string body;
    ContentKind content_kind = ContentKind::html;
    bool truncated = false;
    /// Set by the live adapter when the status is synthetic (timeout, transport failure...).
    std::optional<std::string> transport_error;

    bool operator==(const RawDocument&) const = default;
};

/// Structural tags that count towards the formatting bonus.
inline const std::set<std::string> kStructuralTags{"li", "h1", "h2", "h3", "table", "nav"};

struct DomSummary {
    std::size_t total_chars = 0;
    std::size_t valid_chars = 0;
    std::size_t n_para = 0;
    std::size_t n_btn = 0;
    std::set<std::string> structural_tags;
    std::string extracted_text;

    bool operator==(const DomSummary&) const = default;
};

struct LinkRef {
    std::string href;  // absolute, fragment stripped
    std::string anchor_text;
    std::size_t position_index = 0;

    bool operator==(const LinkRef&) const = default;
};

struct MarkerSet {
    bool has_gallery = false;
    bool has_captcha = false;
    bool has_error_page = false;
    bool has_next_page = false;
    std::optional<LinkRef> next_page_link;  // present iff has_next_page

    bool operator==(const MarkerSet&) const = default;
};

/// Keyword tables for marker detection. Matching is case-insensitive and
/// respects word boundaries.
struct MarkerKeywords {
    std::vector<std::string> gallery{"gallery", "carousel", "slideshow"};
    std::vector<std::string> captcha{"captcha", "verify you are human"};
    std::vector<std::string> error{"404", "not found", "access denied"};
    std::vector<std::string> pagination{"next", "next page", "›", ">>", "more results"};
};

/// Blocks shorter than this many visible characters are not paragraphs.
inline constexpr std::size_t kParagraphMinChars = 40;

DomSummary summarize(const RawDocument& doc);
std::vector<LinkRef> extract_links(const RawDocument& doc);
MarkerSet detect_markers(const RawDocument& doc, const MarkerKeywords& keywords = {});

/// Valid-character count of already-extracted text (exposed for tests).
std::size_t count_valid_chars(const std::string& text);

}  // namespace wayfinder
