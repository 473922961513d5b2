#include "wayfinder/page_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "wayfinder/text.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

namespace {

// ---------------------------------------------------------------------------
// Minimal HTML tokenizer. Good enough for statistics: no tree building, no
// implied-tag repair. Raw-text elements (script, style...) are swallowed.
// ---------------------------------------------------------------------------

struct HtmlToken {
    enum class Kind { text, start, end };
    Kind kind = Kind::text;
    std::string name;  // lowercase tag name
    std::map<std::string, std::string> attrs;
    std::string text;  // entity-decoded text
};

const std::unordered_set<std::string> kRawTextTags{"script", "style", "noscript", "template"};

const std::unordered_set<std::string> kBlockTags{
    "address", "article", "aside", "blockquote", "body",   "br",     "caption", "dd",
    "details", "div",     "dl",    "dt",         "fieldset", "figcaption", "figure", "footer",
    "form",    "h1",      "h2",    "h3",         "h4",     "h5",     "h6",      "header",
    "hr",      "li",      "main",  "nav",        "ol",     "p",      "pre",     "section",
    "summary", "table",   "tbody", "td",         "tfoot",  "th",     "thead",   "tr",
    "ul",      "title",   "head",  "html",       "option", "select", "label",   "legend",
};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string decode_entities(std::string_view s) {
    static const std::unordered_map<std::string, char32_t> named{
        {"amp", U'&'},     {"lt", U'<'},      {"gt", U'>'},      {"quot", U'"'},
        {"apos", U'\''},   {"nbsp", 0xA0},    {"copy", 0xA9},    {"reg", 0xAE},
        {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026}, {"laquo", 0xAB},
        {"raquo", 0xBB},   {"lsaquo", 0x2039}, {"rsaquo", 0x203A}, {"middot", 0xB7},
        {"bull", 0x2022},  {"rarr", 0x2192},  {"larr", 0x2190},
    };
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        const auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back(s[i++]);
            continue;
        }
        const std::string_view ent = s.substr(i + 1, semi - i - 1);
        char32_t cp = 0;
        bool ok = false;
        if (!ent.empty() && ent.front() == '#') {
            try {
                const bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
                const std::string digits(ent.substr(hex ? 2 : 1));
                if (!digits.empty()) {
                    std::size_t used = 0;
                    const unsigned long v = std::stoul(digits, &used, hex ? 16 : 10);
                    if (used == digits.size() && v > 0 && v <= 0x10FFFF) {
                        cp = static_cast<char32_t>(v);
                        ok = true;
                    }
                }
            } catch (const std::exception&) {
                ok = false;
            }
        } else if (auto it = named.find(std::string(ent)); it != named.end()) {
            cp = it->second;
            ok = true;
        }
        if (!ok) {
            out.push_back(s[i++]);
            continue;
        }
        text::append_utf8(out, cp);
        i = semi + 1;
    }
    return out;
}

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
    if (needle.empty()) return from;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            if (std::tolower(static_cast<unsigned char>(hay[i + k])) !=
                std::tolower(static_cast<unsigned char>(needle[k]))) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string_view::npos;
}

// Parses attributes in `s` (the inside of a tag after its name).
std::map<std::string, std::string> parse_attrs(std::string_view s) {
    std::map<std::string, std::string> attrs;
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    };
    while (i < s.size()) {
        skip_ws();
        if (i >= s.size()) break;
        if (s[i] == '/') {
            ++i;
            continue;
        }
        const std::size_t name_start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '=' &&
               s[i] != '/' && s[i] != '>')
            ++i;
        std::string name = lower(s.substr(name_start, i - name_start));
        skip_ws();
        std::string value;
        if (i < s.size() && s[i] == '=') {
            ++i;
            skip_ws();
            if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
                const char q = s[i++];
                const auto close = s.find(q, i);
                const auto stop = close == std::string_view::npos ? s.size() : close;
                value = decode_entities(s.substr(i, stop - i));
                i = stop == s.size() ? stop : stop + 1;
            } else {
                const std::size_t vs = i;
                while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '>')
                    ++i;
                value = decode_entities(s.substr(vs, i - vs));
            }
        }
        if (!name.empty() && !attrs.count(name)) attrs.emplace(std::move(name), std::move(value));
        if (i == name_start) ++i;
    }
    return attrs;
}

std::vector<HtmlToken> tokenize_html(std::string_view html) {
    std::vector<HtmlToken> tokens;
    std::string pending_text;
    auto flush_text = [&] {
        if (pending_text.empty()) return;
        HtmlToken t;
        t.kind = HtmlToken::Kind::text;
        t.text = decode_entities(pending_text);
        tokens.push_back(std::move(t));
        pending_text.clear();
    };

    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            pending_text.push_back(html[i++]);
            continue;
        }
        if (html.compare(i, 4, "<!--") == 0) {
            const auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
            const auto end = html.find('>', i);
            i = end == std::string_view::npos ? html.size() : end + 1;
            continue;
        }
        const bool closing = i + 1 < html.size() && html[i + 1] == '/';
        const std::size_t name_start = i + (closing ? 2 : 1);
        if (name_start >= html.size() || !std::isalpha(static_cast<unsigned char>(html[name_start]))) {
            pending_text.push_back(html[i++]);
            continue;
        }
        const auto end = html.find('>', name_start);
        if (end == std::string_view::npos) {
            pending_text.append(html.substr(i));
            break;
        }
        std::size_t name_end = name_start;
        while (name_end < end && (std::isalnum(static_cast<unsigned char>(html[name_end])) ||
                                  html[name_end] == '-' || html[name_end] == ':'))
            ++name_end;
        flush_text();
        HtmlToken t;
        t.kind = closing ? HtmlToken::Kind::end : HtmlToken::Kind::start;
        t.name = lower(html.substr(name_start, name_end - name_start));
        if (!closing) t.attrs = parse_attrs(html.substr(name_end, end - name_end));
        i = end + 1;
        const bool self_closing = end > 0 && html[end - 1] == '/';
        tokens.push_back(t);
        if (!closing && !self_closing && kRawTextTags.count(t.name)) {
            const auto close = find_ci(html, "</" + t.name, i);
            if (close == std::string_view::npos) {
                i = html.size();
            } else {
                const auto close_end = html.find('>', close);
                i = close_end == std::string_view::npos ? html.size() : close_end + 1;
            }
            HtmlToken e;
            e.kind = HtmlToken::Kind::end;
            e.name = t.name;
            tokens.push_back(std::move(e));
        }
    }
    flush_text();
    return tokens;
}

// ---------------------------------------------------------------------------
// Shared anchor collection for summarize / extract_links / detect_markers.
// ---------------------------------------------------------------------------

struct RawAnchor {
    std::optional<std::string> href;  // resolved, fragment stripped; nullopt if unusable
    bool fragment_only = false;
    std::string text;
    std::string rel;
    std::string label;  // aria-label/title, used when the anchor has no text
    std::size_t position = 0;
};

struct ParsedPage {
    std::vector<std::string> blocks;
    std::vector<RawAnchor> anchors;
    std::size_t interactive = 0;
    std::set<std::string> structural_tags;
    std::optional<std::string> link_rel_next;  // <link rel="next">
};

std::optional<std::string> resolve_link(std::string_view base, std::string_view href,
                                        bool& fragment_only) {
    const auto trimmed = text::trim(href);
    fragment_only = !trimmed.empty() && trimmed.front() == '#';
    if (trimmed.empty() || fragment_only) return std::nullopt;
    auto resolved = resolve_url(base, trimmed);
    if (!resolved) return std::nullopt;
    auto parts = parse_url(*resolved);
    if (!parts || (parts->scheme != "http" && parts->scheme != "https")) return std::nullopt;
    parts->fragment.reset();
    return parts->to_string();
}

ParsedPage parse_html(const RawDocument& doc) {
    ParsedPage page;
    const auto tokens = tokenize_html(doc.body);
    std::string base = doc.url;
    std::string block;
    int hidden_depth = 0;  // inside <head>/<title>/raw-text elements
    std::optional<RawAnchor> open_anchor;
    std::size_t anchor_ordinal = 0;

    auto flush_block = [&] {
        auto collapsed = text::collapse_whitespace(block);
        if (!collapsed.empty()) page.blocks.push_back(std::move(collapsed));
        block.clear();
    };
    auto close_anchor = [&] {
        if (!open_anchor) return;
        open_anchor->text = text::collapse_whitespace(open_anchor->text);
        if (open_anchor->text.empty()) open_anchor->text = text::collapse_whitespace(open_anchor->label);
        page.anchors.push_back(std::move(*open_anchor));
        open_anchor.reset();
    };

    for (const auto& tok : tokens) {
        switch (tok.kind) {
            case HtmlToken::Kind::text:
                if (hidden_depth == 0) {
                    block += tok.text;
                    if (open_anchor) open_anchor->text += tok.text;
                }
                break;
            case HtmlToken::Kind::start: {
                if (kRawTextTags.count(tok.name) || tok.name == "title") ++hidden_depth;
                if (kBlockTags.count(tok.name)) flush_block();
                if (kStructuralTags.count(tok.name)) page.structural_tags.insert(tok.name);
                if (tok.name == "base") {
                    if (auto it = tok.attrs.find("href"); it != tok.attrs.end()) {
                        if (auto r = resolve_url(doc.url, it->second)) base = *r;
                    }
                } else if (tok.name == "link") {
                    auto rel = tok.attrs.find("rel");
                    auto href = tok.attrs.find("href");
                    if (rel != tok.attrs.end() && href != tok.attrs.end() &&
                        text::contains_word(lower(rel->second), "next") && !page.link_rel_next) {
                        bool frag = false;
                        page.link_rel_next = resolve_link(base, href->second, frag);
                    }
                } else if (tok.name == "a") {
                    close_anchor();
                    auto href = tok.attrs.find("href");
                    if (href == tok.attrs.end()) break;
                    ++page.interactive;
                    RawAnchor a;
                    a.position = anchor_ordinal++;
                    a.href = resolve_link(base, href->second, a.fragment_only);
                    if (auto rel = tok.attrs.find("rel"); rel != tok.attrs.end()) a.rel = lower(rel->second);
                    for (const char* alt : {"aria-label", "title"}) {
                        if (auto it = tok.attrs.find(alt); it != tok.attrs.end() && a.label.empty())
                            a.label = it->second;
                    }
                    open_anchor = std::move(a);
                } else if (tok.name == "button") {
                    ++page.interactive;
                } else if (tok.name == "input") {
                    auto type = tok.attrs.find("type");
                    if (type != tok.attrs.end()) {
                        const auto t = lower(type->second);
                        if (t == "submit" || t == "button" || t == "reset") ++page.interactive;
                    }
                }
                break;
            }
            case HtmlToken::Kind::end:
                if ((kRawTextTags.count(tok.name) || tok.name == "title") && hidden_depth > 0)
                    --hidden_depth;
                if (tok.name == "a") close_anchor();
                if (kBlockTags.count(tok.name)) flush_block();
                break;
        }
    }
    close_anchor();
    flush_block();
    return page;
}

// "[anchor](url)", optionally as a list item.
const std::regex kLinkLine(R"(^(?:[-*]\s+)?\[([^\]]*)\]\((\S+)\)$)");

ParsedPage parse_plain(const RawDocument& doc) {
    ParsedPage page;
    std::size_t start = 0;
    std::size_t ordinal = 0;
    const std::string& body = doc.body;
    while (start <= body.size()) {
        auto nl = body.find('\n', start);
        if (nl == std::string::npos) nl = body.size();
        std::string line = text::trim(std::string_view(body).substr(start, nl - start));
        start = nl + 1;
        if (line.empty()) {
            if (nl == body.size()) break;
            continue;
        }
        std::smatch m;
        if (std::regex_match(line, m, kLinkLine)) {
            RawAnchor a;
            a.position = ordinal++;
            a.text = text::collapse_whitespace(m[1].str());
            a.href = resolve_link(doc.url, m[2].str(), a.fragment_only);
            ++page.interactive;
            if (line.front() == '-' || line.front() == '*') page.structural_tags.insert("li");
            if (!a.text.empty()) page.blocks.push_back(a.text);
            page.anchors.push_back(std::move(a));
        } else {
            std::string content = line;
            if (line.rfind("### ", 0) == 0) {
                page.structural_tags.insert("h3");
                content = line.substr(4);
            } else if (line.rfind("## ", 0) == 0) {
                page.structural_tags.insert("h2");
                content = line.substr(3);
            } else if (line.rfind("# ", 0) == 0) {
                page.structural_tags.insert("h1");
                content = line.substr(2);
            } else if (line.rfind("- ", 0) == 0 || line.rfind("* ", 0) == 0) {
                page.structural_tags.insert("li");
                content = line.substr(2);
            } else if (line.front() == '|') {
                page.structural_tags.insert("table");
            }
            auto collapsed = text::collapse_whitespace(content);
            if (!collapsed.empty()) page.blocks.push_back(std::move(collapsed));
        }
        if (nl == body.size()) break;
    }
    return page;
}

ParsedPage parse(const RawDocument& doc) {
    return doc.content_kind == ContentKind::html ? parse_html(doc) : parse_plain(doc);
}

std::string normalize_anchor_label(std::string_view s) {
    return text::fold_case(text::collapse_whitespace(s));
}

std::string strip_arrows(const std::string& s) {
    auto cps = text::decode_utf8(s);
    auto is_arrow = [](char32_t c) {
        return c == U' ' || c == U'>' || c == U'<' || c == 0xBB || c == 0xAB || c == 0x203A ||
               c == 0x2039 || c == 0x2192 || c == U'.' || c == U':' || c == U'|';
    };
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && is_arrow(cps[b])) ++b;
    while (e > b && is_arrow(cps[e - 1])) --e;
    return text::encode_utf8({cps.begin() + static_cast<std::ptrdiff_t>(b),
                              cps.begin() + static_cast<std::ptrdiff_t>(e)});
}

bool matches_pagination(const RawAnchor& a, const std::vector<std::string>& keywords) {
    if (text::contains_word(a.rel, "next")) return true;
    const auto label = normalize_anchor_label(a.text);
    if (label.empty()) return false;
    const auto stripped = strip_arrows(label);
    return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& kw) {
        const auto k = normalize_anchor_label(kw);
        return label == k || stripped == k;
    });
}

bool any_keyword(const std::string& folded_haystack, const std::vector<std::string>& keywords) {
    return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& kw) {
        return text::contains_word(folded_haystack, text::fold_case(kw));
    });
}

}  // namespace

std::size_t count_valid_chars(const std::string& text_in) {
    const auto cps = text::decode_utf8(text_in);
    std::size_t valid = 0;
    std::size_t i = 0;
    while (i < cps.size()) {
        std::size_t j = i;
        while (j < cps.size() && cps[j] == cps[i]) ++j;
        const std::size_t run = j - i;
        const char32_t cp = cps[i];
        const bool symbol = !text::is_letter(cp) && !text::is_digit(cp) && !text::is_space(cp);
        // Runs of 4+ identical symbols ("-----", "????") read as gibberish.
        if (!(symbol && run >= 4)) {
            const bool ok = text::is_letter(cp) || text::is_digit(cp) || text::is_space(cp) ||
                            text::is_punctuation(cp);
            if (ok) valid += run;
        }
        i = j;
    }
    return valid;
}

DomSummary summarize(const RawDocument& doc) {
    DomSummary summary;
    if (doc.body.empty()) return summary;
    const auto page = parse(doc);
    for (std::size_t k = 0; k < page.blocks.size(); ++k) {
        if (k > 0) summary.extracted_text += '\n';
        summary.extracted_text += page.blocks[k];
        if (text::count_code_points(page.blocks[k]) >= kParagraphMinChars) ++summary.n_para;
    }
    summary.total_chars = text::count_code_points(summary.extracted_text);
    summary.valid_chars = count_valid_chars(summary.extracted_text);
    summary.n_btn = page.interactive;
    summary.structural_tags = page.structural_tags;
    return summary;
}

std::vector<LinkRef> extract_links(const RawDocument& doc) {
    std::vector<LinkRef> links;
    if (doc.body.empty()) return links;
    std::unordered_set<std::string> seen;
    for (const auto& a : parse(doc).anchors) {
        if (!a.href) continue;
        if (!seen.insert(*a.href).second) continue;
        links.push_back(LinkRef{*a.href, a.text, a.position});
    }
    return links;
}

MarkerSet detect_markers(const RawDocument& doc, const MarkerKeywords& keywords) {
    MarkerSet markers;
    const auto folded = text::fold_case(doc.body);
    markers.has_gallery = any_keyword(folded, keywords.gallery);
    markers.has_captcha = any_keyword(folded, keywords.captcha);
    markers.has_error_page = doc.status >= 400 || any_keyword(folded, keywords.error);

    if (!doc.body.empty()) {
        const auto page = parse(doc);
        for (const auto& a : page.anchors) {
            if (!a.href || !matches_pagination(a, keywords.pagination)) continue;
            markers.next_page_link = LinkRef{*a.href, a.text, a.position};
            break;
        }
        if (!markers.next_page_link && page.link_rel_next) {
            markers.next_page_link = LinkRef{*page.link_rel_next, "", 0};
        }
    }
    markers.has_next_page = markers.next_page_link.has_value();
    return markers;
}

}  // namespace wayfinder
