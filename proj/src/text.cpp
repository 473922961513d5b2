#include "wayfinder/text.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_set>

namespace wayfinder::text {

namespace {

struct Range {
    char32_t lo;
    char32_t hi;
};

template <std::size_t N>
bool in_ranges(char32_t cp, const std::array<Range, N>& ranges) {
    return std::any_of(ranges.begin(), ranges.end(),
                       [cp](const Range& r) { return cp >= r.lo && cp <= r.hi; });
}

constexpr std::array<Range, 33> kLetterRanges{{
    {U'A', U'Z'},         {U'a', U'z'},         {0xAA, 0xAA},         {0xB5, 0xB5},
    {0xBA, 0xBA},         {0xC0, 0xD6},         {0xD8, 0xF6},         {0xF8, 0x2AF},
    {0x370, 0x373},       {0x376, 0x377},       {0x37B, 0x37D},       {0x386, 0x386},
    {0x388, 0x3FF},       {0x400, 0x481},       {0x48A, 0x52F},       {0x531, 0x587},
    {0x5D0, 0x5EA},       {0x620, 0x64A},       {0x671, 0x6D3},       {0x904, 0x939},
    {0xE01, 0xE30},       {0x10A0, 0x10FF},     {0x1100, 0x11FF},     {0x1E00, 0x1FBC},
    {0x3041, 0x3096},     {0x30A1, 0x30FA},     {0x3400, 0x4DBF},     {0x4E00, 0x9FFF},
    {0xAC00, 0xD7A3},     {0xF900, 0xFAFF},     {0xFF21, 0xFF3A},     {0xFF41, 0xFF5A},
    {0x20000, 0x2FA1F},
}};

constexpr std::array<Range, 8> kCjkRanges{{
    {0x3041, 0x3096},
    {0x30A1, 0x30FA},
    {0x3400, 0x4DBF},
    {0x4E00, 0x9FFF},
    {0xAC00, 0xD7A3},
    {0xF900, 0xFAFF},
    {0x1100, 0x11FF},
    {0x20000, 0x2FA1F},
}};

constexpr std::array<Range, 17> kPunctRanges{{
    {0x21, 0x2F},     {0x3A, 0x40},     {0x5B, 0x60},     {0x7B, 0x7E},
    {0xA1, 0xA1},     {0xA7, 0xA7},     {0xAB, 0xAB},     {0xB7, 0xB7},
    {0xBB, 0xBB},     {0xBF, 0xBF},     {0x2010, 0x2027}, {0x2030, 0x205E},
    {0x3001, 0x3003}, {0x3008, 0x3011}, {0x3014, 0x301F}, {0xFF01, 0xFF0F},
    {0xFF1A, 0xFF20},
}};

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words{
        "a",     "an",    "the",   "of",    "in",    "on",    "at",    "for",   "to",
        "and",   "or",    "by",    "with",  "from",  "as",    "is",    "are",   "was",
        "were",  "be",    "been",  "being", "it",    "its",   "this",  "that",  "these",
        "those", "there", "their", "they",  "he",    "she",   "his",   "her",   "we",
        "our",   "you",   "your",  "i",     "me",    "my",    "do",    "does",  "did",
        "what",  "when",  "where", "who",   "whom",  "whose", "which", "why",   "how",
        "many",  "much",  "find",  "list",  "give",  "show",  "tell",  "please", "exactly",
        "about", "any",   "all",   "some",  "can",   "could", "would", "should", "will",
        "has",   "have",  "had",   "not",   "no",    "into",  "than",  "then",  "so",
        "if",    "also",  "only",  "up",    "out",   "s",
        // Chinese function characters (CJK text is tokenized per character).
        "的", "了", "是", "在", "和", "与", "及", "或", "吗", "呢", "么", "什", "哪",
        "谁", "个", "这", "那", "有", "为", "被", "把", "请", "找", "出", "列", "多",
        "少", "几",
    };
    return words;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + len > s.size()) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        // Reject overlong forms, surrogates and out-of-range values.
        if (ok) {
            if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
                (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
                ok = false;
            }
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::size_t count_code_points(std::string_view s) { return decode_utf8(s).size(); }

bool is_letter(char32_t cp) { return in_ranges(cp, kLetterRanges); }

bool is_digit(char32_t cp) {
    return (cp >= U'0' && cp <= U'9') || (cp >= 0x660 && cp <= 0x669) ||
           (cp >= 0xFF10 && cp <= 0xFF19);
}

bool is_space(char32_t cp) {
    return cp == U' ' || (cp >= 0x09 && cp <= 0x0D) || cp == 0xA0 || cp == 0x3000 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F;
}

bool is_punctuation(char32_t cp) { return in_ranges(cp, kPunctRanges); }

bool is_cjk(char32_t cp) { return in_ranges(cp, kCjkRanges); }

char32_t fold_case(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
    if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x386) return 0x3AC;
    if (cp >= 0x388 && cp <= 0x38A) return cp + 37;
    if (cp == 0x38C) return 0x3CC;
    if (cp == 0x38E || cp == 0x38F) return cp + 63;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 0x20;
    return cp;
}

std::string fold_case(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : decode_utf8(s)) append_utf8(out, fold_case(cp));
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char32_t cp : decode_utf8(s)) {
        if (is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        append_utf8(out, cp);
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto cps = decode_utf8(s);
    std::size_t b = 0;
    std::size_t e = cps.size();
    while (b < e && is_space(cps[b])) ++b;
    while (e > b && is_space(cps[e - 1])) --e;
    return encode_utf8(std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(b),
                                             cps.begin() + static_cast<std::ptrdiff_t>(e)));
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char32_t cp : decode_utf8(s)) {
        if (is_cjk(cp)) {
            flush();
            std::string one;
            append_utf8(one, cp);
            tokens.push_back(std::move(one));
        } else if (is_alnum(cp)) {
            append_utf8(current, fold_case(cp));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

bool is_stopword(std::string_view folded_token) {
    return stopwords().count(std::string(folded_token)) > 0;
}

std::vector<std::string> content_terms(std::string_view query) {
    std::vector<std::string> terms;
    std::set<std::string> seen;
    for (auto& tok : tokenize(query)) {
        if (is_stopword(tok)) continue;
        if (seen.insert(tok).second) terms.push_back(std::move(tok));
    }
    return terms;
}

bool contains_word(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    const auto hay = decode_utf8(haystack);
    const auto pat = decode_utf8(needle);
    if (pat.size() > hay.size()) return false;
    for (std::size_t i = 0; i + pat.size() <= hay.size(); ++i) {
        if (!std::equal(pat.begin(), pat.end(), hay.begin() + static_cast<std::ptrdiff_t>(i)))
            continue;
        // Boundaries only matter where the keyword itself starts/ends with a word char.
        const bool left_ok = i == 0 || !is_alnum(pat.front()) || !is_alnum(hay[i - 1]) ||
                             is_cjk(pat.front());
        const std::size_t end = i + pat.size();
        const bool right_ok = end == hay.size() || !is_alnum(pat.back()) ||
                              !is_alnum(hay[end]) || is_cjk(pat.back());
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace wayfinder::text
