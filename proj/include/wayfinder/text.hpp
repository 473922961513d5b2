#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 and character-class helpers shared by the page model, the counter's
// dedup keys and the keyword-overlap scorers. Everything here is locale
// independent so results are identical across processes and machines.
namespace wayfinder::text {

/// Decodes UTF-8 into code points. Malformed sequences decode to U+FFFD,
/// one replacement per offending byte.
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

std::size_t count_code_points(std::string_view s);

bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_space(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_cjk(char32_t cp);
inline bool is_alnum(char32_t cp) { return is_letter(cp) || is_digit(cp); }

/// Simple (one-to-one) case fold for ASCII, Latin-1, Latin Extended-A,
/// Greek and Cyrillic. Other scripts are returned unchanged.
char32_t fold_case(char32_t cp);
std::string fold_case(std::string_view s);

/// Trims, and replaces every whitespace run by one ASCII space.
std::string collapse_whitespace(std::string_view s);
std::string trim(std::string_view s);

/// Case-folded word tokens. Latin/Cyrillic/etc. words are maximal runs of
/// letters and digits; every CJK ideograph or kana is its own token.
std::vector<std::string> tokenize(std::string_view s);

/// Query content terms: distinct tokens in first-occurrence order with
/// English and Chinese function words removed.
std::vector<std::string> content_terms(std::string_view query);
bool is_stopword(std::string_view folded_token);

/// True when `needle` occurs in `haystack` with no letter or digit directly
/// before or after it. Both sides are expected to be case-folded already.
bool contains_word(std::string_view haystack, std::string_view needle);

}  // namespace wayfinder::text
