#include "wayfinder/symbolic_counter.hpp"

#include <cctype>
#include <map>
#include <regex>

#include "wayfinder/errors.hpp"
#include "wayfinder/text.hpp"

namespace wayfinder {

namespace {

const std::map<std::string, std::size_t>& english_numbers() {
    static const std::map<std::string, std::size_t> words{
        {"one", 1},      {"two", 2},       {"three", 3},     {"four", 4},      {"five", 5},
        {"six", 6},      {"seven", 7},     {"eight", 8},     {"nine", 9},      {"ten", 10},
        {"eleven", 11},  {"twelve", 12},   {"thirteen", 13}, {"fourteen", 14}, {"fifteen", 15},
        {"sixteen", 16}, {"seventeen", 17}, {"eighteen", 18}, {"nineteen", 19}, {"twenty", 20},
        {"thirty", 30},  {"forty", 40},    {"fifty", 50},    {"hundred", 100}, {"a dozen", 12},
        {"dozen", 12},
    };
    return words;
}

std::optional<std::size_t> chinese_number(const std::string& s) {
    static const std::map<std::string, std::size_t> digits{
        {"一", 1}, {"二", 2}, {"两", 2}, {"三", 3}, {"四", 4},
        {"五", 5}, {"六", 6}, {"七", 7}, {"八", 8}, {"九", 9},
    };
    const auto cps = text::decode_utf8(s);
    std::size_t value = 0;
    std::size_t pending = 0;
    for (char32_t cp : cps) {
        std::string ch;
        text::append_utf8(ch, cp);
        if (auto it = digits.find(ch); it != digits.end()) {
            pending = it->second;
        } else if (ch == "十") {
            value += (pending == 0 ? 1 : pending) * 10;
            pending = 0;
        } else if (ch == "百") {
            value += (pending == 0 ? 1 : pending) * 100;
            pending = 0;
        } else {
            return std::nullopt;
        }
    }
    value += pending;
    if (value == 0) return std::nullopt;
    return value;
}

std::string english_number_alternation() {
    std::string alt;
    for (const auto& [word, _] : english_numbers()) {
        if (!alt.empty()) alt += "|";
        alt += word;
    }
    return alt;
}

const std::regex& quota_regex() {
    static const std::regex re(
        R"(\b(?:find|list|name|give|show|collect|identify|get|return|provide|retrieve|enumerate|recommend|select|pick)\b)"
        R"((?:\s+(?:me|us))?(?:\s+(?:exactly|at\s+least|the|top|first|any))*\s+)"
        "(\\d{1,4}|" + english_number_alternation() + ")"
        R"(\s+([a-z][a-z0-9'-]*(?:\s+[a-z][a-z0-9'-]*){0,2}))",
        std::regex::icase | std::regex::ECMAScript);
    return re;
}

const std::regex& exhaustive_regex() {
    static const std::regex re(
        R"(\b(?:how\s+many|total\s+number\s+of|count\s+the|count\s+all(?:\s+the)?)\s+([a-z][a-z0-9'-]*(?:\s+[a-z][a-z0-9'-]*){0,2}))",
        std::regex::icase | std::regex::ECMAScript);
    return re;
}

const std::regex& zh_quota_regex() {
    static const std::regex re(
        "(?:找出|列出|找到|给出|列举|推荐|查找|提供)\\s*"
        "((?:\\d+)|(?:(?:一|二|两|三|四|五|六|七|八|九|十|百)+))\\s*"
        "(?:个|篇|位|名|家|所|项|条|本|部|款|种|门|场)(.*)");
    return re;
}

const std::regex& zh_exhaustive_regex() {
    static const std::regex re(
        "(多少|几个|几位|几篇|几所|几家|总数|一共有|共有)(.*)");
    return re;
}

// Keeps the first few words of a subject phrase, dropping trailing verbs.
std::string trim_subject(std::string s) {
    static const std::regex tail(
        R"(\s+(?:are|is|were|was|have|has|did|do|does|listed|shown|there|on|in|at|from|that|which|who)\b.*$)",
        std::regex::icase);
    s = std::regex_replace(s, tail, "");
    return text::trim(s);
}

}  // namespace

std::string_view to_string(CounterMode m) {
    switch (m) {
        case CounterMode::quota: return "quota";
        case CounterMode::exhaustive: return "exhaustive";
        case CounterMode::inactive: return "inactive";
    }
    return "inactive";
}

std::string_view to_string(RecordOutcome o) {
    switch (o) {
        case RecordOutcome::incremented: return "incremented";
        case RecordOutcome::duplicate: return "duplicate";
        case RecordOutcome::ignored: return "ignored";
    }
    return "ignored";
}

std::string default_dedup_key(std::string_view entity) {
    const auto folded = text::collapse_whitespace(text::fold_case(entity));
    auto cps = text::decode_utf8(folded);
    std::size_t b = 0;
    std::size_t e = cps.size();
    auto strip = [](char32_t c) { return text::is_punctuation(c) || text::is_space(c); };
    while (b < e && strip(cps[b])) ++b;
    while (e > b && strip(cps[e - 1])) --e;
    return text::encode_utf8({cps.begin() + static_cast<std::ptrdiff_t>(b),
                              cps.begin() + static_cast<std::ptrdiff_t>(e)});
}

CounterConstraint parse_constraint(std::string_view query_in) {
    const std::string query(query_in);
    std::optional<CounterConstraint> quota;
    std::optional<CounterConstraint> exhaustive;

    std::smatch m;
    if (std::regex_search(query, m, quota_regex())) {
        const auto raw = text::fold_case(m[1].str());
        std::optional<std::size_t> n;
        if (std::isdigit(static_cast<unsigned char>(raw.front()))) {
            n = static_cast<std::size_t>(std::stoul(raw));
        } else if (auto it = english_numbers().find(raw); it != english_numbers().end()) {
            n = it->second;
        }
        if (n && *n >= 1) quota = CounterConstraint{CounterMode::quota, n, trim_subject(m[2].str())};
    } else if (std::regex_search(query, m, zh_quota_regex())) {
        const auto raw = m[1].str();
        std::optional<std::size_t> n;
        if (std::isdigit(static_cast<unsigned char>(raw.front())))
            n = static_cast<std::size_t>(std::stoul(raw));
        else
            n = chinese_number(raw);
        if (n && *n >= 1) quota = CounterConstraint{CounterMode::quota, n, text::trim(m[2].str())};
    }

    if (std::regex_search(query, m, exhaustive_regex())) {
        exhaustive = CounterConstraint{CounterMode::exhaustive, std::nullopt, trim_subject(m[1].str())};
    } else if (std::regex_search(query, m, zh_exhaustive_regex())) {
        exhaustive = CounterConstraint{CounterMode::exhaustive, std::nullopt, text::trim(m[2].str())};
    }

    // Both readings present is ambiguous; do not guess.
    if (quota && exhaustive) return {};
    if (quota) return *quota;
    if (exhaustive) return *exhaustive;
    return {};
}

RecordOutcome CounterState::record(std::string_view entity, const DedupKeyFn& keyfn) {
    if (constraint_.mode == CounterMode::inactive) throw CounterInactive("counter is inactive for this query");
    if (terminated_) throw CounterClosed("counter already terminated");
    auto key = keyfn ? keyfn(entity) : default_dedup_key(entity);
    if (key.empty()) return RecordOutcome::ignored;
    if (!seen_keys_.insert(std::move(key)).second) return RecordOutcome::duplicate;
    entities_.emplace_back(text::trim(entity));
    if (constraint_.mode == CounterMode::quota && count() >= *constraint_.target) terminated_ = true;
    return RecordOutcome::incremented;
}

void CounterState::signal_env(bool has_next_page) {
    if (constraint_.mode != CounterMode::exhaustive)
        throw WrongMode("signal_env requires exhaustive mode, counter is " +
                        std::string(to_string(constraint_.mode)));
    if (!has_next_page) {
        env_exhausted_ = true;
        terminated_ = true;
    }
}

}  // namespace wayfinder
