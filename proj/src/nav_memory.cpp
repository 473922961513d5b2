#include "wayfinder/nav_memory.hpp"

#include "wayfinder/errors.hpp"
#include "wayfinder/url.hpp"

namespace wayfinder {

void NavState::push(std::string_view url, std::vector<LinkRef> links) {
    auto canonical = canonicalize_url(url);
    if (visited_.count(canonical)) throw AlreadyVisited(canonical);
    if (step_count_ >= step_cap_)
        throw StepCapExceeded("step cap " + std::to_string(step_cap_) + " reached before push of " + canonical);
    StackFrame frame;
    frame.url = canonical;
    frame.depth = stack_.size();
    frame.discovered = std::move(links);
    visited_.insert(canonical);
    stack_.push_back(std::move(frame));
    ++step_count_;
}

std::string NavState::pop() {
    if (stack_.empty()) throw EmptyStack("pop on empty url stack");
    if (step_count_ >= step_cap_)
        throw StepCapExceeded("step cap " + std::to_string(step_cap_) + " reached before pop");
    auto url = std::move(stack_.back().url);
    stack_.pop_back();
    ++step_count_;
    return url;
}

std::optional<std::pair<std::size_t, LinkRef>> NavState::next_unexplored() {
    for (std::size_t i = stack_.size(); i-- > 0;) {
        auto& frame = stack_[i];
        while (frame.cursor < frame.discovered.size()) {
            const auto& link = frame.discovered[frame.cursor];
            ++frame.cursor;
            if (!is_visited(link.href)) return std::make_pair(i, link);
        }
    }
    return std::nullopt;
}

std::vector<std::string> NavState::breadcrumb() const {
    std::vector<std::string> trail;
    trail.reserve(stack_.size());
    for (const auto& f : stack_) trail.push_back(f.url);
    return trail;
}

bool NavState::is_visited(std::string_view url) const {
    return visited_.count(canonicalize_url(url)) > 0;
}

void NavState::mark_visited(std::string_view url) { visited_.insert(canonicalize_url(url)); }

std::string_view to_string(Verdict v) { return v == Verdict::viable ? "viable" : "dead"; }

std::string_view to_string(ViabilityReason r) {
    switch (r) {
        case ViabilityReason::ok: return "ok";
        case ViabilityReason::http_error: return "http_error";
        case ViabilityReason::irrelevant: return "irrelevant";
        case ViabilityReason::marker_blocked: return "marker_blocked";
    }
    return "ok";
}

Viability check_viability(const RawDocument& doc, const MarkerSet& markers, int relevance_points,
                          std::size_t depth) {
    if (doc.status >= 400) return {Verdict::dead, ViabilityReason::http_error};
    if (markers.has_captcha) return {Verdict::dead, ViabilityReason::marker_blocked};
    if (relevance_points == 0 && depth > 0) return {Verdict::dead, ViabilityReason::irrelevant};
    return {};
}

}  // namespace wayfinder
