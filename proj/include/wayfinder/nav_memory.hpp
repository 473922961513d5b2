#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wayfinder/page_model.hpp"

// URL stack: explicit depth-first navigation memory with loop prevention,
// viability-gated rollback and breadcrumb reconstruction.
namespace wayfinder {

struct StackFrame {
    std::string url;  // canonical
    std::size_t depth = 0;  // root = 0
    std::vector<LinkRef> discovered;
    std::size_t cursor = 0;  // next unexplored index into `discovered`

    bool operator==(const StackFrame&) const = default;
};

inline constexpr std::size_t kDefaultStepCap = 40;

/// Owned by exactly one episode. `visited` keeps every URL ever pushed,
/// including popped ones, so pruned branches are never re-entered.
class NavState {
public:
    explicit NavState(std::size_t step_cap = kDefaultStepCap) : step_cap_(step_cap) {}

    /// Throws AlreadyVisited or StepCapExceeded.
    void push(std::string_view url, std::vector<LinkRef> links);
    /// Throws EmptyStack or StepCapExceeded. Returns the popped url.
    std::string pop();

    /// First frame (scanning top-down) with an unvisited link at/after its
    /// cursor. Cursors advance past skipped visited links and past the
    /// returned link.
    std::optional<std::pair<std::size_t, LinkRef>> next_unexplored();

    std::vector<std::string> breadcrumb() const;

    bool is_visited(std::string_view url) const;
    /// Marks a url visited without a frame (used by the flat, stack-less mode).
    void mark_visited(std::string_view url);

    const std::vector<StackFrame>& frames() const { return stack_; }
    StackFrame* top() { return stack_.empty() ? nullptr : &stack_.back(); }
    const StackFrame* top() const { return stack_.empty() ? nullptr : &stack_.back(); }
    bool empty() const { return stack_.empty(); }
    std::size_t size() const { return stack_.size(); }
    const std::set<std::string>& visited() const { return visited_; }
    std::size_t step_count() const { return step_count_; }
    std::size_t step_cap() const { return step_cap_; }

private:
    std::vector<StackFrame> stack_;
    std::set<std::string> visited_;
    std::size_t step_count_ = 0;
    std::size_t step_cap_;
};

enum class Verdict { viable, dead };
enum class ViabilityReason { ok, http_error, irrelevant, marker_blocked };

std::string_view to_string(Verdict v);
std::string_view to_string(ViabilityReason r);

struct Viability {
    Verdict verdict = Verdict::viable;
    ViabilityReason reason = ViabilityReason::ok;

    bool operator==(const Viability&) const = default;
};

/// Preliminary check run right after a page is fetched. `depth` is the
/// stack depth of the page (root = 0); the root is never pruned for relevance.
Viability check_viability(const RawDocument& doc, const MarkerSet& markers, int relevance_points,
                          std::size_t depth);

}  // namespace wayfinder
