#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Deterministic quantity tracker. A query either sets an explicit quota
// ("find 5 papers"), asks for an exhaustive count ("how many ..."), or
// leaves the counter inactive.
namespace wayfinder {

enum class CounterMode { quota, exhaustive, inactive };

std::string_view to_string(CounterMode m);

struct CounterConstraint {
    CounterMode mode = CounterMode::inactive;
    std::optional<std::size_t> target;  // quota only, >= 1
    std::string subject;

    bool operator==(const CounterConstraint&) const = default;
};

enum class RecordOutcome { incremented, duplicate, ignored };

std::string_view to_string(RecordOutcome o);

using DedupKeyFn = std::function<std::string(std::string_view entity)>;

/// Case-fold, collapse internal whitespace, strip leading/trailing punctuation.
std::string default_dedup_key(std::string_view entity);

CounterConstraint parse_constraint(std::string_view query);

class CounterState {
public:
    CounterState() = default;
    explicit CounterState(CounterConstraint constraint) : constraint_(std::move(constraint)) {}

    /// Throws CounterInactive or CounterClosed. Empty keys are ignored.
    RecordOutcome record(std::string_view entity, const DedupKeyFn& keyfn = default_dedup_key);
    /// Exhaustive mode only (WrongMode otherwise). A page without a next-page
    /// signal closes the counter.
    void signal_env(bool has_next_page);
    bool should_terminate() const { return terminated_; }

    const CounterConstraint& constraint() const { return constraint_; }
    std::size_t count() const { return seen_keys_.size(); }
    const std::set<std::string>& seen_keys() const { return seen_keys_; }
    /// Accepted entities in first-seen order (original spelling).
    const std::vector<std::string>& entities() const { return entities_; }
    bool terminated() const { return terminated_; }
    bool env_exhausted() const { return env_exhausted_; }

private:
    CounterConstraint constraint_;
    std::set<std::string> seen_keys_;
    std::vector<std::string> entities_;
    bool terminated_ = false;
    bool env_exhausted_ = false;
};

}  // namespace wayfinder
