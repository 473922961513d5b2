#pragma once

#include <stdexcept>
#include <string>

namespace wayfinder {

/// Base of every error raised by the library. Subclasses name the failure
/// kind; the message carries the detail (offending url, flag, field...).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define WAYFINDER_DEFINE_ERROR(Name)             \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

// nav-memory
WAYFINDER_DEFINE_ERROR(AlreadyVisited);
WAYFINDER_DEFINE_ERROR(StepCapExceeded);
WAYFINDER_DEFINE_ERROR(EmptyStack);

// understanding-score
WAYFINDER_DEFINE_ERROR(ScorerUnavailable);

// symbolic-counter
WAYFINDER_DEFINE_ERROR(CounterInactive);
WAYFINDER_DEFINE_ERROR(CounterClosed);
WAYFINDER_DEFINE_ERROR(WrongMode);

// environment
WAYFINDER_DEFINE_ERROR(ParseError);
WAYFINDER_DEFINE_ERROR(InvariantViolation);
WAYFINDER_DEFINE_ERROR(PreconditionError);
WAYFINDER_DEFINE_ERROR(Timeout);
WAYFINDER_DEFINE_ERROR(TooManyRedirects);
WAYFINDER_DEFINE_ERROR(TransportError);
WAYFINDER_DEFINE_ERROR(Disallowed);
WAYFINDER_DEFINE_ERROR(EnvUnavailable);

// orchestrator / backends
WAYFINDER_DEFINE_ERROR(ReasonerProtocol);
WAYFINDER_DEFINE_ERROR(BackendError);

// benchgen
WAYFINDER_DEFINE_ERROR(OutOfRangeDepth);
WAYFINDER_DEFINE_ERROR(Unsatisfiable);

// eval-ablation
WAYFINDER_DEFINE_ERROR(MissingSubset);
WAYFINDER_DEFINE_ERROR(JoinError);

// cli / config
WAYFINDER_DEFINE_ERROR(ConfigError);
WAYFINDER_DEFINE_ERROR(UsageError);

#undef WAYFINDER_DEFINE_ERROR

}  // namespace wayfinder
