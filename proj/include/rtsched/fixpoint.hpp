#pragma once

#include "rtsched/time.hpp"

#include <optional>
#include <variant>

namespace rtsched {

// Outcome of a response-time recurrence: either the converged value or a
// divergence verdict (the iterate exceeded the given bound, typically the
// deadline or period).
struct Wcrt {
    std::optional<Duration> value;

    static Wcrt unschedulable() { return Wcrt{std::nullopt}; }
    static Wcrt of(Duration d) { return Wcrt{d}; }

    bool schedulable() const { return value.has_value(); }
    Duration get() const {
        if (!value) throw DomainError("Wcrt: unschedulable has no value");
        return *value;
    }
};

// Iterates w <- f(w) from w0 until convergence. Stops with unschedulable()
// as soon as the iterate exceeds `bound`; exhausting `iteration_cap` is an
// AnalysisError, distinct from an unschedulable verdict.
template <typename F>
Wcrt fixpoint(Duration w0, Duration bound, std::uint64_t iteration_cap, F&& f) {
    Duration w = w0;
    if (w > bound) return Wcrt::unschedulable();
    for (std::uint64_t i = 0; i < iteration_cap; i++) {
        Duration next = f(w);
        if (next > bound) return Wcrt::unschedulable();
        if (next == w) return Wcrt::of(w);
        w = next;
    }
    throw AnalysisError("fixed-point iteration cap exceeded");
}

}  // namespace rtsched
