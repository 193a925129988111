#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rtsched {

struct OverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when a fixed-point iteration exhausts its iteration cap. Distinct
// from an "unschedulable" verdict, which is a normal result.
struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Time value in integer picoseconds. All recurrences run on exact integers;
// DDR3 t_CK = 1.5 ns and sub-microsecond Deltas stay exact, and 500 ms
// periods leave ~10^7 headroom in 64 bits. Arithmetic is overflow-checked.
class Duration {
  public:
    constexpr Duration() = default;
    constexpr explicit Duration(std::int64_t ps) : ps_(ps) {}

    static constexpr Duration zero() { return Duration(0); }
    static constexpr Duration ps(std::int64_t v) { return Duration(v); }
    static Duration ns(std::int64_t v) { return scaled(v, 1'000); }
    static Duration us(std::int64_t v) { return scaled(v, 1'000'000); }
    static Duration ms(std::int64_t v) { return scaled(v, 1'000'000'000); }
    static Duration sec(std::int64_t v) { return scaled(v, 1'000'000'000'000); }

    constexpr std::int64_t count() const { return ps_; }
    double as_ms() const { return static_cast<double>(ps_) / 1e9; }
    double as_us() const { return static_cast<double>(ps_) / 1e6; }

    constexpr bool is_zero() const { return ps_ == 0; }
    constexpr bool is_positive() const { return ps_ > 0; }

    friend constexpr bool operator==(Duration a, Duration b) { return a.ps_ == b.ps_; }
    friend constexpr auto operator<=>(Duration a, Duration b) { return a.ps_ <=> b.ps_; }

    friend Duration operator+(Duration a, Duration b) {
        std::int64_t r;
        if (__builtin_add_overflow(a.ps_, b.ps_, &r))
            throw OverflowError("duration addition overflow");
        return Duration(r);
    }
    friend Duration operator-(Duration a, Duration b) {
        std::int64_t r;
        if (__builtin_sub_overflow(a.ps_, b.ps_, &r))
            throw OverflowError("duration subtraction overflow");
        return Duration(r);
    }
    friend Duration operator*(std::int64_t k, Duration d) {
        std::int64_t r;
        if (__builtin_mul_overflow(k, d.ps_, &r))
            throw OverflowError("duration scaling overflow");
        return Duration(r);
    }
    friend Duration operator*(Duration d, std::int64_t k) { return k * d; }
    Duration& operator+=(Duration b) { return *this = *this + b; }
    Duration& operator-=(Duration b) { return *this = *this - b; }

    friend std::ostream& operator<<(std::ostream& os, Duration d) {
        return os << d.ps_ << "ps";
    }

  private:
    static Duration scaled(std::int64_t v, std::int64_t unit) {
        std::int64_t r;
        if (__builtin_mul_overflow(v, unit, &r))
            throw OverflowError("duration literal overflow");
        return Duration(r);
    }
    std::int64_t ps_ = 0;
};

// ceil(t / period), for the ceiling terms of response-time recurrences.
inline std::int64_t ceil_div(Duration t, Duration period) {
    if (!period.is_positive()) throw DomainError("ceil_div: period must be positive");
    if (t.count() <= 0) return 0;
    return (t.count() + period.count() - 1) / period.count();
}

inline std::int64_t floor_div(Duration t, Duration period) {
    if (!period.is_positive()) throw DomainError("floor_div: period must be positive");
    if (t.count() <= 0) return 0;
    return t.count() / period.count();
}

// Exact C/T style ratio.
inline Rational ratio(Duration num, Duration den) {
    if (!den.is_positive()) throw DomainError("ratio: denominator must be positive");
    return Rational(num.count(), den.count());
}

// Utilization value that may be infinite ("no feasible allocation").
struct Util {
    Rational value{};
    bool infinite = false;

    static Util inf() { return Util{Rational{}, true}; }
    static Util of(Rational r) { return Util{std::move(r), false}; }

    friend bool operator<(const Util& a, const Util& b) {
        if (a.infinite) return false;
        if (b.infinite) return true;
        return a.value < b.value;
    }
    friend bool operator<=(const Util& a, const Util& b) { return !(b < a); }
    friend bool operator==(const Util& a, const Util& b) {
        return a.infinite == b.infinite && (a.infinite || a.value == b.value);
    }
};

inline double to_double(const Rational& r) {
    return r.convert_to<double>();
}

}  // namespace rtsched
