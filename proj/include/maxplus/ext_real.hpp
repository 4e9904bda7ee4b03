#pragma once

#include <cassert>
#include <cmath>
#include <limits>

#include "maxplus/errors.hpp"

namespace maxplus {

// A scalar of the max-plus semiring: a finite real or -infinity (the
// semiring zero). +infinity and NaN are never representable; constructing
// one trips an assert in debug builds, and negate() refuses -infinity so
// no operation can manufacture +infinity downstream.
//
// The layout is a bare double, so hot loops may work on .v directly;
// IEEE arithmetic already gives the two semiring laws for free:
//   max(a, -inf) = a          (semiring addition, neutral -inf)
//   a + (-inf)   = -inf       (semiring multiplication, absorbing -inf)
struct ExtReal {
    double v = neg_inf_raw();

    static constexpr double neg_inf_raw() {
        return -std::numeric_limits<double>::infinity();
    }

    constexpr ExtReal() = default;
    constexpr ExtReal(double x) : v(x) {
        assert(!(x != x) && x != std::numeric_limits<double>::infinity());
    }

    static constexpr ExtReal neg_inf() { return ExtReal{}; }

    constexpr bool is_neg_inf() const { return v == neg_inf_raw(); }
    constexpr bool finite() const { return !is_neg_inf(); }

    // Semiring multiplication.
    constexpr ExtReal operator+(ExtReal o) const { return ExtReal{v + o.v}; }

    // Additive inverse in the underlying reals; used by residuation, where
    // -(-inf) would mean +inf and a finite answer does not exist.
    ExtReal negate() const {
        if (is_neg_inf())
            throw solver_error("negate: -inf has no finite negation");
        return ExtReal{-v};
    }

    constexpr bool operator==(const ExtReal&) const = default;
    constexpr auto operator<=>(const ExtReal&) const = default;
};

// Semiring addition.
constexpr ExtReal mp_max(ExtReal a, ExtReal b) { return a.v >= b.v ? a : b; }

} // namespace maxplus
