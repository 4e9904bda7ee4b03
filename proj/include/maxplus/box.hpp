#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "maxplus/errors.hpp"

namespace maxplus {

// Axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d]. Doubles as the state
// space (saturation target) and as a grid cell for bin-type features.
struct Box {
    std::vector<double> lo, hi;

    Box() = default;
    Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size())
            throw validation_error("Box: lo/hi dimension mismatch");
        for (std::size_t d = 0; d < lo.size(); ++d)
            if (!(lo[d] < hi[d]))
                throw validation_error("Box: requires lo < hi in every dimension");
    }

    std::size_t dim() const { return lo.size(); }

    bool contains(std::span<const double> x) const {
        for (std::size_t d = 0; d < dim(); ++d)
            if (x[d] < lo[d] || x[d] > hi[d]) return false;
        return true;
    }

    // Half-open membership, so bins [a,b) x ... tile a grid without overlap.
    bool contains_half_open(std::span<const double> x) const {
        for (std::size_t d = 0; d < dim(); ++d)
            if (x[d] < lo[d] || x[d] >= hi[d]) return false;
        return true;
    }

    std::vector<double> clamped(std::span<const double> x) const {
        std::vector<double> y(x.begin(), x.end());
        for (std::size_t d = 0; d < dim(); ++d)
            y[d] = std::min(std::max(y[d], lo[d]), hi[d]);
        return y;
    }

    // Squared Euclidean distance from x to the box; 0 inside. Equals
    // ||x - clamp(x)||^2 but without the allocation.
    double squared_distance(std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t d = 0; d < dim(); ++d) {
            const double gap = x[d] < lo[d] ? lo[d] - x[d] : (x[d] > hi[d] ? x[d] - hi[d] : 0.0);
            s += gap * gap;
        }
        return s;
    }

    std::vector<double> center() const {
        std::vector<double> c(dim());
        for (std::size_t d = 0; d < dim(); ++d) c[d] = 0.5 * (lo[d] + hi[d]);
        return c;
    }

    bool operator==(const Box&) const = default;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double g = a[d] - b[d];
        s += g * g;
    }
    return s;
}

} // namespace maxplus
