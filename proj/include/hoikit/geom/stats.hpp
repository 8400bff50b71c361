#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hoikit/geom/core.hpp"

namespace hoikit::geom {

/// Linear-interpolation quantile of a sample: with the values sorted,
/// q maps to position q*(n-1) and the result interpolates between the
/// bracketing order statistics.
inline double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw Error("empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile q outside [0,1]");
    for (double v : values)
        if (!std::isfinite(v)) throw Error("quantile sample has non-finite values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(const std::vector<double>& values, double q) {
    return quantile(std::span<const double>(values), q);
}

}  // namespace hoikit::geom
