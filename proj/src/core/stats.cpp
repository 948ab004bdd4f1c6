#include "protofs/core/stats.hpp"

#include <cmath>

namespace protofs {

double ci95(std::span<const double> values) {
    const auto n = values.size();
    if (n < 2) return 0.0;
    // Deviations from the first value keep identical inputs exactly at zero.
    const double origin = values[0];
    double shift = 0.0;
    for (double v : values) shift += v - origin;
    shift /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - origin - shift) * (v - origin - shift);
    return 1.96 * std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

} // namespace protofs
