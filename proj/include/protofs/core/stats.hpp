#pragma once

#include <span>

namespace protofs {

/// Half-width of the normal-approximation 95% interval: 1.96 * s / sqrt(n)
/// with the sample standard deviation. Zero for fewer than two values.
double ci95(std::span<const double> values);

} // namespace protofs
