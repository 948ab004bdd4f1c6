#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "protofs/diff/tape.hpp"

namespace protofs {

/// Builds a scalar loss on the given tape. Must be deterministic.
using LossFn = std::function<Tensor(Tape&)>;

struct FiniteDiffOptions {
    double h = 1e-5;
    /// 0 checks every coordinate; otherwise at most this many per tensor,
    /// chosen by `seed`.
    std::size_t max_coords_per_tensor = 0;
    std::uint64_t seed = 0;
};

struct FiniteDiffReport {
    double max_relative_error = 0.0;
    std::size_t coordinates_checked = 0;
    std::size_t worst_tensor = 0;
    std::size_t worst_coordinate = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares analytic gradients with central differences (f(t+h)-f(t-h))/2h.
/// Error per coordinate is |a-n| / max(1e-8, |a|+|n|). Parameter values are
/// restored afterwards and their gradients hold the analytic result.
FiniteDiffReport finite_diff_report(std::span<Tensor> params, const LossFn& loss_fn,
                                    const FiniteDiffOptions& options = {});

double finite_diff_check(std::span<Tensor> params, const LossFn& loss_fn, const FiniteDiffOptions& options = {});

} // namespace protofs
