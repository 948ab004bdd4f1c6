#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "protofs/core/stats.hpp"

namespace protofs::eval {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

using protofs::ci95;

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Set when the ratio was 0/0 and reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
    std::int64_t support = 0;
};

struct Prf1Report {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    /// Classes without true samples; left out of the macro averages.
    std::vector<std::size_t> excluded;
};

/// Rows are true classes, columns predicted classes.
Prf1Report prf1_counts(const CountMatrix& confusion);

template <typename Derived>
Prf1Report prf1(const Eigen::MatrixBase<Derived>& confusion) {
    return prf1_counts(confusion.template cast<std::int64_t>());
}

} // namespace protofs::eval
