#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "protofs/diff/tape.hpp"
#include "protofs/diff/tensor.hpp"

namespace protofs {

enum class RunMode { Train, Eval };

/// Per-channel running statistics carried by a batch-norm layer.
struct BatchNormStats {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    static BatchNormStats fresh(std::size_t channels) {
        return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
    }
};

struct BatchNormOptions {
    double eps = 1e-5;
    double momentum = 0.1;
};

// Every op records a backward rule on `tape` when the tape is recording and
// any input requires a gradient. Shape errors throw DimensionError.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// x[B,I] * w[I,O] + b[O].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Stride-1, zero-padding-1 cross-correlation: x[B,Cin,H,W], kernels[Cout,Cin,3,3], bias[Cout].
Tensor conv2d_3x3(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias);

/// Normalizes x[B,C,...] per channel over the batch and trailing dims with the
/// biased batch variance, then updates `running` with the unbiased variance.
/// Requires B >= 2.
Tensor batchnorm_train(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       BatchNormStats& running, const BatchNormOptions& options = {});
Tensor batchnorm_eval(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const BatchNormStats& running, const BatchNormOptions& options = {});
Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormStats& running, RunMode mode, const BatchNormOptions& options = {});

Tensor relu(Tape& tape, const Tensor& x);

/// Non-overlapping 2x2 max over x[B,C,H,W]; a trailing odd row or column is
/// dropped. The gradient goes to the first row-major maximum of each window.
Tensor maxpool2(Tape& tape, const Tensor& x);

Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
/// Rows [begin, begin+count) along the leading axis.
Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count);
Tensor scale(Tape& tape, const Tensor& x, double factor);
/// Elementwise product of equally shaped tensors.
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sum(Tape& tape, const Tensor& x);

/// out[i,j] = sum_d (a[i,d] - b[j,d])^2, accumulated in increasing d.
Tensor sq_dist_matrix(Tape& tape, const Tensor& a, const Tensor& b);

/// Row-wise log-softmax of x[B,K], stabilized by subtracting the row max.
Tensor log_softmax(Tape& tape, const Tensor& x);

/// -mean_b logp[b, targets[b]]. Requires K >= 2 and targets in [0, K).
Tensor nll_loss(Tape& tape, const Tensor& logp, std::span<const int> targets);

} // namespace protofs
