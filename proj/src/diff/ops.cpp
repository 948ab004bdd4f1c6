#include "protofs/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protofs/core/errors.hpp"

namespace protofs {

namespace {

using Eigen::Index;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                             ", got " + shape_string(t.shape()));
    }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
}

Tensor make_output(Shape shape, std::vector<double> data, bool tracked) {
    return Tensor(std::move(shape), std::move(data), tracked);
}

// Unfolds one sample x[Cin,H,W] into columns [Cin*9, H*W] with zero padding.
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, RowMatrix& cols) {
    cols.setZero(static_cast<Index>(cin * 9), static_cast<Index>(h * w));
    for (std::size_t c = 0; c < cin; ++c) {
        const double* plane = x + c * h * w;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const auto row = static_cast<Index>(c * 9 + ky * 3 + kx);
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const long sx = static_cast<long>(xx + kx) - 1;
                        if (sx < 0 || sx >= static_cast<long>(w)) continue;
                        cols(row, static_cast<Index>(y * w + xx)) = plane[sy * static_cast<long>(w) + sx];
                    }
                }
            }
        }
    }
}

void col2im_add(const RowMatrix& cols, std::size_t cin, std::size_t h, std::size_t w, double* dx) {
    for (std::size_t c = 0; c < cin; ++c) {
        double* plane = dx + c * h * w;
        for (std::size_t ky = 0; ky < 3; ++ky) {
            for (std::size_t kx = 0; kx < 3; ++kx) {
                const auto row = static_cast<Index>(c * 9 + ky * 3 + kx);
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y + ky) - 1;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        const long sx = static_cast<long>(xx + kx) - 1;
                        if (sx < 0 || sx >= static_cast<long>(w)) continue;
                        plane[sy * static_cast<long>(w) + sx] += cols(row, static_cast<Index>(y * w + xx));
                    }
                }
            }
        }
    }
}

struct ChannelLayout {
    std::size_t batch;
    std::size_t channels;
    std::size_t inner;
};

ChannelLayout channel_layout(const Tensor& x, const char* op) {
    if (x.rank() < 2) throw DimensionError(std::string(op) + ": input must be [B,C,...], got " + shape_string(x.shape()));
    return {x.dim(0), x.dim(1), x.size() / (x.dim(0) * x.dim(1))};
}

void check_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t channels) {
    if (gamma.size() != channels) mismatch("batchnorm", x, gamma);
    if (beta.size() != channels) mismatch("batchnorm", x, beta);
}

} // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul", "lhs");
    require_rank(b, 2, "matmul", "rhs");
    if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const bool tracked = tape.wants({&a, &b});
    std::vector<double> data(m * n);
    MatrixMap(data.data(), static_cast<Index>(m), static_cast<Index>(n)).noalias() =
        a.as_matrix(m, k) * b.as_matrix(k, n);
    Tensor out = make_output({m, n}, std::move(data), tracked);
    if (tracked) {
        tape.record("matmul", {a, b}, out, [a, b, out, m, k, n]() mutable {
            const auto g = ConstMatrixMap(out.grad().data(), static_cast<Index>(m), static_cast<Index>(n));
            if (a.requires_grad())
                MatrixMap(a.grad_mut().data(), static_cast<Index>(m), static_cast<Index>(k)).noalias() +=
                    g * b.as_matrix(k, n).transpose();
            if (b.requires_grad())
                MatrixMap(b.grad_mut().data(), static_cast<Index>(k), static_cast<Index>(n)).noalias() +=
                    a.as_matrix(m, k).transpose() * g;
        });
    }
    return out;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) mismatch("linear", x, w);
    if (b.size() != w.dim(1)) mismatch("linear", w, b);
    const auto rows = x.dim(0), in = x.dim(1), outc = w.dim(1);
    const bool tracked = tape.wants({&x, &w, &b});
    std::vector<double> data(rows * outc);
    MatrixMap y(data.data(), static_cast<Index>(rows), static_cast<Index>(outc));
    y.noalias() = x.as_matrix(rows, in) * w.as_matrix(in, outc);
    y.rowwise() += b.as_matrix(1, outc).row(0);
    Tensor out = make_output({rows, outc}, std::move(data), tracked);
    if (tracked) {
        tape.record("linear", {x, w, b}, out, [x, w, b, out, rows, in, outc]() mutable {
            const auto g = ConstMatrixMap(out.grad().data(), static_cast<Index>(rows), static_cast<Index>(outc));
            if (x.requires_grad())
                MatrixMap(x.grad_mut().data(), static_cast<Index>(rows), static_cast<Index>(in)).noalias() +=
                    g * w.as_matrix(in, outc).transpose();
            if (w.requires_grad())
                MatrixMap(w.grad_mut().data(), static_cast<Index>(in), static_cast<Index>(outc)).noalias() +=
                    x.as_matrix(rows, in).transpose() * g;
            if (b.requires_grad())
                MatrixMap(b.grad_mut().data(), 1, static_cast<Index>(outc)) += g.colwise().sum();
        });
    }
    return out;
}

Tensor conv2d_3x3(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias) {
    require_rank(x, 4, "conv2d_3x3", "input");
    require_rank(kernels, 4, "conv2d_3x3", "kernels");
    if (kernels.dim(1) != x.dim(1) || kernels.dim(2) != 3 || kernels.dim(3) != 3) mismatch("conv2d_3x3", x, kernels);
    if (bias.size() != kernels.dim(0)) mismatch("conv2d_3x3", kernels, bias);
    const auto batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3), cout = kernels.dim(0);
    const auto plane = h * w;
    const bool tracked = tape.wants({&x, &kernels, &bias});

    std::vector<double> data(batch * cout * plane);
    const auto kmat = kernels.as_matrix(cout, cin * 9);
    const auto bvec = bias.as_matrix(cout, 1);
    RowMatrix cols;
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(x.data().data() + n * cin * plane, cin, h, w, cols);
        MatrixMap y(data.data() + n * cout * plane, static_cast<Index>(cout), static_cast<Index>(plane));
        y.noalias() = kmat * cols;
        y.colwise() += bvec.col(0);
    }
    Tensor out = make_output({batch, cout, h, w}, std::move(data), tracked);
    if (tracked) {
        tape.record("conv2d_3x3", {x, kernels, bias}, out, [x, kernels, bias, out, batch, cin, h, w, cout]() mutable {
            const auto plane = h * w;
            const auto kmat = kernels.as_matrix(cout, cin * 9);
            RowMatrix cols;
            RowMatrix dcols;
            for (std::size_t n = 0; n < batch; ++n) {
                const ConstMatrixMap g(out.grad().data() + n * cout * plane, static_cast<Index>(cout),
                                       static_cast<Index>(plane));
                if (kernels.requires_grad()) {
                    im2col(x.data().data() + n * cin * plane, cin, h, w, cols);
                    MatrixMap(kernels.grad_mut().data(), static_cast<Index>(cout), static_cast<Index>(cin * 9))
                        .noalias() += g * cols.transpose();
                }
                if (bias.requires_grad())
                    MatrixMap(bias.grad_mut().data(), static_cast<Index>(cout), 1) += g.rowwise().sum();
                if (x.requires_grad()) {
                    dcols.noalias() = kmat.transpose() * g;
                    col2im_add(dcols, cin, h, w, x.grad_mut().data() + n * cin * plane);
                }
            }
        });
    }
    return out;
}

Tensor batchnorm_train(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       BatchNormStats& running, const BatchNormOptions& options) {
    const auto [batch, channels, inner] = channel_layout(x, "batchnorm");
    check_affine(x, gamma, beta, channels);
    if (batch < 2) {
        throw DegenerateBatchError("batchnorm: train mode needs a batch of at least 2, got " + std::to_string(batch));
    }
    if (!(options.eps > 0.0)) throw ContractError("batchnorm: eps must be positive");
    if (running.running_mean.size() != channels || running.running_var.size() != channels) {
        throw DimensionError("batchnorm: running statistics do not match " + std::to_string(channels) + " channels");
    }
    const double count = static_cast<double>(batch * inner);
    const auto xs = x.data();
    std::vector<double> mean(channels, 0.0), inv_std(channels, 0.0), xhat(x.size());
    std::vector<double> data(x.size());
    for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t i = 0; i < inner; ++i) s += xs[(n * channels + c) * inner + i];
        const double mu = s / count;
        double ss = 0.0;
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t i = 0; i < inner; ++i) {
                const double d = xs[(n * channels + c) * inner + i] - mu;
                ss += d * d;
            }
        const double var = ss / count;
        mean[c] = mu;
        inv_std[c] = 1.0 / std::sqrt(var + options.eps);
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t i = 0; i < inner; ++i) {
                const auto idx = (n * channels + c) * inner + i;
                xhat[idx] = (xs[idx] - mu) * inv_std[c];
                data[idx] = gamma[c] * xhat[idx] + beta[c];
            }
        running.running_mean[c] = (1.0 - options.momentum) * running.running_mean[c] + options.momentum * mu;
        running.running_var[c] =
            (1.0 - options.momentum) * running.running_var[c] + options.momentum * var * count / (count - 1.0);
    }
    const bool tracked = tape.wants({&x, &gamma, &beta});
    Tensor out = make_output(x.shape(), std::move(data), tracked);
    if (tracked) {
        tape.record("batchnorm_train", {x, gamma, beta}, out,
                    [x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels,
                     inner, count]() mutable {
                        const auto g = out.grad();
                        for (std::size_t c = 0; c < channels; ++c) {
                            double sum_g = 0.0, sum_gx = 0.0;
                            for (std::size_t n = 0; n < batch; ++n)
                                for (std::size_t i = 0; i < inner; ++i) {
                                    const auto idx = (n * channels + c) * inner + i;
                                    sum_g += g[idx];
                                    sum_gx += g[idx] * xhat[idx];
                                }
                            if (gamma.requires_grad()) gamma.grad_mut()[c] += sum_gx;
                            if (beta.requires_grad()) beta.grad_mut()[c] += sum_g;
                            if (x.requires_grad()) {
                                auto dx = x.grad_mut();
                                const double k = gamma[c] * inv_std[c] / count;
                                for (std::size_t n = 0; n < batch; ++n)
                                    for (std::size_t i = 0; i < inner; ++i) {
                                        const auto idx = (n * channels + c) * inner + i;
                                        dx[idx] += k * (count * g[idx] - sum_g - xhat[idx] * sum_gx);
                                    }
                            }
                        }
                    });
    }
    return out;
}

Tensor batchnorm_eval(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const BatchNormStats& running, const BatchNormOptions& options) {
    const auto [batch, channels, inner] = channel_layout(x, "batchnorm");
    check_affine(x, gamma, beta, channels);
    if (!(options.eps > 0.0)) throw ContractError("batchnorm: eps must be positive");
    if (running.running_mean.size() != channels || running.running_var.size() != channels) {
        throw DimensionError("batchnorm: running statistics do not match " + std::to_string(channels) + " channels");
    }
    std::vector<double> inv_std(channels), data(x.size());
    const auto xs = x.data();
    for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(running.running_var[c] + options.eps);
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
                const auto idx = (n * channels + c) * inner + i;
                data[idx] = gamma[c] * (xs[idx] - running.running_mean[c]) * inv_std[c] + beta[c];
            }
    const bool tracked = tape.wants({&x, &gamma, &beta});
    Tensor out = make_output(x.shape(), std::move(data), tracked);
    if (tracked) {
        tape.record("batchnorm_eval", {x, gamma, beta}, out,
                    [x, gamma, beta, out, inv_std = std::move(inv_std), mean = running.running_mean, batch,
                     channels, inner]() mutable {
                        const auto g = out.grad();
                        const auto xs = x.data();
                        for (std::size_t n = 0; n < batch; ++n)
                            for (std::size_t c = 0; c < channels; ++c)
                                for (std::size_t i = 0; i < inner; ++i) {
                                    const auto idx = (n * channels + c) * inner + i;
                                    const double xh = (xs[idx] - mean[c]) * inv_std[c];
                                    if (gamma.requires_grad()) gamma.grad_mut()[c] += g[idx] * xh;
                                    if (beta.requires_grad()) beta.grad_mut()[c] += g[idx];
                                    if (x.requires_grad()) x.grad_mut()[idx] += g[idx] * gamma[c] * inv_std[c];
                                }
                    });
    }
    return out;
}

Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& running,
                 RunMode mode, const BatchNormOptions& options) {
    return mode == RunMode::Train ? batchnorm_train(tape, x, gamma, beta, running, options)
                                  : batchnorm_eval(tape, x, gamma, beta, running, options);
}

Tensor relu(Tape& tape, const Tensor& x) {
    std::vector<double> data(x.data().begin(), x.data().end());
    for (auto& v : data) v = v > 0.0 ? v : 0.0;
    const bool tracked = tape.wants({&x});
    Tensor out = make_output(x.shape(), std::move(data), tracked);
    if (tracked) {
        tape.record("relu", {x}, out, [x, out]() mutable {
            const auto g = out.grad();
            const auto xs = x.data();
            auto dx = x.grad_mut();
            for (std::size_t i = 0; i < dx.size(); ++i)
                if (xs[i] > 0.0) dx[i] += g[i];
        });
    }
    return out;
}

Tensor maxpool2(Tape& tape, const Tensor& x) {
    require_rank(x, 4, "maxpool2", "input");
    const auto batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h < 2 || w < 2) throw DimensionError("maxpool2: spatial size must be at least 2x2, got " + shape_string(x.shape()));
    const auto oh = h / 2, ow = w / 2;
    std::vector<double> data(batch * channels * oh * ow);
    std::vector<std::size_t> argmax(data.size());
    const auto xs = x.data();
    for (std::size_t p = 0; p < batch * channels; ++p) {
        const std::size_t in_base = p * h * w;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                std::size_t best = in_base + (2 * y) * w + 2 * xx;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const auto idx = in_base + (2 * y + dy) * w + 2 * xx + dx;
                        if (xs[idx] > xs[best]) best = idx;
                    }
                const auto o = (p * oh + y) * ow + xx;
                data[o] = xs[best];
                argmax[o] = best;
            }
    }
    const bool tracked = tape.wants({&x});
    Tensor out = make_output({batch, channels, oh, ow}, std::move(data), tracked);
    if (tracked) {
        tape.record("maxpool2", {x}, out, [x, out, argmax = std::move(argmax)]() mutable {
            const auto g = out.grad();
            auto dx = x.grad_mut();
            for (std::size_t o = 0; o < g.size(); ++o) dx[argmax[o]] += g[o];
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    }
    const bool tracked = tape.wants({&x});
    Tensor out = make_output(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), tracked);
    if (tracked) {
        tape.record("reshape", {x}, out, [x, out]() mutable {
            const auto g = out.grad();
            auto dx = x.grad_mut();
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
        });
    }
    return out;
}

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t count) {
    if (x.rank() < 1 || count == 0 || begin + count > x.dim(0)) {
        throw DimensionError("slice_rows: rows [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                             ") out of range for " + shape_string(x.shape()));
    }
    const auto stride = x.size() / x.dim(0);
    Shape shape = x.shape();
    shape[0] = count;
    const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(begin * stride);
    const bool tracked = tape.wants({&x});
    Tensor out = make_output(std::move(shape), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * stride)),
                             tracked);
    if (tracked) {
        tape.record("slice_rows", {x}, out, [x, out, offset = begin * stride]() mutable {
            const auto g = out.grad();
            auto dx = x.grad_mut();
            for (std::size_t i = 0; i < g.size(); ++i) dx[offset + i] += g[i];
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
    std::vector<double> data(x.data().begin(), x.data().end());
    for (auto& v : data) v *= factor;
    const bool tracked = tape.wants({&x});
    Tensor out = make_output(x.shape(), std::move(data), tracked);
    if (tracked) {
        tape.record("scale", {x}, out, [x, out, factor]() mutable {
            const auto g = out.grad();
            auto dx = x.grad_mut();
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * g[i];
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) mismatch("mul", a, b);
    std::vector<double> data(a.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = a[i] * b[i];
    const bool tracked = tape.wants({&a, &b});
    Tensor out = make_output(a.shape(), std::move(data), tracked);
    if (tracked) {
        tape.record("mul", {a, b}, out, [a, b, out]() mutable {
            const auto g = out.grad();
            if (a.requires_grad()) {
                auto da = a.grad_mut();
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b[i];
            }
            if (b.requires_grad()) {
                auto db = b.grad_mut();
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a[i];
            }
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const bool tracked = tape.wants({&x});
    Tensor out = make_output({1}, {s}, tracked);
    if (tracked) {
        tape.record("sum", {x}, out, [x, out]() mutable {
            const double g = out.grad()[0];
            for (auto& d : x.grad_mut()) d += g;
        });
    }
    return out;
}

Tensor sq_dist_matrix(Tape& tape, const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "sq_dist_matrix", "lhs");
    require_rank(b, 2, "sq_dist_matrix", "rhs");
    if (a.dim(1) != b.dim(1)) mismatch("sq_dist_matrix", a, b);
    const auto m = a.dim(0), n = b.dim(0), d = a.dim(1);
    const auto as = a.data(), bs = b.data();
    std::vector<double> data(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = as[i * d + k] - bs[j * d + k];
                s += diff * diff;
            }
            data[i * n + j] = s;
        }
    const bool tracked = tape.wants({&a, &b});
    Tensor out = make_output({m, n}, std::move(data), tracked);
    if (tracked) {
        tape.record("sq_dist_matrix", {a, b}, out, [a, b, out, m, n, d]() mutable {
            const auto g = out.grad();
            const auto as = a.data(), bs = b.data();
            std::span<double> da, db;
            if (a.requires_grad()) da = a.grad_mut();
            if (b.requires_grad()) db = b.grad_mut();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = 2.0 * g[i * n + j];
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = gij * (as[i * d + k] - bs[j * d + k]);
                        if (!da.empty()) da[i * d + k] += diff;
                        if (!db.empty()) db[j * d + k] -= diff;
                    }
                }
        });
    }
    return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
    require_rank(x, 2, "log_softmax", "input");
    const auto rows = x.dim(0), k = x.dim(1);
    const auto xs = x.data();
    std::vector<double> data(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xs.data() + r * k;
        const double mx = *std::max_element(row, row + k);
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += std::exp(row[c] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < k; ++c) data[r * k + c] = row[c] - lse;
    }
    const bool tracked = tape.wants({&x});
    Tensor out = make_output({rows, k}, std::move(data), tracked);
    if (tracked) {
        tape.record("log_softmax", {x}, out, [x, out, rows, k]() mutable {
            const auto g = out.grad();
            const auto y = out.data();
            auto dx = x.grad_mut();
            for (std::size_t r = 0; r < rows; ++r) {
                double gs = 0.0;
                for (std::size_t c = 0; c < k; ++c) gs += g[r * k + c];
                for (std::size_t c = 0; c < k; ++c) dx[r * k + c] += g[r * k + c] - std::exp(y[r * k + c]) * gs;
            }
        });
    }
    return out;
}

Tensor nll_loss(Tape& tape, const Tensor& logp, std::span<const int> targets) {
    require_rank(logp, 2, "nll_loss", "log-probabilities");
    const auto rows = logp.dim(0), k = logp.dim(1);
    if (k < 2) throw DimensionError("nll_loss: need at least 2 classes, got " + shape_string(logp.shape()));
    if (targets.size() != rows) {
        throw DimensionError("nll_loss: " + std::to_string(targets.size()) + " targets for " + shape_string(logp.shape()));
    }
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= k) {
            throw LabelError("nll_loss: target " + std::to_string(targets[r]) + " at row " + std::to_string(r) +
                             " outside [0," + std::to_string(k) + ")");
        }
        s += logp[r * k + static_cast<std::size_t>(targets[r])];
    }
    const bool tracked = tape.wants({&logp});
    Tensor out = make_output({1}, {-s / static_cast<double>(rows)}, tracked);
    if (tracked) {
        tape.record("nll_loss", {logp}, out,
                    [logp, out, rows, k, t = std::vector<int>(targets.begin(), targets.end())]() mutable {
                        const double g = out.grad()[0] / static_cast<double>(rows);
                        auto dl = logp.grad_mut();
                        for (std::size_t r = 0; r < rows; ++r) dl[r * k + static_cast<std::size_t>(t[r])] -= g;
                    });
    }
    return out;
}

} // namespace protofs
