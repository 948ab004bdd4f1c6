#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace protofs {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major array of doubles with optional gradient storage.
///
/// A Tensor is a shared handle: copies alias the same buffer, which is what
/// lets the tape accumulate gradients into parameters. Use clone() for an
/// independent deep copy. The shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    /// Two-dimensional tensor from nested rows; all rows must share a length.
    static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;

    std::span<double> data();
    std::span<const double> data() const;
    double item() const;
    double operator[](std::size_t i) const { return data()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    bool has_grad() const;
    /// Empty span when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    /// Gradient buffer, allocated as zeros on first access. Gradients are
    /// bookkeeping on the shared buffer, so this is available on const handles.
    std::span<double> grad_mut() const;
    void zero_grad();
    void clear_grad();

    /// Deep copy of the values; the copy has no gradient and no tape history.
    Tensor clone() const;

    /// Row-major matrix view of the flat buffer.
    MatrixMap as_matrix(std::size_t rows, std::size_t cols);
    ConstMatrixMap as_matrix(std::size_t rows, std::size_t cols) const;

    /// Identity of the underlying buffer.
    const void* id() const { return impl_.get(); }

private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

} // namespace protofs
