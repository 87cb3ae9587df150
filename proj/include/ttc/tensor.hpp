#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ttc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::int64_t;
using MultiIndex = std::vector<Index>;

/// Raised when a computation would materialize state beyond the configured
/// dense-element cap. Maps to exit code 3 in the CLI.
struct CapExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised on numerical failure (SVD non-convergence, non-finite state).
/// Maps to exit code 2 in the CLI.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Default cap on the number of elements of any dense materialization.
inline constexpr std::uint64_t kDefaultDenseCap = 100'000'000;

/// Mode extents (I_1, ..., I_K) of an order-K tensor.
///
/// Linearization is row-major with the last index fastest, fixed globally;
/// every unfolding and vectorization in the library follows it.
class Shape {
public:
    explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("Shape: order must be at least 2");
        std::uint64_t total = 1;
        for (Index d : dims_) {
            if (d < 1) throw std::invalid_argument("Shape: every mode extent must be positive");
            if (total > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(d))
                throw std::invalid_argument("Shape: element count overflows 64 bits");
            total *= static_cast<std::uint64_t>(d);
        }
        num_elements_ = total;
    }

    Index order() const { return static_cast<Index>(dims_.size()); }
    Index dim(Index k) const { return dims_[static_cast<std::size_t>(k)]; }
    const std::vector<Index>& dims() const { return dims_; }
    std::uint64_t num_elements() const { return num_elements_; }

    /// Product of the first `count` mode extents (I_{<= count}).
    std::uint64_t leading_product(Index count) const {
        std::uint64_t p = 1;
        for (Index k = 0; k < count; ++k) p *= static_cast<std::uint64_t>(dims_[static_cast<std::size_t>(k)]);
        return p;
    }

    /// Product of the mode extents after the first `count` (I_{count <}).
    std::uint64_t trailing_product(Index count) const {
        std::uint64_t p = 1;
        for (Index k = count; k < order(); ++k) p *= static_cast<std::uint64_t>(dims_[static_cast<std::size_t>(k)]);
        return p;
    }

    std::uint64_t linearize(std::span<const Index> idx) const {
        check_index(idx);
        std::uint64_t lin = 0;
        for (Index k = 0; k < order(); ++k)
            lin = lin * static_cast<std::uint64_t>(dims_[static_cast<std::size_t>(k)]) +
                  static_cast<std::uint64_t>(idx[static_cast<std::size_t>(k)]);
        return lin;
    }

    MultiIndex delinearize(std::uint64_t lin) const {
        MultiIndex idx(static_cast<std::size_t>(order()));
        for (Index k = order() - 1; k >= 0; --k) {
            std::uint64_t d = static_cast<std::uint64_t>(dims_[static_cast<std::size_t>(k)]);
            idx[static_cast<std::size_t>(k)] = static_cast<Index>(lin % d);
            lin /= d;
        }
        return idx;
    }

    void check_index(std::span<const Index> idx) const {
        if (static_cast<Index>(idx.size()) != order())
            throw std::out_of_range("index order does not match tensor order");
        for (Index k = 0; k < order(); ++k) {
            Index i = idx[static_cast<std::size_t>(k)];
            if (i < 0 || i >= dims_[static_cast<std::size_t>(k)])
                throw std::out_of_range("index out of range for mode " + std::to_string(k + 1));
        }
    }

    friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }
    friend bool operator!=(const Shape& a, const Shape& b) { return !(a == b); }

private:
    std::vector<Index> dims_;
    std::uint64_t num_elements_ = 0;
};

/// Explicit order-K tensor stored as a flat row-major array.
class DenseTensor {
public:
    explicit DenseTensor(Shape shape, std::uint64_t cap = kDefaultDenseCap)
        : shape_(std::move(shape)) {
        if (shape_.num_elements() > cap)
            throw CapExceededError("dense tensor of " + std::to_string(shape_.num_elements()) +
                                   " elements exceeds the cap of " + std::to_string(cap));
        values_ = Vector::Zero(static_cast<Eigen::Index>(shape_.num_elements()));
    }

    DenseTensor(Shape shape, Vector values, std::uint64_t cap = kDefaultDenseCap)
        : DenseTensor(std::move(shape), cap) {
        if (static_cast<std::uint64_t>(values.size()) != shape_.num_elements())
            throw std::invalid_argument("DenseTensor: value count does not match shape");
        values_ = std::move(values);
    }

    const Shape& shape() const { return shape_; }
    const Vector& values() const { return values_; }
    Vector& values() { return values_; }

    double operator[](std::uint64_t flat) const { return values_[static_cast<Eigen::Index>(flat)]; }
    double& operator[](std::uint64_t flat) { return values_[static_cast<Eigen::Index>(flat)]; }

    double at(std::span<const Index> idx) const { return values_[static_cast<Eigen::Index>(shape_.linearize(idx))]; }
    double& at(std::span<const Index> idx) { return values_[static_cast<Eigen::Index>(shape_.linearize(idx))]; }

    double frobenius_norm() const { return values_.norm(); }

private:
    Shape shape_;
    Vector values_;
};

namespace detail {

inline void check_split(const Shape& shape, Index k) {
    if (k < 1 || k >= shape.order())
        throw std::out_of_range("unfolding split k must satisfy 1 <= k <= K-1");
}

}  // namespace detail

/// Unfolds a flat row-major value vector at split k without going through a
/// DenseTensor. Rows enumerate the first k modes, columns the rest.
inline Matrix unfold_vec(const Vector& values, const Shape& shape, Index k) {
    detail::check_split(shape, k);
    auto rows = static_cast<Eigen::Index>(shape.leading_product(k));
    auto cols = static_cast<Eigen::Index>(shape.trailing_product(k));
    using RowMajorMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    return RowMajorMap(values.data(), rows, cols);
}

/// Q_k(X): the I_{<=k} x I_{k<} unfolding of X. fold() inverts it exactly.
inline Matrix unfold(const DenseTensor& x, Index k) { return unfold_vec(x.values(), x.shape(), k); }

/// Flattens an unfolding back into tensor vectorization order (V_k).
inline Vector fold_vec(const Matrix& m, const Shape& shape, Index k) {
    detail::check_split(shape, k);
    if (static_cast<std::uint64_t>(m.rows()) != shape.leading_product(k) ||
        static_cast<std::uint64_t>(m.cols()) != shape.trailing_product(k))
        throw std::invalid_argument("fold: matrix dimensions do not match the split");
    Vector v(static_cast<Eigen::Index>(shape.num_elements()));
    using RowMajorMap =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    RowMajorMap(v.data(), m.rows(), m.cols()) = m;
    return v;
}

inline DenseTensor fold(const Matrix& m, Index k, const Shape& shape) {
    return DenseTensor(shape, fold_vec(m, shape, k));
}

inline double frobenius_distance(const DenseTensor& a, const DenseTensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("frobenius_distance: shape mismatch");
    return (a.values() - b.values()).norm();
}

/// Row-major vectorization of a matrix and its inverse.
inline Vector vec_rowmajor(const Matrix& m) {
    Vector v(m.size());
    using RowMajorMap =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    RowMajorMap(v.data(), m.rows(), m.cols()) = m;
    return v;
}

inline Matrix mat_rowmajor(const Vector& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw std::invalid_argument("mat_rowmajor: size mismatch");
    using RowMajorMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    return RowMajorMap(v.data(), rows, cols);
}

}  // namespace ttc
