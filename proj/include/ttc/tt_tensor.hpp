#pragma once

#include "ttc/rng.hpp"
#include "ttc/tensor.hpp"

#include <cmath>
#include <utility>

namespace ttc {

/// Tensor train: K order-3 cores, core k of extents (I_k, R_{k-1}, R_k) with
/// R_0 = R_K = 1. Core k is stored as I_k slice matrices of size
/// R_{k-1} x R_k; element (i_1,...,i_K) is the product of the K slices picked
/// by the index. Core vectorizations are row-major over (i, r_left, r_right).
class TTTensor {
public:
    TTTensor(Shape shape, std::vector<Index> internal_ranks)
        : shape_(std::move(shape)), ranks_(full_ranks(shape_, std::move(internal_ranks))) {
        cores_.resize(static_cast<std::size_t>(order()));
        for (Index c = 0; c < order(); ++c) {
            auto& core = cores_[static_cast<std::size_t>(c)];
            core.assign(static_cast<std::size_t>(shape_.dim(c)),
                        Matrix::Zero(rank(c), rank(c + 1)));
        }
    }

    Index order() const { return shape_.order(); }
    const Shape& shape() const { return shape_; }

    /// R_k for k = 0..K (boundary ranks included, both 1).
    Index rank(Index k) const { return ranks_[static_cast<std::size_t>(k)]; }

    /// The internal TT rank tuple (R_1, ..., R_{K-1}).
    std::vector<Index> internal_ranks() const {
        return {ranks_.begin() + 1, ranks_.end() - 1};
    }

    const Matrix& slice(Index core, Index i) const {
        return cores_[static_cast<std::size_t>(core)][static_cast<std::size_t>(i)];
    }
    Matrix& slice(Index core, Index i) {
        return cores_[static_cast<std::size_t>(core)][static_cast<std::size_t>(i)];
    }

    Index core_size(Index c) const { return shape_.dim(c) * rank(c) * rank(c + 1); }

    /// vec(G_c), row-major over (i, r_left, r_right).
    Vector core_vec(Index c) const {
        Vector v(core_size(c));
        Index pos = 0;
        for (Index i = 0; i < shape_.dim(c); ++i) {
            const Matrix& m = slice(c, i);
            for (Index r1 = 0; r1 < m.rows(); ++r1)
                for (Index r2 = 0; r2 < m.cols(); ++r2) v[pos++] = m(r1, r2);
        }
        return v;
    }

    void set_core_from_vec(Index c, const Vector& v) {
        if (v.size() != core_size(c))
            throw std::invalid_argument("set_core_from_vec: wrong length");
        Index pos = 0;
        for (Index i = 0; i < shape_.dim(c); ++i) {
            Matrix& m = slice(c, i);
            for (Index r1 = 0; r1 < m.rows(); ++r1)
                for (Index r2 = 0; r2 < m.cols(); ++r2) m(r1, r2) = v[pos++];
        }
    }

    double core_frobenius_norm(Index c) const {
        double sq = 0;
        for (Index i = 0; i < shape_.dim(c); ++i) sq += slice(c, i).squaredNorm();
        return std::sqrt(sq);
    }

    void scale_core(Index c, double factor) {
        for (Index i = 0; i < shape_.dim(c); ++i) slice(c, i) *= factor;
    }

private:
    static std::vector<Index> full_ranks(const Shape& shape, std::vector<Index> internal) {
        if (static_cast<Index>(internal.size()) != shape.order() - 1)
            throw std::invalid_argument("TTTensor: expected K-1 internal ranks");
        for (Index r : internal)
            if (r < 1) throw std::invalid_argument("TTTensor: ranks must be positive");
        std::vector<Index> full;
        full.reserve(internal.size() + 2);
        full.push_back(1);
        full.insert(full.end(), internal.begin(), internal.end());
        full.push_back(1);
        return full;
    }

    Shape shape_;
    std::vector<Index> ranks_;
    std::vector<std::vector<Matrix>> cores_;
};

/// Row vector [G_1]_{j_1} ... [G_{k-1}]_{j_{k-1}} of length R_{k-1}; the empty
/// product at k = 1 is (1). `idx` must cover at least the first k-1 modes.
inline Eigen::RowVectorXd left_chain(const TTTensor& tt, Index k, std::span<const Index> idx) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (Index c = 0; c < k - 1; ++c) v = v * tt.slice(c, idx[static_cast<std::size_t>(c)]);
    return v;
}

/// Column vector [G_{k+1}]_{j_{k+1}} ... [G_K]_{j_K} of length R_k; the empty
/// product at k = K is (1). `idx` is the full multi-index (modes k.. are read).
inline Vector right_chain(const TTTensor& tt, Index k, std::span<const Index> idx) {
    Vector v = Vector::Ones(1);
    for (Index c = tt.order() - 1; c >= k; --c)
        v = tt.slice(c, idx[static_cast<std::size_t>(c)]) * v;
    return v;
}

/// Element (i_1,...,i_K) as the collapsed product of core slices.
inline double tt_element(const TTTensor& tt, std::span<const Index> idx) {
    tt.shape().check_index(idx);
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (Index c = 0; c < tt.order(); ++c)
        v = v * tt.slice(c, idx[static_cast<std::size_t>(c)]);
    return v[0];
}

inline double tt_element(const TTTensor& tt, const MultiIndex& idx) {
    return tt_element(tt, std::span<const Index>(idx));
}

/// Interface matrix of the cores left of position k (1-based, 1 <= k <= K+1):
/// row (j_1,...,j_{k-1}) in row-major order, column r holds
/// [G_1]_{j_1} ... [G_{k-1}]_{j_{k-1},:,r}. k = 1 gives the 1x1 matrix (1).
inline Matrix left_interface(const TTTensor& tt, Index k) {
    if (k < 1 || k > tt.order() + 1) throw std::out_of_range("left_interface: k out of range");
    Matrix m = Matrix::Ones(1, 1);
    for (Index c = 0; c < k - 1; ++c) {
        Index dim = tt.shape().dim(c);
        Matrix next(m.rows() * dim, tt.rank(c + 1));
        for (Index row = 0; row < m.rows(); ++row)
            for (Index i = 0; i < dim; ++i) next.row(row * dim + i) = m.row(row) * tt.slice(c, i);
        m = std::move(next);
    }
    return m;
}

/// Mirror of left_interface: the R_k x I_{k<} matrix whose column
/// (j_{k+1},...,j_K) is [G_{k+1}]_{j_{k+1}} ... [G_K]_{j_K}. k = K gives (1).
inline Matrix right_interface(const TTTensor& tt, Index k) {
    if (k < 0 || k > tt.order()) throw std::out_of_range("right_interface: k out of range");
    Matrix m = Matrix::Ones(1, 1);
    for (Index c = tt.order() - 1; c >= k; --c) {
        Index dim = tt.shape().dim(c);
        Matrix next(tt.rank(c), dim * m.cols());
        for (Index i = 0; i < dim; ++i)
            for (Index col = 0; col < m.cols(); ++col)
                next.col(i * m.cols() + col) = tt.slice(c, i) * m.col(col);
        m = std::move(next);
    }
    return m;
}

/// Materializes the TT as a dense tensor; refuses above the element cap.
/// This is the correctness oracle for every TT-path computation.
inline DenseTensor tt_to_dense(const TTTensor& tt, std::uint64_t cap = kDefaultDenseCap) {
    if (tt.shape().num_elements() > cap)
        throw CapExceededError("tt_to_dense: " + std::to_string(tt.shape().num_elements()) +
                               " elements exceed the cap of " + std::to_string(cap));
    // left_interface at k = K+1 is the full contraction: one row per
    // multi-index in row-major order, a single column.
    Matrix m = left_interface(tt, tt.order() + 1);
    return DenseTensor(tt.shape(), Vector(m.col(0)), cap);
}

/// TT with every core drawn i.i.d. standard normal and then normalized to
/// unit Frobenius norm; deterministic per seed.
inline TTTensor random_tt(const Shape& shape, const std::vector<Index>& internal_ranks,
                          std::uint64_t seed) {
    TTTensor tt(shape, internal_ranks);
    Rng rng(seed);
    for (Index c = 0; c < tt.order(); ++c) {
        for (Index i = 0; i < shape.dim(c); ++i) {
            Matrix& m = tt.slice(c, i);
            for (Index r1 = 0; r1 < m.rows(); ++r1)
                for (Index r2 = 0; r2 < m.cols(); ++r2) m(r1, r2) = rng.normal();
        }
        double norm = tt.core_frobenius_norm(c);
        if (norm > 0) tt.scale_core(c, 1.0 / norm);
    }
    return tt;
}

inline double frobenius_distance(const TTTensor& a, const DenseTensor& b,
                                 std::uint64_t cap = kDefaultDenseCap) {
    return frobenius_distance(tt_to_dense(a, cap), b);
}

inline double frobenius_distance(const DenseTensor& a, const TTTensor& b,
                                 std::uint64_t cap = kDefaultDenseCap) {
    return frobenius_distance(a, tt_to_dense(b, cap));
}

inline double frobenius_distance(const TTTensor& a, const TTTensor& b,
                                 std::uint64_t cap = kDefaultDenseCap) {
    return frobenius_distance(tt_to_dense(a, cap), tt_to_dense(b, cap));
}

}  // namespace ttc
