#pragma once

#include "ttc/tensor.hpp"

#include <Eigen/SVD>

namespace ttc {

/// Thin SVD factors with singular values in descending order.
struct SvdResult {
    Matrix u;   // m x r
    Vector s;   // r, descending, nonnegative
    Matrix vt;  // r x n
};

/// Thin SVD. Jacobi for small matrices, divide-and-conquer otherwise;
/// non-convergence and non-finite input surface as NumericalError.
inline SvdResult svd(const Matrix& m) {
    if (!m.allFinite()) throw NumericalError("svd: input has non-finite entries");
    SvdResult out;
    if (m.rows() <= 32 || m.cols() <= 32) {
        Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (solver.info() != Eigen::Success) throw NumericalError("svd: Jacobi SVD failed");
        out.u = solver.matrixU();
        out.s = solver.singularValues();
        out.vt = solver.matrixV().transpose();
    } else {
        Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (solver.info() != Eigen::Success) throw NumericalError("svd: BDC SVD did not converge");
        out.u = solver.matrixU();
        out.s = solver.singularValues();
        out.vt = solver.matrixV().transpose();
    }
    return out;
}

/// Number of singular values above rel_tol times the largest.
inline Index numerical_rank(const Vector& singular_values, double rel_tol = 1e-8) {
    if (singular_values.size() == 0) return 0;
    double cutoff = rel_tol * singular_values[0];
    Index r = 0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i)
        if (singular_values[i] > cutoff) ++r;
    return r;
}

/// Singular value shrinkage U max{S - b, 0} V^T, the proximal operator of
/// b * ||.||_s at w. b = 0 returns w unchanged.
inline Matrix prox_schatten(const Matrix& w, double b) {
    if (b < 0) throw std::invalid_argument("prox_schatten: threshold must be nonnegative");
    if (b == 0) return w;
    SvdResult f = svd(w);
    Vector shrunk = (f.s.array() - b).max(0.0);
    return f.u * shrunk.asDiagonal() * f.vt;
}

/// Schatten-1 (nuclear) norm: the sum of singular values.
inline double schatten1(const Matrix& m) { return svd(m).s.sum(); }

/// Schatten TT norm: the average of the Schatten-1 norms of all K-1
/// unfoldings, (1/(K-1)) sum_k ||Q_k(X)||_s.
inline double schatten_tt_norm(const DenseTensor& x) {
    Index order = x.shape().order();
    double total = 0;
    for (Index k = 1; k < order; ++k) total += schatten1(unfold(x, k));
    return total / static_cast<double>(order - 1);
}

}  // namespace ttc
