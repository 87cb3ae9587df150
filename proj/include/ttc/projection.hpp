#pragma once

#include "ttc/proximal.hpp"
#include "ttc/rng.hpp"
#include "ttc/tensor.hpp"
#include "ttc/tt_tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace ttc {

/// One stored nonzero of a projection tensor: the projected row it belongs
/// to, the row-major linearization of its multi-index over the covered modes,
/// and the signed weight (magnitude sqrt(s/d) by construction).
struct ProjEntry {
    Index row;
    std::uint64_t flat;
    double weight;
};

/// The pair of very sparse random tensors defining the projection at split k:
/// the left tensor covers modes 1..k and maps to d1 rows, the right tensor
/// covers modes k+1..K and maps to d2 rows. Entries take the values
/// +-sqrt(s/d) with probability 1/(2s) each and 0 otherwise, so roughly a
/// 1/s fraction of all candidate positions is stored.
struct SparseProjectionPair {
    Index k = 1;  // split, 1-based: left modes are 1..k
    Index d1 = 0, d2 = 0;
    double s_left = 0, s_right = 0;  // sparsity parameters (equal unless budgeted)
    std::uint64_t left_size = 0, right_size = 0;
    std::vector<ProjEntry> left, right;

    double left_magnitude() const { return std::sqrt(s_left / static_cast<double>(d1)); }
    double right_magnitude() const { return std::sqrt(s_right / static_cast<double>(d2)); }
};

namespace detail {

/// Appends Bernoulli(1/s) nonzeros for rows 0..d-1 over `size` candidate
/// positions each, by geometric gap skipping; O(#nonzeros) work.
inline void sample_entries_bernoulli(std::vector<ProjEntry>& out, Index d, std::uint64_t size,
                                     double s, double magnitude, Rng& rng) {
    double p = 1.0 / s;
    double log1mp = std::log1p(-p);
    std::uint64_t total = static_cast<std::uint64_t>(d) * size;
    std::uint64_t pos = 0;
    while (pos < total) {
        double u = (static_cast<double>(rng.next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
        double skip = std::floor(std::log(u) / log1mp);
        if (skip >= static_cast<double>(total - pos)) break;
        pos += static_cast<std::uint64_t>(skip);
        out.push_back({static_cast<Index>(pos / size), pos % size, rng.sign() * magnitude});
        ++pos;
    }
}

/// Exactly `budget` distinct nonzero positions per row.
inline void sample_entries_budget(std::vector<ProjEntry>& out, Index d, std::uint64_t size,
                                  std::uint64_t budget, double magnitude, Rng& rng) {
    for (Index row = 0; row < d; ++row) {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(budget * 2);
        while (seen.size() < budget) {
            std::uint64_t f = rng.uniform_below(size);
            if (seen.insert(f).second) out.push_back({row, f, rng.sign() * magnitude});
        }
    }
}

inline void check_split_dims(const Shape& shape, Index k, Index d1, Index d2) {
    check_split(shape, k);
    if (d1 < 1 || d2 < 1) throw std::invalid_argument("projection: d1, d2 must be positive");
}

}  // namespace detail

/// Samples the projection pair at split k with i.i.d. entries: +-sqrt(s/d)
/// with probability 1/(2s) each, 0 otherwise. Requires s > 1 so zeros
/// dominate. Deterministic per seed.
inline SparseProjectionPair sample_projection(const Shape& shape, Index k, Index d1, Index d2,
                                              double s, std::uint64_t seed) {
    detail::check_split_dims(shape, k, d1, d2);
    if (!(s > 1)) throw std::invalid_argument("sample_projection: s must exceed 1");
    SparseProjectionPair p;
    p.k = k;
    p.d1 = d1;
    p.d2 = d2;
    p.s_left = p.s_right = s;
    p.left_size = shape.leading_product(k);
    p.right_size = shape.trailing_product(k);
    Rng rng(seed);
    Rng left_rng = rng.derived(1), right_rng = rng.derived(2);
    detail::sample_entries_bernoulli(p.left, d1, p.left_size, s, p.left_magnitude(), left_rng);
    detail::sample_entries_bernoulli(p.right, d2, p.right_size, s, p.right_magnitude(), right_rng);
    return p;
}

/// Samples the pair with a fixed nonzero budget per projected row instead of
/// per-entry coin flips. The stored sparsity parameter is the effective
/// s = (#candidates)/budget, so magnitudes keep the sqrt(s/d) form and the
/// projection stays an isometry in expectation. This is what makes the
/// solver's per-sweep cost polynomial in K: the i.i.d. form stores a 1/s
/// fraction of I^k candidate positions, which grows exponentially with k.
inline SparseProjectionPair sample_projection_budget(const Shape& shape, Index k, Index d1,
                                                     Index d2, std::uint64_t nnz_per_row,
                                                     std::uint64_t seed) {
    detail::check_split_dims(shape, k, d1, d2);
    if (nnz_per_row < 1) throw std::invalid_argument("sample_projection_budget: empty budget");
    SparseProjectionPair p;
    p.k = k;
    p.d1 = d1;
    p.d2 = d2;
    p.left_size = shape.leading_product(k);
    p.right_size = shape.trailing_product(k);
    std::uint64_t left_budget = std::min(nnz_per_row, p.left_size);
    std::uint64_t right_budget = std::min(nnz_per_row, p.right_size);
    p.s_left = static_cast<double>(p.left_size) / static_cast<double>(left_budget);
    p.s_right = static_cast<double>(p.right_size) / static_cast<double>(right_budget);
    Rng rng(seed);
    Rng left_rng = rng.derived(1), right_rng = rng.derived(2);
    detail::sample_entries_budget(p.left, d1, p.left_size, left_budget, p.left_magnitude(),
                                  left_rng);
    detail::sample_entries_budget(p.right, d2, p.right_size, right_budget, p.right_magnitude(),
                                  right_rng);
    return p;
}

/// P_k(X) on a dense tensor, iterating only stored nonzeros. Row-major
/// linearization makes the full cell index of a (left, right) pair just
/// flat_left * right_size + flat_right.
inline Matrix project_dense(const SparseProjectionPair& p, const DenseTensor& x) {
    if (p.left_size != x.shape().leading_product(p.k) ||
        p.right_size != x.shape().trailing_product(p.k))
        throw std::invalid_argument("project_dense: projection does not match tensor shape");
    Matrix out = Matrix::Zero(p.d1, p.d2);
    for (const ProjEntry& l : p.left)
        for (const ProjEntry& r : p.right)
            out(l.row, r.row) += l.weight * r.weight * x[l.flat * p.right_size + r.flat];
    return out;
}

namespace detail {

/// Decodes `flat` over modes [first, last) of `shape` into `idx` (buffer of
/// at least last-first entries), row-major.
inline void decode_modes(const Shape& shape, Index first, Index last, std::uint64_t flat,
                         Index* idx) {
    for (Index c = last - 1; c >= first; --c) {
        std::uint64_t d = static_cast<std::uint64_t>(shape.dim(c));
        idx[c - first] = static_cast<Index>(flat % d);
        flat /= d;
    }
}

}  // namespace detail

/// P_k(X) evaluated in TT format: accumulate, per left nonzero, the chain
/// [G_1]_{j_1}...[G_k]_{j_k} into row d1 of A, per right nonzero the chain
/// [G_{k+1}]_{j_{k+1}}...[G_K]_{j_K} into column d2 of B, and return A * B.
inline Matrix project_tt(const SparseProjectionPair& p, const TTTensor& tt) {
    const Shape& shape = tt.shape();
    if (p.left_size != shape.leading_product(p.k) || p.right_size != shape.trailing_product(p.k))
        throw std::invalid_argument("project_tt: projection does not match tensor shape");
    Index link = tt.rank(p.k);
    Matrix a = Matrix::Zero(p.d1, link);
    Matrix b = Matrix::Zero(link, p.d2);
    std::vector<Index> idx(static_cast<std::size_t>(shape.order()));
    for (const ProjEntry& l : p.left) {
        detail::decode_modes(shape, 0, p.k, l.flat, idx.data());
        Eigen::RowVectorXd chain = Eigen::RowVectorXd::Ones(1);
        for (Index c = 0; c < p.k; ++c) chain = chain * tt.slice(c, idx[static_cast<std::size_t>(c)]);
        a.row(l.row) += l.weight * chain;
    }
    for (const ProjEntry& r : p.right) {
        detail::decode_modes(shape, p.k, shape.order(), r.flat, idx.data());
        Vector chain = Vector::Ones(1);
        for (Index c = shape.order() - 1; c >= p.k; --c)
            chain = tt.slice(c, idx[static_cast<std::size_t>(c - p.k)]) * chain;
        b.col(r.row) += r.weight * chain;
    }
    return a * b;
}

/// The dimension threshold max{R, 4 (log(6R) + log(1/eps)) / eps^2} under
/// which the norm-preservation guarantee is stated.
inline double theorem1_dim_threshold(Index rank, double eps) {
    double jl = 4.0 * (std::log(6.0 * static_cast<double>(rank)) + std::log(1.0 / eps)) /
                (eps * eps);
    return std::max(static_cast<double>(rank), jl);
}

struct Theorem1Report {
    double satisfied_fraction = 0;  // fraction of (k, trial) pairs inside the sandwich
    double upper_fraction = 0;      // fraction satisfying only the upper bound
    double min_ratio = 0, max_ratio = 0;
    std::vector<double> dim_thresholds;  // per internal link k = 1..K-1
    int trials = 0;
    Index pairs_checked = 0;
};

/// Empirical check of the norm sandwich
///   (1-eps)/R_k ||Q_k(X)||_s <= ||P_k(X)||_s <= (1+eps) ||Q_k(X)||_s
/// over random TT tensors and fresh projections; reports the observed
/// fraction and the extreme ratios ||P_k||_s / ||Q_k||_s.
inline Theorem1Report verify_theorem1(const Shape& shape, const std::vector<Index>& ranks,
                                      Index d, double s, double eps, int trials,
                                      std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("verify_theorem1: trials must be positive");
    for (Index r : ranks)
        if (d < r) throw std::invalid_argument("verify_theorem1: d must be at least every rank");
    Theorem1Report report;
    report.trials = trials;
    for (Index r : ranks) report.dim_thresholds.push_back(theorem1_dim_threshold(r, eps));
    Rng master(seed);
    Index satisfied = 0, upper_only = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = 0;
    for (int t = 0; t < trials; ++t) {
        TTTensor tt = random_tt(shape, ranks, master.derived(2 * t).seed());
        DenseTensor dense = tt_to_dense(tt);
        for (Index k = 1; k < shape.order(); ++k) {
            auto p = sample_projection(shape, k, d, d, s,
                                       master.derived(2 * t + 1).derived(k).seed());
            double qs = schatten1(unfold(dense, k));
            double ps = schatten1(project_tt(p, tt));
            double ratio = ps / qs;
            min_ratio = std::min(min_ratio, ratio);
            max_ratio = std::max(max_ratio, ratio);
            bool upper = ps <= (1 + eps) * qs;
            bool lower = ps >= (1 - eps) / static_cast<double>(ranks[static_cast<std::size_t>(k - 1)]) * qs;
            if (upper) ++upper_only;
            if (upper && lower) ++satisfied;
            ++report.pairs_checked;
        }
    }
    report.satisfied_fraction = static_cast<double>(satisfied) / static_cast<double>(report.pairs_checked);
    report.upper_fraction = static_cast<double>(upper_only) / static_cast<double>(report.pairs_checked);
    report.min_ratio = min_ratio;
    report.max_ratio = max_ratio;
    return report;
}

}  // namespace ttc
