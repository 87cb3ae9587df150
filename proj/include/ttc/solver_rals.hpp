#pragma once

#include "ttc/observation.hpp"
#include "ttc/projection.hpp"
#include "ttc/proximal.hpp"
#include "ttc/solver_common.hpp"

#include <Eigen/Cholesky>

#include <chrono>

namespace ttc {

/// State of the alternating solver: the current TT estimate, one frozen
/// projection pair per split, and the (W, beta) consensus/dual variables of
/// each projected regularizer term.
struct RalsState {
    TTTensor tt;
    std::vector<SparseProjectionPair> projections;  // K-1
    std::vector<Matrix> w;                          // K-1, D1 x D2
    std::vector<Vector> beta;                       // K-1, length D1*D2
    int sweep = 0;
};

/// The n x (I_k R_{k-1} R_k) matrix of the masked evaluation as a linear map
/// of vec(G_k): row i is nonzero only in the block of the observed index's
/// k-th coordinate, where it is the outer product of the left and right
/// interface vectors at that index. Satisfies build_omega(tt,k,S) * vec(G_k)
/// = apply_mask(tt, S) exactly. Dense assembly, used at test scale; the
/// solver assembles the same normal equations blockwise.
inline Matrix build_omega(const TTTensor& tt, Index k, const std::vector<MultiIndex>& s_idx) {
    if (k < 1 || k > tt.order()) throw std::out_of_range("build_omega: k out of range");
    Index c = k - 1;
    Index r1 = tt.rank(c), r2 = tt.rank(c + 1);
    Matrix omega = Matrix::Zero(static_cast<Index>(s_idx.size()), tt.core_size(c));
    for (std::size_t i = 0; i < s_idx.size(); ++i) {
        const MultiIndex& idx = s_idx[i];
        tt.shape().check_index(idx);
        Eigen::RowVectorXd lrow = left_chain(tt, k, idx);
        Vector rcol = right_chain(tt, k, idx);
        Index base = idx[static_cast<std::size_t>(c)] * r1 * r2;
        for (Index a = 0; a < r1; ++a)
            for (Index b = 0; b < r2; ++b)
                omega(static_cast<Index>(i), base + a * r2 + b) = lrow[a] * rcol[b];
    }
    return omega;
}

namespace detail {

/// Product of core slices over [first, last) at the decoded sub-index of
/// `flat`; identity when the range is empty.
inline Matrix slice_chain(const TTTensor& tt, Index first, Index last, std::uint64_t flat) {
    std::vector<Index> idx(static_cast<std::size_t>(last - first));
    decode_modes(tt.shape(), first, last, flat, idx.data());
    Matrix m = Matrix::Identity(tt.rank(first), tt.rank(first));
    for (Index c = first; c < last; ++c) m = m * tt.slice(c, idx[static_cast<std::size_t>(c - first)]);
    return m;
}

}  // namespace detail

/// The (D1 D2) x (I_k R_{k-1} R_k) matrix of the map
/// vec(G_k) -> vec(P_kp(X(G_k; other cores fixed))), assembled by
/// precontracting the projection nonzeros with the fixed cores. Row order is
/// the row-major vectorization of the D1 x D2 projected matrix.
inline Matrix build_gamma(const TTTensor& tt, Index k, Index kp, const SparseProjectionPair& p) {
    if (k < 1 || k > tt.order()) throw std::out_of_range("build_gamma: k out of range");
    if (kp != p.k) throw std::invalid_argument("build_gamma: kp does not match the projection");
    const Shape& shape = tt.shape();
    if (p.left_size != shape.leading_product(kp) || p.right_size != shape.trailing_product(kp))
        throw std::invalid_argument("build_gamma: projection does not match tensor shape");
    Index c = k - 1;
    Index r1 = tt.rank(c), r2 = tt.rank(c + 1);
    Matrix gamma = Matrix::Zero(p.d1 * p.d2, tt.core_size(c));
    if (k <= kp) {
        // Core k sits in the left span. Precontract every right nonzero into
        // its row's R_kp vector, then walk left nonzeros once.
        Matrix v = Matrix::Zero(tt.rank(kp), p.d2);
        for (const ProjEntry& r : p.right)
            v.col(r.row) += r.weight * detail::slice_chain(tt, kp, tt.order(), r.flat).col(0);
        std::vector<Index> idx(static_cast<std::size_t>(kp));
        for (const ProjEntry& l : p.left) {
            detail::decode_modes(shape, 0, kp, l.flat, idx.data());
            Eigen::RowVectorXd a = Eigen::RowVectorXd::Ones(1);
            for (Index cc = 0; cc < c; ++cc) a = a * tt.slice(cc, idx[static_cast<std::size_t>(cc)]);
            Matrix mid = Matrix::Identity(r2, r2);
            for (Index cc = c + 1; cc < kp; ++cc)
                mid = mid * tt.slice(cc, idx[static_cast<std::size_t>(cc)]);
            Matrix w = mid * v;  // r2 x d2
            Index i = idx[static_cast<std::size_t>(c)];
            for (Index d2 = 0; d2 < p.d2; ++d2) {
                Index row = l.row * p.d2 + d2;
                for (Index ra = 0; ra < r1; ++ra) {
                    double la = l.weight * a[ra];
                    for (Index rb = 0; rb < r2; ++rb)
                        gamma(row, (i * r1 + ra) * r2 + rb) += la * w(rb, d2);
                }
            }
        }
    } else {
        // Core k sits in the right span; mirror of the case above.
        Matrix u = Matrix::Zero(p.d1, tt.rank(kp));
        for (const ProjEntry& l : p.left)
            u.row(l.row) += l.weight * detail::slice_chain(tt, 0, kp, l.flat).row(0);
        std::vector<Index> idx(static_cast<std::size_t>(tt.order() - kp));
        for (const ProjEntry& r : p.right) {
            detail::decode_modes(shape, kp, tt.order(), r.flat, idx.data());
            Matrix mid = Matrix::Identity(tt.rank(kp), tt.rank(kp));
            for (Index cc = kp; cc < c; ++cc)
                mid = mid * tt.slice(cc, idx[static_cast<std::size_t>(cc - kp)]);
            Vector b = Vector::Ones(1);
            for (Index cc = tt.order() - 1; cc > c; --cc)
                b = tt.slice(cc, idx[static_cast<std::size_t>(cc - kp)]) * b;
            Matrix um = u * mid;  // d1 x r1
            Index i = idx[static_cast<std::size_t>(c - kp)];
            for (Index d1 = 0; d1 < p.d1; ++d1) {
                for (Index ra = 0; ra < r1; ++ra) {
                    double ua = r.weight * um(d1, ra);
                    for (Index rb = 0; rb < r2; ++rb)
                        gamma(d1 * p.d2 + r.row, (i * r1 + ra) * r2 + rb) += ua * b[rb];
                }
            }
        }
    }
    return gamma;
}

/// Definitional construction of the same matrix: apply the projection map to
/// every unit core vector. Independent of build_gamma's contraction order;
/// test-scale only.
inline Matrix build_gamma_basis(const TTTensor& tt, Index k, const SparseProjectionPair& p) {
    if (k < 1 || k > tt.order()) throw std::out_of_range("build_gamma_basis: k out of range");
    Index c = k - 1;
    TTTensor probe = tt;
    Index cols = tt.core_size(c);
    Matrix gamma(p.d1 * p.d2, cols);
    Vector e = Vector::Zero(cols);
    for (Index j = 0; j < cols; ++j) {
        e[j] = 1.0;
        probe.set_core_from_vec(c, e);
        gamma.col(j) = vec_rowmajor(project_tt(p, probe));
        e[j] = 0.0;
    }
    return gamma;
}

namespace detail {

/// Cached per-observation interface vectors for one core position.
struct CoreDesign {
    std::vector<Eigen::RowVectorXd> lrow;  // n entries, length R_{k-1}
    std::vector<Vector> rcol;              // n entries, length R_k
    std::vector<Index> mode_index;         // observed k-th coordinates
};

inline CoreDesign gather_core_design(const TTTensor& tt, Index k, const ObservationSet& obs) {
    CoreDesign d;
    Index n = obs.n();
    d.lrow.reserve(n);
    d.rcol.reserve(n);
    d.mode_index.reserve(n);
    for (Index i = 0; i < n; ++i) {
        const MultiIndex& idx = obs.indices[static_cast<std::size_t>(i)];
        d.lrow.push_back(left_chain(tt, k, idx));
        d.rcol.push_back(right_chain(tt, k, idx));
        d.mode_index.push_back(idx[static_cast<std::size_t>(k - 1)]);
    }
    return d;
}

/// Sanity check that the split evaluation used by the normal equations
/// agrees with direct element evaluation.
inline void spot_check_design(const TTTensor& tt, Index k, const ObservationSet& obs,
                              const CoreDesign& d, Index count) {
    for (Index i = 0; i < std::min<Index>(count, obs.n()); ++i) {
        double split = (d.lrow[static_cast<std::size_t>(i)] *
                        tt.slice(k - 1, d.mode_index[static_cast<std::size_t>(i)]) *
                        d.rcol[static_cast<std::size_t>(i)])
                           .value();
        double direct = tt_element(tt, obs.indices[static_cast<std::size_t>(i)]);
        double scale = 1.0 + std::abs(direct) +
                       d.lrow[static_cast<std::size_t>(i)].norm() *
                           d.rcol[static_cast<std::size_t>(i)].norm();
        if (std::abs(split - direct) > 1e-7 * scale)
            throw NumericalError("rals: interface evaluation diverged from element evaluation");
    }
}

}  // namespace detail

/// One inner ADMM pass on the subproblem in core k with every other core
/// fixed: the quadratic g-step solves the normal equations of the masked
/// data term plus the (1/(K-1))-weighted projected consensus terms, the
/// W-step is singular-value shrinkage at lambda/eta, and the beta-step is
/// the scaled dual ascent. Runs cfg.inner_iters steps and writes the core
/// back into state.tt. The state's (W, beta) are the inner starting point;
/// rebase_consensus restarts them from the current iterate instead, which
/// the outer sweep uses because the previous core's duals refer to a
/// different projected map.
inline void rals_core_update(RalsState& state, const ObservationSet& obs, Index k,
                             const RalsConfig& cfg, bool rebase_consensus = false) {
    const TTTensor& tt = state.tt;
    Index c = k - 1;
    Index r1 = tt.rank(c), r2 = tt.rank(c + 1);
    Index block = r1 * r2;
    Index dim = tt.core_size(c);
    double n = static_cast<double>(obs.n());
    Index num_terms = static_cast<Index>(state.projections.size());

    detail::CoreDesign design = detail::gather_core_design(tt, k, obs);
    detail::spot_check_design(tt, k, obs, design, 3);

    // Normal-equation matrix: the data term is block diagonal over the mode
    // index because each observation touches a single slice of the core.
    Matrix m = Matrix::Zero(dim, dim);
    Vector data_rhs = Vector::Zero(dim);
    {
        Vector u(block);
        for (Index i = 0; i < obs.n(); ++i) {
            const auto& lrow = design.lrow[static_cast<std::size_t>(i)];
            const auto& rcol = design.rcol[static_cast<std::size_t>(i)];
            for (Index a = 0; a < r1; ++a)
                for (Index b = 0; b < r2; ++b) u[a * r2 + b] = lrow[a] * rcol[b];
            Index base = design.mode_index[static_cast<std::size_t>(i)] * block;
            m.block(base, base, block, block)
                .selfadjointView<Eigen::Lower>()
                .rankUpdate(u, 1.0 / n);
            data_rhs.segment(base, block) += (obs.values[i] / n) * u;
        }
    }

    std::vector<Matrix> gammas;
    gammas.reserve(static_cast<std::size_t>(num_terms));
    for (Index kp = 1; kp <= num_terms; ++kp)
        gammas.push_back(build_gamma(tt, k, kp, state.projections[static_cast<std::size_t>(kp - 1)]));

    // Balance the penalty against the data curvature (the two quadratic
    // forms differ by orders of magnitude once the cores carry the data
    // scale). The fixed point of the ADMM does not depend on the penalty, so
    // this only conditions the iteration; cfg.eta is the dimensionless
    // multiplier on top.
    double data_curv = m.trace() / static_cast<double>(dim);
    double reg_curv = 0;
    for (const Matrix& g : gammas) reg_curv += g.squaredNorm();
    reg_curv /= static_cast<double>(num_terms) * static_cast<double>(dim);
    double eta_eff = cfg.eta;
    if (reg_curv > 0 && data_curv > 0) eta_eff = cfg.eta * data_curv / reg_curv;
    double term_weight_eff = eta_eff / static_cast<double>(num_terms);

    for (const Matrix& g : gammas)
        m.selfadjointView<Eigen::Lower>().rankUpdate(g.transpose(), term_weight_eff);
    m = m.selfadjointView<Eigen::Lower>();

    Eigen::LDLT<Matrix> factor(m);
    bool ridged = false;
    Vector g = tt.core_vec(c);
    if (rebase_consensus) {
        for (Index t = 0; t < num_terms; ++t) {
            state.w[static_cast<std::size_t>(t)] =
                mat_rowmajor(gammas[static_cast<std::size_t>(t)] * g,
                             state.projections[static_cast<std::size_t>(t)].d1,
                             state.projections[static_cast<std::size_t>(t)].d2);
            state.beta[static_cast<std::size_t>(t)].setZero();
        }
    }
    for (int it = 0; it < cfg.inner_iters; ++it) {
        Vector rhs = data_rhs;
        for (Index t = 0; t < num_terms; ++t)
            rhs += term_weight_eff * (gammas[static_cast<std::size_t>(t)].transpose() *
                                  (vec_rowmajor(state.w[static_cast<std::size_t>(t)]) -
                                   state.beta[static_cast<std::size_t>(t)]));
        g = factor.solve(rhs);
        if (!ridged && (!g.allFinite() || (m * g - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))) {
            // Rank-deficient normal equations (overparameterized core or few
            // observations): retry with a small ridge.
            ridged = true;
            m.diagonal().array() += 1e-10;
            factor.compute(m);
            g = factor.solve(rhs);
        }
        if (!g.allFinite()) throw NumericalError("rals: core update produced non-finite values");
        for (Index t = 0; t < num_terms; ++t) {
            Vector proj = gammas[static_cast<std::size_t>(t)] * g;
            Matrix w = prox_schatten(
                mat_rowmajor(proj + state.beta[static_cast<std::size_t>(t)],
                             state.projections[static_cast<std::size_t>(t)].d1,
                             state.projections[static_cast<std::size_t>(t)].d2),
                cfg.lambda / eta_eff);
            state.beta[static_cast<std::size_t>(t)] += proj - vec_rowmajor(w);
            state.w[static_cast<std::size_t>(t)] = std::move(w);
        }
    }
    state.tt.set_core_from_vec(c, g);
}

/// Loss with the projected regularizer,
/// (1/2n) ||Y - X(S)||^2 + (lambda/(K-1)) sum_k ||P_k(X)||_s.
inline double rals_objective(const RalsState& state, const ObservationSet& obs, double lambda) {
    Vector pred = apply_mask(state.tt, obs.indices);
    double data = (obs.values - pred).squaredNorm() / (2.0 * static_cast<double>(obs.n()));
    double reg = 0;
    for (const auto& p : state.projections) reg += schatten1(project_tt(p, state.tt));
    return data + lambda * reg / static_cast<double>(state.projections.size());
}

namespace detail {

/// Left-to-right QR pass: every core but the last gets orthonormal columns
/// in its vertical unfolding, the triangular factors are pushed right. A
/// pure gauge transform; the represented tensor is unchanged. Requires
/// R_k <= R_{k-1} I_k for every k, which feasible_ranks guarantees.
inline void orthogonalize_left(TTTensor& tt) {
    for (Index c = 0; c + 1 < tt.order(); ++c) {
        Index rl = tt.rank(c), rr = tt.rank(c + 1), dim = tt.shape().dim(c);
        Matrix v(rl * dim, rr);
        for (Index i = 0; i < dim; ++i) v.block(i * rl, 0, rl, rr) = tt.slice(c, i);
        Eigen::HouseholderQR<Matrix> qr(v);
        Matrix q = qr.householderQ() * Matrix::Identity(rl * dim, rr);
        Matrix r = qr.matrixQR().topRows(rr).triangularView<Eigen::Upper>();
        for (Index i = 0; i < dim; ++i) tt.slice(c, i) = q.block(i * rl, 0, rl, rr);
        for (Index i = 0; i < tt.shape().dim(c + 1); ++i)
            tt.slice(c + 1, i) = r * tt.slice(c + 1, i);
    }
}

/// Clamps a uniform estimation rank to the structural bounds
/// R_k <= min(I_{<=k}, I_{k<}); anything above is representationally
/// redundant and leaves the vertical unfoldings rank-deficient.
inline std::vector<Index> feasible_ranks(const Shape& shape, Index est_rank) {
    std::vector<Index> ranks;
    for (Index k = 1; k < shape.order(); ++k) {
        std::uint64_t bound = std::min(shape.leading_product(k), shape.trailing_product(k));
        bound = std::min<std::uint64_t>(bound, static_cast<std::uint64_t>(est_rank));
        ranks.push_back(static_cast<Index>(bound));
    }
    return ranks;
}

inline std::pair<TTTensor, SolverReport> rals_solve_once(const ObservationSet& obs,
                                                         const RalsConfig& cfg,
                                                         std::uint64_t seed) {
    const Shape& shape = obs.shape;
    Index order = shape.order();
    Rng rng(seed);
    std::vector<Index> est_ranks = feasible_ranks(shape, cfg.est_rank);
    RalsState state{random_tt(shape, est_ranks, rng.derived(0).seed()), {}, {}, {}, 0};
    Rng proj_rng = rng.derived(0x70726f6a);
    auto draw_projections = [&](std::uint64_t round) {
        state.projections.clear();
        state.w.clear();
        state.beta.clear();
        for (Index kp = 1; kp < order; ++kp) {
            std::uint64_t proj_seed =
                proj_rng.derived(round).derived(static_cast<std::uint64_t>(kp)).seed();
            state.projections.push_back(
                cfg.proj_nnz_per_row > 0
                    ? sample_projection_budget(shape, kp, cfg.d1, cfg.d2, cfg.proj_nnz_per_row,
                                               proj_seed)
                    : sample_projection(shape, kp, cfg.d1, cfg.d2, cfg.s, proj_seed));
            state.w.push_back(project_tt(state.projections.back(), state.tt));
            state.beta.push_back(Vector::Zero(cfg.d1 * cfg.d2));
        }
    };
    draw_projections(0);

    SolverReport report;
    report.solver = "rals";
    Vector prev_pred = apply_mask(state.tt, obs.indices);
    for (int sweep = 0; sweep < cfg.outer_sweeps; ++sweep) {
        if (cfg.proj_resample && sweep > 0) draw_projections(static_cast<std::uint64_t>(sweep));
        if (cfg.sweep_ascending) {
            for (Index k = 1; k <= order; ++k) rals_core_update(state, obs, k, cfg, true);
        } else {
            for (Index k = order; k >= 1; --k) rals_core_update(state, obs, k, cfg, true);
        }
        state.sweep = sweep + 1;

        // Gauge hygiene between sweeps: the represented tensor is invariant
        // under core-pair transformations, and the per-core updates drift
        // along that freedom until slice products overflow. Orthogonalize,
        // then spread the remaining magnitude evenly over the cores.
        detail::orthogonalize_left(state.tt);
        {
            double log_total = 0;
            bool degenerate = false;
            std::vector<double> norms(static_cast<std::size_t>(order));
            for (Index c = 0; c < order; ++c) {
                norms[static_cast<std::size_t>(c)] = state.tt.core_frobenius_norm(c);
                if (norms[static_cast<std::size_t>(c)] <= 0) degenerate = true;
                else log_total += std::log(norms[static_cast<std::size_t>(c)]);
            }
            if (!degenerate) {
                double target = std::exp(log_total / static_cast<double>(order));
                for (Index c = 0; c < order; ++c)
                    state.tt.scale_core(c, target / norms[static_cast<std::size_t>(c)]);
            }
        }

        // Per-sweep oracle spot check: the projected-map matrix applied to
        // the current core must reproduce the direct TT projection.
        {
            const auto& p = state.projections.front();
            Matrix gamma = build_gamma(state.tt, 1, 1, p);
            Vector via_gamma = gamma * state.tt.core_vec(0);
            Vector direct = vec_rowmajor(project_tt(p, state.tt));
            if ((via_gamma - direct).norm() >
                1e-7 * (1.0 + direct.norm() + gamma.norm() * state.tt.core_vec(0).norm()))
                throw NumericalError("rals: projected-map matrix diverged from TT projection");
        }

        Vector pred = apply_mask(state.tt, obs.indices);
        double rel = (pred - prev_pred).norm() / std::max(1.0, prev_pred.norm());
        prev_pred = pred;
        report.residual.push_back((obs.values - pred).norm() /
                                  std::sqrt(static_cast<double>(obs.n())));
        report.objective.push_back(rals_objective(state, obs, cfg.lambda));
        report.rel_change.push_back(rel);
        if (rel <= cfg.tol_rel) {
            report.converged = true;
            break;
        }
    }
    report.iterations = state.sweep;
    return {std::move(state.tt), std::move(report)};
}

}  // namespace detail

/// Completion in TT format by alternating minimization: cores are updated
/// cyclically, each by an inner ADMM on its convex subproblem with the
/// Schatten terms evaluated through frozen sparse random projections. Never
/// materializes a dense tensor. With cfg.restarts > 1 the run with the best
/// final masked RMSE is returned.
inline std::pair<TTTensor, SolverReport> tt_rals_solve(const ObservationSet& obs,
                                                       const RalsConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    std::pair<TTTensor, SolverReport> best{TTTensor(obs.shape, std::vector<Index>(
                                               static_cast<std::size_t>(obs.shape.order() - 1), 1)),
                                           SolverReport{}};
    double best_rmse = std::numeric_limits<double>::infinity();
    Rng seeder(cfg.seed);
    for (int r = 0; r < cfg.restarts; ++r) {
        auto run = detail::rals_solve_once(obs, cfg, seeder.derived(static_cast<std::uint64_t>(r)).seed());
        double rmse = run.second.residual.empty() ? std::numeric_limits<double>::infinity()
                                                  : run.second.residual.back();
        if (rmse < best_rmse) {
            best_rmse = rmse;
            best = std::move(run);
        }
    }
    best.second.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return best;
}

/// Smallest mu for which the top-r singular subspaces of Q_k(x) satisfy both
/// row-leverage bounds max_i ||P_U e_i|| <= sqrt(mu r / rows) and the V-side
/// analogue. Diagnostic only; never gates solving.
inline double incoherence_diagnostic(const DenseTensor& x, Index k, Index r) {
    detail::check_split(x.shape(), k);
    SvdResult f = svd(unfold(x, k));
    if (r < 1 || r > numerical_rank(f.s, 1e-12))
        throw std::invalid_argument("incoherence_diagnostic: requested rank exceeds numerical rank");
    double rows = static_cast<double>(x.shape().leading_product(k));
    double cols = static_cast<double>(x.shape().trailing_product(k));
    double lev_u = 0, lev_v = 0;
    for (Eigen::Index i = 0; i < f.u.rows(); ++i)
        lev_u = std::max(lev_u, f.u.row(i).head(r).squaredNorm());
    for (Eigen::Index j = 0; j < f.vt.cols(); ++j)
        lev_v = std::max(lev_v, f.vt.col(j).head(r).squaredNorm());
    return std::max(lev_u * rows, lev_v * cols) / static_cast<double>(r);
}

}  // namespace ttc
