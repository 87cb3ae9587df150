#pragma once

#include "ttc/tensor.hpp"

#include <string>
#include <vector>

namespace ttc {

enum class SolverKind { admm, rals, both };

/// Hyperparameters shared by both solvers.
struct SolverConfig {
    double lambda = 0.0;  // regularization coefficient, >= 0
    double eta = 1.0;     // ADMM step size, > 0
    int max_iter = 2000;
    double tol_rel = 1e-6;   // relative-change stopping tolerance
    double tol_feas = 1e-5;  // scaled consensus-residual tolerance
    std::uint64_t seed = 0;
    std::uint64_t dense_cap = kDefaultDenseCap;

    void validate() const {
        if (lambda < 0) throw std::invalid_argument("SolverConfig: lambda must be nonnegative");
        if (!(eta > 0)) throw std::invalid_argument("SolverConfig: eta must be positive");
        if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be positive");
        if (!(tol_rel >= 0) || !(tol_feas >= 0))
            throw std::invalid_argument("SolverConfig: tolerances must be nonnegative");
    }
};

/// Extra knobs for the randomized alternating solver.
struct RalsConfig : SolverConfig {
    Index d1 = 10, d2 = 10;  // projected dimensions
    double s = 20.0;         // projection sparsity parameter
    Index est_rank = 10;     // rank of the estimation cores
    int outer_sweeps = 50;
    int inner_iters = 10;
    /// 0 samples projections with i.i.d. 1/(2s)-probability entries; a
    /// positive value fixes that many nonzeros per projected row instead,
    /// keeping memory and sweep cost polynomial in the tensor order.
    std::uint64_t proj_nnz_per_row = 0;
    /// Redraw the projection pairs at the start of every sweep. A frozen
    /// undersized sketch leaves directions the penalty never sees, and the
    /// alternating updates push noise into exactly those; redrawing keeps
    /// every direction visible in expectation.
    bool proj_resample = true;
    int restarts = 1;
    bool sweep_ascending = true;

    void validate() const {
        SolverConfig::validate();
        if (d1 < 1 || d2 < 1) throw std::invalid_argument("RalsConfig: d1, d2 must be positive");
        if (est_rank < 1) throw std::invalid_argument("RalsConfig: est_rank must be positive");
        if (proj_nnz_per_row == 0 && !(s > 1))
            throw std::invalid_argument("RalsConfig: s must exceed 1");
        if (outer_sweeps < 1 || inner_iters < 1 || restarts < 1)
            throw std::invalid_argument("RalsConfig: iteration counts must be positive");
    }
};

/// Per-iteration diagnostics. For the convex solver an iteration is one ADMM
/// step: `objective` is the regularized loss at the current x, `residual` the
/// consensus residual max_k ||x - V_k(Z_k)||_F, `rel_change` the relative
/// x-change. For the alternating solver an iteration is one sweep over all
/// cores: `objective` is the loss with the projected regularizer, `residual`
/// the masked RMSE.
struct SolverReport {
    std::string solver;
    std::vector<double> objective;
    std::vector<double> residual;
    std::vector<double> rel_change;
    int iterations = 0;
    double wall_seconds = 0;
    bool converged = false;
};

}  // namespace ttc
