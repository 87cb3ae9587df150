#pragma once

#include "ttc/observation.hpp"
#include "ttc/proximal.hpp"
#include "ttc/solver_common.hpp"

#include <chrono>

namespace ttc {

/// ADMM variables for the convex problem
///   min_X (1/2n) ||Y - X(S)||^2 + lambda * ||X||_{s,T}
/// x is the vectorized tensor, z_k the K-1 consensus unfoldings, alpha_k the
/// scaled dual vectors.
struct AdmmState {
    Shape shape;
    Vector x;
    std::vector<Matrix> z;
    std::vector<Vector> alpha;
    int iteration = 0;
};

namespace detail {

/// Solver footprint in dense-sized arrays: x plus K-1 z's plus K-1 alphas.
inline void check_admm_cap(const Shape& shape, std::uint64_t cap) {
    std::uint64_t arrays = 2 * static_cast<std::uint64_t>(shape.order()) - 1;
    if (shape.num_elements() > cap / arrays)
        throw CapExceededError(
            "tt_admm_solve: state of " + std::to_string(arrays) + " x " +
            std::to_string(shape.num_elements()) + " elements exceeds the cap of " +
            std::to_string(cap));
}

}  // namespace detail

/// Start from the zero-filled observed tensor; duals at zero.
inline AdmmState admm_init(const ObservationSet& obs, const SolverConfig& cfg) {
    cfg.validate();
    detail::check_admm_cap(obs.shape, cfg.dense_cap);
    AdmmState state{obs.shape, {}, {}, {}, 0};
    state.x = adjoint_mask(obs.values, obs.indices, obs.shape, cfg.dense_cap).values();
    for (Index k = 1; k < obs.shape.order(); ++k) {
        state.z.push_back(unfold_vec(state.x, obs.shape, k));
        state.alpha.push_back(Vector::Zero(state.x.size()));
    }
    return state;
}

/// Exact minimizer of the quadratic block: with all Z, alpha fixed, x solves
///   (X*X/n + eta I) x = X*(Y)/n + (eta/(K-1)) sum_k (V_k(Z_k) - alpha_k).
/// X*X is the 0/1 diagonal of observed cells, so the solve is elementwise.
inline Vector admm_x_update(const AdmmState& state, const ObservationSet& obs,
                            const SolverConfig& cfg) {
    double n = static_cast<double>(obs.n());
    Index num_z = static_cast<Index>(state.z.size());
    Vector numer = Vector::Zero(state.x.size());
    for (Index k = 0; k < num_z; ++k)
        numer += fold_vec(state.z[static_cast<std::size_t>(k)], state.shape, k + 1) -
                 state.alpha[static_cast<std::size_t>(k)];
    numer *= cfg.eta / static_cast<double>(num_z);
    Vector denom = Vector::Constant(state.x.size(), cfg.eta);
    for (Index i = 0; i < obs.n(); ++i) {
        auto flat = static_cast<Eigen::Index>(
            state.shape.linearize(obs.indices[static_cast<std::size_t>(i)]));
        numer[flat] += obs.values[i] / n;
        denom[flat] += 1.0 / n;
    }
    return numer.cwiseQuotient(denom);
}

/// Z_k = prox_{lambda/eta}(V_k^{-1}(x + alpha_k)): K-1 independent
/// singular-value shrinkage steps.
inline std::vector<Matrix> admm_z_update(const AdmmState& state, const SolverConfig& cfg) {
    std::vector<Matrix> z;
    z.reserve(state.z.size());
    for (Index k = 1; k < state.shape.order(); ++k) {
        Vector target = state.x + state.alpha[static_cast<std::size_t>(k - 1)];
        z.push_back(prox_schatten(unfold_vec(target, state.shape, k), cfg.lambda / cfg.eta));
    }
    return z;
}

/// alpha_k += x - V_k(Z_k).
inline std::vector<Vector> admm_alpha_update(const AdmmState& state) {
    std::vector<Vector> alpha;
    alpha.reserve(state.alpha.size());
    for (Index k = 1; k < state.shape.order(); ++k)
        alpha.push_back(state.alpha[static_cast<std::size_t>(k - 1)] + state.x -
                        fold_vec(state.z[static_cast<std::size_t>(k - 1)], state.shape, k));
    return alpha;
}

/// The regularized loss (1/2n) ||Y - X(S)||^2 + lambda ||X||_{s,T} at x.
inline double admm_objective(const Vector& x, const ObservationSet& obs,
                             const SolverConfig& cfg) {
    double data = 0;
    for (Index i = 0; i < obs.n(); ++i) {
        auto flat = static_cast<Eigen::Index>(
            obs.shape.linearize(obs.indices[static_cast<std::size_t>(i)]));
        double r = obs.values[i] - x[flat];
        data += r * r;
    }
    data /= 2.0 * static_cast<double>(obs.n());
    double reg = 0;
    for (Index k = 1; k < obs.shape.order(); ++k) reg += schatten1(unfold_vec(x, obs.shape, k));
    reg *= cfg.lambda / static_cast<double>(obs.shape.order() - 1);
    return data + reg;
}

/// Convex completion by ADMM over the consensus splitting of the Schatten TT
/// norm. Stops when both the relative x-change and the scaled consensus
/// residual fall below their tolerances, or at max_iter.
inline std::pair<DenseTensor, SolverReport> tt_admm_solve(const ObservationSet& obs,
                                                          const SolverConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    AdmmState state = admm_init(obs, cfg);
    SolverReport report;
    report.solver = "admm";
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        Vector x_new = admm_x_update(state, obs, cfg);
        double rel = (x_new - state.x).norm() / std::max(1.0, state.x.norm());
        state.x = std::move(x_new);
        state.z = admm_z_update(state, cfg);
        state.alpha = admm_alpha_update(state);
        state.iteration = iter + 1;

        double feas = 0;
        for (Index k = 1; k < state.shape.order(); ++k)
            feas = std::max(feas, (state.x - fold_vec(state.z[static_cast<std::size_t>(k - 1)],
                                                      state.shape, k))
                                      .norm());
        if (!state.x.allFinite()) throw NumericalError("tt_admm_solve: state became non-finite");
        report.objective.push_back(admm_objective(state.x, obs, cfg));
        report.residual.push_back(feas);
        report.rel_change.push_back(rel);
        double feas_scaled = feas / std::max(1.0, state.x.norm());
        if (rel <= cfg.tol_rel && feas_scaled <= cfg.tol_feas) {
            report.converged = true;
            break;
        }
    }
    report.iterations = state.iteration;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {DenseTensor(obs.shape, std::move(state.x), cfg.dense_cap), std::move(report)};
}

}  // namespace ttc
