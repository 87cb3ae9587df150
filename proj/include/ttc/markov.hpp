#pragma once

#include "ttc/observation.hpp"
#include "ttc/rng.hpp"
#include "ttc/solver_admm.hpp"
#include "ttc/solver_common.hpp"
#include "ttc/solver_rals.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace ttc {

/// Quantile (equal-mass) discretization of a numeric series into symbols
/// 0..bins-1. Robust to heavy-tailed inputs; ties collapse into one bin.
inline std::vector<Index> discretize_quantile(const std::vector<double>& series, Index bins) {
    if (bins < 2) throw std::invalid_argument("discretize_quantile: bins must be at least 2");
    if (series.empty()) throw std::invalid_argument("discretize_quantile: empty series");
    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (Index j = 1; j < bins; ++j)
        edges.push_back(sorted[series.size() * static_cast<std::size_t>(j) /
                               static_cast<std::size_t>(bins)]);
    std::vector<Index> symbols;
    symbols.reserve(series.size());
    for (double v : series) {
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        symbols.push_back(static_cast<Index>(it - edges.begin()));
    }
    return symbols;
}

/// Empirical conditional-distribution tensor of an order-(K-1) Markov chain:
/// an order-K tensor with every mode of extent `bins`, index
/// (w_{t-K+1}, ..., w_{t-1}, w_t), whose slice at a fixed history is the
/// conditional law of the next symbol. Counts are stored sparsely; slices of
/// histories never seen in the data are the uniform distribution 1/bins.
struct MarkovTensor {
    Shape shape;
    Index bins;
    std::unordered_map<std::uint64_t, double> probs;  // visited cells with mass
    std::unordered_set<std::uint64_t> visited;        // linearized histories

    double value(std::uint64_t flat) const {
        if (!visited.count(flat / static_cast<std::uint64_t>(bins)))
            return 1.0 / static_cast<double>(bins);
        auto it = probs.find(flat);
        return it == probs.end() ? 0.0 : it->second;
    }

    double value(const MultiIndex& idx) const { return value(shape.linearize(idx)); }
};

/// Builds the tensor from a symbol series (symbols already in 0..bins-1).
inline MarkovTensor build_markov_tensor_from_symbols(const std::vector<Index>& symbols,
                                                     Index bins, Index order) {
    if (order < 2) throw std::invalid_argument("build_markov_tensor: order must be at least 2");
    if (static_cast<Index>(symbols.size()) <= order - 1)
        throw std::invalid_argument("build_markov_tensor: series shorter than the history");
    for (Index s : symbols)
        if (s < 0 || s >= bins) throw std::invalid_argument("build_markov_tensor: symbol out of range");
    MarkovTensor mt{Shape(std::vector<Index>(static_cast<std::size_t>(order), bins)), bins, {}, {}};
    std::unordered_map<std::uint64_t, double> counts;
    std::unordered_map<std::uint64_t, double> history_totals;
    for (std::size_t t = static_cast<std::size_t>(order) - 1; t < symbols.size(); ++t) {
        std::uint64_t hist = 0;
        for (Index h = order - 1; h >= 1; --h)
            hist = hist * static_cast<std::uint64_t>(bins) +
                   static_cast<std::uint64_t>(symbols[t - static_cast<std::size_t>(h)]);
        std::uint64_t cell = hist * static_cast<std::uint64_t>(bins) +
                             static_cast<std::uint64_t>(symbols[t]);
        counts[cell] += 1.0;
        history_totals[hist] += 1.0;
        mt.visited.insert(hist);
    }
    for (const auto& [cell, c] : counts)
        mt.probs[cell] = c / history_totals[cell / static_cast<std::uint64_t>(bins)];
    return mt;
}

/// Spec'd entry point: discretizes the numeric series, then counts
/// transitions.
inline MarkovTensor build_markov_tensor(const std::vector<double>& series, Index bins,
                                        Index order) {
    return build_markov_tensor_from_symbols(discretize_quantile(series, bins), bins, order);
}

/// Samples n distinct cells of the tensor (uniformly over all cells, or over
/// visited-history slices only) and reads their values; the observation set
/// fed to the completion solvers.
inline ObservationSet sample_markov_observations(const MarkovTensor& mt, std::uint64_t n,
                                                 std::uint64_t seed, bool visited_only = false) {
    std::vector<MultiIndex> indices;
    if (visited_only) {
        std::vector<std::uint64_t> hists(mt.visited.begin(), mt.visited.end());
        std::sort(hists.begin(), hists.end());
        std::uint64_t cells = hists.size() * static_cast<std::uint64_t>(mt.bins);
        if (n < 1 || n > cells)
            throw std::invalid_argument("sample_markov_observations: n out of range");
        Rng rng(seed);
        std::vector<std::uint64_t> all(cells);
        for (std::uint64_t i = 0; i < cells; ++i) all[i] = i;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint64_t j = i + rng.uniform_below(cells - i);
            std::swap(all[i], all[j]);
            std::uint64_t flat = hists[all[i] / static_cast<std::uint64_t>(mt.bins)] *
                                     static_cast<std::uint64_t>(mt.bins) +
                                 all[i] % static_cast<std::uint64_t>(mt.bins);
            indices.push_back(mt.shape.delinearize(flat));
        }
    } else {
        indices = sample_mask(mt.shape, n, seed);
    }
    Vector values(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i)
        values[static_cast<Eigen::Index>(i)] = mt.value(indices[i]);
    return ObservationSet(mt.shape, std::move(indices), std::move(values));
}

/// Finite-order Markov chain with an explicit transition kernel; used to
/// generate synthetic discrete series with a known ground truth.
struct MarkovChain {
    Index bins;
    Index history;  // chain order (number of conditioning symbols)
    Matrix kernel;  // bins^history rows, each a distribution over bins

    double prob(std::uint64_t hist, Index next) const { return kernel(static_cast<Index>(hist), next); }

    std::vector<Index> simulate(std::size_t length, std::uint64_t seed) const {
        if (length < static_cast<std::size_t>(history))
            throw std::invalid_argument("simulate: length shorter than the history");
        Rng rng(seed);
        std::vector<Index> symbols;
        symbols.reserve(length);
        for (Index h = 0; h < history; ++h)
            symbols.push_back(static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(bins))));
        std::uint64_t hist = 0;
        for (Index h = 0; h < history; ++h)
            hist = hist * static_cast<std::uint64_t>(bins) + static_cast<std::uint64_t>(symbols[static_cast<std::size_t>(h)]);
        std::uint64_t wrap = 1;
        for (Index h = 1; h < history; ++h) wrap *= static_cast<std::uint64_t>(bins);
        while (symbols.size() < length) {
            double u = rng.uniform();
            Index next = bins - 1;
            double acc = 0;
            for (Index b = 0; b < bins; ++b) {
                acc += kernel(static_cast<Index>(hist), b);
                if (u < acc) {
                    next = b;
                    break;
                }
            }
            symbols.push_back(next);
            hist = (hist % wrap) * static_cast<std::uint64_t>(bins) + static_cast<std::uint64_t>(next);
        }
        return symbols;
    }
};

/// Random chain with Dirichlet(1) rows; deterministic per seed.
inline MarkovChain random_markov_chain(Index bins, Index history, std::uint64_t seed) {
    if (bins < 2 || history < 1) throw std::invalid_argument("random_markov_chain: bad sizes");
    std::uint64_t rows = 1;
    for (Index h = 0; h < history; ++h) rows *= static_cast<std::uint64_t>(bins);
    Rng rng(seed);
    Matrix kernel(static_cast<Index>(rows), bins);
    for (Index r = 0; r < static_cast<Index>(rows); ++r) {
        double total = 0;
        for (Index b = 0; b < bins; ++b) {
            double g = -std::log((static_cast<double>(rng.next_u64() >> 11) + 1.0) * 0x1.0p-53);
            kernel(r, b) = g;
            total += g;
        }
        kernel.row(r) /= total;
    }
    return MarkovChain{bins, history, std::move(kernel)};
}

struct MarkovSpec {
    Index bins = 10;
    Index order = 8;  // tensor order K; chain history is K-1
    std::uint64_t n_obs = 10000;
    double split = 0.8;  // leading fraction of the series used for training
    std::vector<double> lambdas = {1, 3, 5};
    bool raw_lambda = false;  // by default grid values are divided by n
    SolverKind solver = SolverKind::rals;
    bool visited_only = false;
    std::uint64_t seed = 42;
    SolverConfig admm;
    RalsConfig rals;
};

struct MarkovRow {
    std::string solver;
    Index order = 0;
    double lambda = 0;  // grid value as given
    double error = -1;  // held-out RMSE
    double seconds = 0;
    int iterations = 0;
    std::string status = "ok";
};

namespace detail {

/// RMSE between the completed tensor and the held-out empirical conditional
/// law, over every slice whose history occurs in the test segment.
template <typename Eval>
double markov_prediction_error(const MarkovTensor& test, Eval&& completed_value) {
    if (test.visited.empty()) throw std::invalid_argument("markov error: empty test segment");
    std::vector<std::uint64_t> hists(test.visited.begin(), test.visited.end());
    std::sort(hists.begin(), hists.end());
    double sq = 0;
    std::size_t count = 0;
    for (std::uint64_t h : hists) {
        for (Index b = 0; b < test.bins; ++b) {
            std::uint64_t flat = h * static_cast<std::uint64_t>(test.bins) + static_cast<std::uint64_t>(b);
            double diff = completed_value(flat) - test.value(flat);
            sq += diff * diff;
            ++count;
        }
    }
    return std::sqrt(sq / static_cast<double>(count));
}

}  // namespace detail

/// The discrete-series completion pipeline: discretize, split, build the
/// train transition tensor, observe n of its cells, complete with the
/// selected solver(s) over the lambda grid, and score each solution against
/// the test segment's empirical law. Cap refusals and numerical failures are
/// recorded in the row status.
inline std::vector<MarkovRow> run_markov(const MarkovSpec& spec, const std::vector<double>& series) {
    if (!(spec.split > 0 && spec.split < 1))
        throw std::invalid_argument("run_markov: split must lie in (0,1)");
    if (spec.lambdas.empty()) throw std::invalid_argument("run_markov: empty lambda grid");
    std::vector<Index> symbols = discretize_quantile(series, spec.bins);
    auto train_len = static_cast<std::size_t>(spec.split * static_cast<double>(symbols.size()));
    if (train_len <= static_cast<std::size_t>(spec.order) ||
        symbols.size() - train_len <= static_cast<std::size_t>(spec.order))
        throw std::invalid_argument("run_markov: series too short for the split");
    std::vector<Index> train(symbols.begin(), symbols.begin() + static_cast<std::ptrdiff_t>(train_len));
    std::vector<Index> test(symbols.begin() + static_cast<std::ptrdiff_t>(train_len), symbols.end());

    MarkovTensor train_tensor = build_markov_tensor_from_symbols(train, spec.bins, spec.order);
    MarkovTensor test_tensor = build_markov_tensor_from_symbols(test, spec.bins, spec.order);
    Rng rng(spec.seed);
    ObservationSet obs =
        sample_markov_observations(train_tensor, spec.n_obs, rng.derived(0).seed(), spec.visited_only);

    std::vector<MarkovRow> rows;
    auto push_solver = [&](const std::string& name) {
        for (double lam : spec.lambdas) {
            MarkovRow row;
            row.solver = name;
            row.order = spec.order;
            row.lambda = lam;
            double lambda_n = spec.raw_lambda ? lam : lam / static_cast<double>(obs.n());
            try {
                if (name == "rals") {
                    RalsConfig cfg = spec.rals;
                    cfg.lambda = lambda_n;
                    cfg.seed = rng.derived(1).seed();
                    auto [tt, report] = tt_rals_solve(obs, cfg);
                    row.error = detail::markov_prediction_error(test_tensor, [&](std::uint64_t flat) {
                        return tt_element(tt, obs.shape.delinearize(flat));
                    });
                    row.seconds = report.wall_seconds;
                    row.iterations = report.iterations;
                } else {
                    SolverConfig cfg = spec.admm;
                    cfg.lambda = lambda_n;
                    auto [dense, report] = tt_admm_solve(obs, cfg);
                    row.error = detail::markov_prediction_error(
                        test_tensor, [&](std::uint64_t flat) { return dense[flat]; });
                    row.seconds = report.wall_seconds;
                    row.iterations = report.iterations;
                }
            } catch (const CapExceededError& e) {
                row.status = std::string("cap_exceeded: ") + e.what();
            } catch (const NumericalError& e) {
                row.status = std::string("numerical_failure: ") + e.what();
            }
            rows.push_back(std::move(row));
        }
    };
    if (spec.solver == SolverKind::rals || spec.solver == SolverKind::both) push_solver("rals");
    if (spec.solver == SolverKind::admm || spec.solver == SolverKind::both) push_solver("admm");
    return rows;
}

}  // namespace ttc
