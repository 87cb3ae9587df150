#pragma once

#include "ttc/io.hpp"
#include "ttc/observation.hpp"
#include "ttc/solver_admm.hpp"
#include "ttc/solver_rals.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace ttc {

/// Runs fn(0..count-1) on a small worker pool; threads <= 1 runs serially.
/// fn must not throw.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int spawned = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(spawned));
    for (int t = 0; t < spawned; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson: need two same-length samples");
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0;
    return sxy / std::sqrt(sxx * syy);
}

/// Least-squares slope of log(y) against log(x).
inline double fit_loglog_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_loglog_exponent: need two same-length samples");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0 || y[i] <= 0) throw std::invalid_argument("fit_loglog_exponent: need positive data");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

/// Peak resident set size from /proc/self/status, in kilobytes (0 when
/// unavailable).
inline std::uint64_t peak_rss_kb() {
    std::ifstream in("/proc/self/status");
    std::string key;
    while (in >> key) {
        if (key == "VmHWM:") {
            std::uint64_t kb = 0;
            in >> kb;
            return kb;
        }
        in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    }
    return 0;
}

/// Synthetic-validation experiment: random TT truths observed at a fixed
/// ratio under Gaussian noise, completed over a rank x lambda x trial grid.
struct ExperimentSpec {
    Shape shape{std::vector<Index>{8, 8, 10, 10}};
    std::vector<Index> rank_levels{3, 5, 7};  // per-mode levels; tuples are the cartesian power
    double ratio = 0.5;
    double sigma2 = 0.01;
    std::vector<double> lambdas{1, 3, 5};
    /// Grid values are divided by n before reaching the solver, so the grid
    /// is expressed against the unnormalized squared loss; set raw_lambda to
    /// pass them through unchanged.
    bool raw_lambda = false;
    int trials = 10;
    std::uint64_t seed = 42;
    SolverKind solver = SolverKind::both;
    int threads = 1;
    SolverConfig admm;
    RalsConfig rals;

    void validate() const {
        if (!(ratio > 0 && ratio <= 1)) throw std::invalid_argument("synth: ratio must be in (0,1]");
        if (sigma2 < 0) throw std::invalid_argument("synth: sigma2 must be nonnegative");
        if (rank_levels.empty() || lambdas.empty()) throw std::invalid_argument("synth: empty grid");
        if (trials < 1) throw std::invalid_argument("synth: trials must be positive");
    }
};

struct SynthRow {
    std::string solver;
    Index order = 0;
    std::vector<Index> ranks;
    double srr = 0;  // sum of root ranks
    double lambda = 0;
    int trial = 0;
    std::uint64_t seed = 0;  // data seed; re-running the cell from it reproduces the row
    double error = -1;
    double seconds = 0;
    int iterations = 0;
    std::string status = "ok";
};

inline double sum_root_ranks(const std::vector<Index>& ranks) {
    double s = 0;
    for (Index r : ranks) s += std::sqrt(static_cast<double>(r));
    return s;
}

/// All rank tuples: the cartesian power of the level set over K-1 links.
inline std::vector<std::vector<Index>> rank_grid(const std::vector<Index>& levels, Index links) {
    std::vector<std::vector<Index>> tuples{{}};
    for (Index pos = 0; pos < links; ++pos) {
        std::vector<std::vector<Index>> next;
        for (const auto& t : tuples)
            for (Index level : levels) {
                auto copy = t;
                copy.push_back(level);
                next.push_back(std::move(copy));
            }
        tuples = std::move(next);
    }
    return tuples;
}

/// One grid cell, reproducible from (spec solver settings, ranks, lambda,
/// data_seed). The data seed fixes the truth, mask and noise; lambda and the
/// solver share the same data within a trial.
inline SynthRow run_synth_cell(const ExperimentSpec& spec, SolverKind solver,
                               const std::vector<Index>& ranks, double lambda, int trial,
                               std::uint64_t data_seed) {
    SynthRow row;
    row.solver = solver == SolverKind::admm ? "admm" : "rals";
    row.order = spec.shape.order();
    row.ranks = ranks;
    row.srr = sum_root_ranks(ranks);
    row.lambda = lambda;
    row.trial = trial;
    row.seed = data_seed;
    try {
        Rng rng(data_seed);
        TTTensor truth = random_tt(spec.shape, ranks, rng.derived(0).seed());
        DenseTensor dense_truth = tt_to_dense(truth);
        // Rescale the truth to unit per-entry RMS. The normalized cores give
        // ||X*|| far below 1 (and shrinking with rank), which would leave the
        // sigma^2 = 0.01 noise orders of magnitude above the signal; the
        // noise level is meant relative to unit-scale entries.
        {
            double norm = dense_truth.frobenius_norm();
            double target = std::sqrt(static_cast<double>(spec.shape.num_elements()));
            if (norm > 0) {
                truth.scale_core(0, target / norm);
                dense_truth.values() *= target / norm;
            }
        }
        auto n = static_cast<std::uint64_t>(
            std::llround(spec.ratio * static_cast<double>(spec.shape.num_elements())));
        n = std::max<std::uint64_t>(1, std::min(n, spec.shape.num_elements()));
        auto mask = sample_mask(spec.shape, n, rng.derived(1).seed());
        ObservationSet obs = observe(truth, mask, std::sqrt(spec.sigma2), rng.derived(2).seed());
        double lambda_n = spec.raw_lambda ? lambda : lambda / static_cast<double>(obs.n());
        if (solver == SolverKind::admm) {
            SolverConfig cfg = spec.admm;
            cfg.lambda = lambda_n;
            auto [xhat, report] = tt_admm_solve(obs, cfg);
            row.error = frobenius_distance(xhat, dense_truth);
            row.seconds = report.wall_seconds;
            row.iterations = report.iterations;
        } else {
            RalsConfig cfg = spec.rals;
            cfg.lambda = lambda_n;
            cfg.seed = rng.derived(3).seed();
            auto [tt, report] = tt_rals_solve(obs, cfg);
            row.error = frobenius_distance(tt, dense_truth);
            row.seconds = report.wall_seconds;
            row.iterations = report.iterations;
        }
    } catch (const CapExceededError& e) {
        row.status = std::string("cap_exceeded: ") + e.what();
    } catch (const NumericalError& e) {
        row.status = std::string("numerical_failure: ") + e.what();
    } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
    }
    return row;
}

/// Runs the full grid. Cells are independent and may run on a worker pool;
/// per-cell seeds are derived ahead of time, so the result (including row
/// order) does not depend on the thread count.
inline std::vector<SynthRow> run_synth(const ExperimentSpec& spec) {
    spec.validate();
    spec.admm.validate();
    spec.rals.validate();
    struct Cell {
        SolverKind solver;
        std::vector<Index> ranks;
        double lambda;
        int trial;
        std::uint64_t data_seed;
    };
    std::vector<Cell> cells;
    auto tuples = rank_grid(spec.rank_levels, spec.shape.order() - 1);
    Rng master(spec.seed);
    std::vector<SolverKind> solvers;
    if (spec.solver == SolverKind::admm || spec.solver == SolverKind::both)
        solvers.push_back(SolverKind::admm);
    if (spec.solver == SolverKind::rals || spec.solver == SolverKind::both)
        solvers.push_back(SolverKind::rals);
    for (SolverKind sk : solvers)
        for (std::size_t ti = 0; ti < tuples.size(); ++ti)
            for (double lam : spec.lambdas)
                for (int trial = 0; trial < spec.trials; ++trial) {
                    std::uint64_t data_seed =
                        master.derived(ti).derived(static_cast<std::uint64_t>(trial)).seed();
                    cells.push_back({sk, tuples[ti], lam, trial, data_seed});
                }
    std::vector<SynthRow> rows(cells.size());
    parallel_for(cells.size(), spec.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        rows[i] = run_synth_cell(spec, c.solver, c.ranks, c.lambda, c.trial, c.data_seed);
    });
    return rows;
}

inline std::string format_ranks(const std::vector<Index>& ranks) {
    std::ostringstream out;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (i) out << 'x';
        out << ranks[i];
    }
    return out.str();
}

inline void write_synth_csv(const std::vector<SynthRow>& rows, const std::string& path) {
    auto out = detail::open_out(path);
    out << "solver,K,ranks,srr,lambda,trial,error,seconds,iters,seed,status\n";
    for (const auto& r : rows) {
        out << r.solver << ',' << r.order << ',' << format_ranks(r.ranks) << ',' << r.srr << ','
            << r.lambda << ',' << r.trial << ',' << r.error << ',' << r.seconds << ','
            << r.iterations << ',' << r.seed << ',' << r.status << '\n';
    }
}

/// Scaling benchmark: times solver sweeps across tensor orders at fixed
/// mode size, rank, observation count and projection size.
struct BenchSpec {
    std::vector<Index> k_list{4, 5, 6, 7, 8, 9, 10};
    Index dim = 10;
    Index truth_rank = 2;  // every link of the synthetic truth
    std::uint64_t n_obs = 10000;
    int sweeps = 2;
    SolverKind solver = SolverKind::rals;
    std::uint64_t seed = 7;
    RalsConfig rals = [] {
        RalsConfig c;
        c.est_rank = 4;
        c.d1 = c.d2 = 10;
        c.proj_nnz_per_row = 64;
        c.inner_iters = 5;
        c.lambda = 1e-4;
        return c;
    }();
    SolverConfig admm;
};

struct BenchRow {
    std::string solver;
    Index order = 0;
    std::uint64_t n = 0;
    double per_iteration_seconds = 0;  // per sweep (rals) or per ADMM step
    double total_seconds = 0;
    int iterations = 0;
    std::uint64_t peak_rss_kb = 0;
    std::string status = "ok";
};

inline std::vector<BenchRow> run_bench(const BenchSpec& spec) {
    std::vector<BenchRow> rows;
    for (Index k : spec.k_list) {
        BenchRow row;
        row.solver = spec.solver == SolverKind::admm ? "admm" : "rals";
        row.order = k;
        try {
            Shape shape(std::vector<Index>(static_cast<std::size_t>(k), spec.dim));
            std::vector<Index> ranks(static_cast<std::size_t>(k - 1), spec.truth_rank);
            TTTensor truth = random_tt(shape, ranks, splitmix64(spec.seed + static_cast<std::uint64_t>(k)));
            std::uint64_t n = std::min<std::uint64_t>(spec.n_obs, shape.num_elements());
            row.n = n;
            auto mask = sample_mask(shape, n, splitmix64(spec.seed ^ 0xb5ad4eceda1ce2a9ULL) + static_cast<std::uint64_t>(k));
            ObservationSet obs = observe(truth, mask, 0.0, 0);
            if (spec.solver == SolverKind::rals) {
                RalsConfig cfg = spec.rals;
                cfg.outer_sweeps = spec.sweeps;
                cfg.tol_rel = 0;  // run every sweep so the timing is uniform
                cfg.seed = splitmix64(spec.seed + 17 * static_cast<std::uint64_t>(k));
                auto [tt, report] = tt_rals_solve(obs, cfg);
                row.total_seconds = report.wall_seconds;
                row.iterations = report.iterations;
                row.per_iteration_seconds = report.wall_seconds / std::max(1, report.iterations);
            } else {
                SolverConfig cfg = spec.admm;
                cfg.max_iter = spec.sweeps;
                cfg.tol_rel = 0;
                auto [x, report] = tt_admm_solve(obs, cfg);
                row.total_seconds = report.wall_seconds;
                row.iterations = report.iterations;
                row.per_iteration_seconds = report.wall_seconds / std::max(1, report.iterations);
            }
            row.peak_rss_kb = peak_rss_kb();
        } catch (const CapExceededError& e) {
            row.status = std::string("cap_exceeded: ") + e.what();
        } catch (const NumericalError& e) {
            row.status = std::string("numerical_failure: ") + e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    auto out = detail::open_out(path);
    out << "solver,K,n,per_iter_seconds,total_seconds,iters,peak_rss_kb,status\n";
    for (const auto& r : rows)
        out << r.solver << ',' << r.order << ',' << r.n << ',' << r.per_iteration_seconds << ','
            << r.total_seconds << ',' << r.iterations << ',' << r.peak_rss_kb << ',' << r.status
            << '\n';
}

/// Polynomial exponent of per-iteration time against K, from the rows that
/// completed.
inline double bench_poly_exponent(const std::vector<BenchRow>& rows) {
    std::vector<double> ks, ts;
    for (const auto& r : rows)
        if (r.status == "ok" && r.per_iteration_seconds > 0) {
            ks.push_back(static_cast<double>(r.order));
            ts.push_back(r.per_iteration_seconds);
        }
    return fit_loglog_exponent(ks, ts);
}

/// General-purpose completion on an observation file.
struct CompleteSpec {
    std::string obs_csv;
    Shape shape{std::vector<Index>{2, 2}};
    SolverKind solver = SolverKind::rals;  // admm or rals
    SolverConfig admm;
    RalsConfig rals;
    std::string out_prefix = "completed";
};

struct CompleteResult {
    SolverReport report;
    std::string solution_path;
    std::string report_path;
    double masked_rmse = 0;
};

inline CompleteResult run_complete(const CompleteSpec& spec) {
    if (spec.solver == SolverKind::both)
        throw std::invalid_argument("run_complete: pick one solver");
    ObservationSet obs = read_observations_csv(spec.obs_csv, spec.shape);
    CompleteResult result;
    result.report_path = spec.out_prefix + ".report.json";
    if (spec.solver == SolverKind::admm) {
        auto [x, report] = tt_admm_solve(obs, spec.admm);
        result.solution_path = spec.out_prefix + ".tensor.txt";
        write_dense_text(x, result.solution_path);
        result.masked_rmse = (apply_mask(x, obs.indices) - obs.values).norm() /
                             std::sqrt(static_cast<double>(obs.n()));
        result.report = std::move(report);
    } else {
        auto [tt, report] = tt_rals_solve(obs, spec.rals);
        result.solution_path = spec.out_prefix + ".tt.txt";
        write_tt_checkpoint(tt, result.solution_path);
        result.masked_rmse = (apply_mask(tt, obs.indices) - obs.values).norm() /
                             std::sqrt(static_cast<double>(obs.n()));
        result.report = std::move(report);
    }
    write_report_json(result.report, result.report_path);
    return result;
}

}  // namespace ttc
