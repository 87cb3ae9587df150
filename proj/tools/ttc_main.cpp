// Command-line harness for tensor-train completion: synthetic validation
// grids, higher-order Markov-chain completion on discrete series, generic
// completion of observation files, and scaling benchmarks.

#include "ttc/experiment.hpp"
#include "ttc/markov.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace ttc;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCap = 3;

/// Relative output paths land under TTC_OUT_DIR when it is set.
std::string resolve_out(const std::string& path) {
    if (path.empty()) return path;
    const char* dir = std::getenv("TTC_OUT_DIR");
    if (!dir || !*dir || std::filesystem::path(path).is_absolute()) return path;
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / path).string();
}

SolverKind parse_solver(const std::string& name) {
    if (name == "admm") return SolverKind::admm;
    if (name == "rals") return SolverKind::rals;
    if (name == "both") return SolverKind::both;
    throw std::invalid_argument("--solver: expected admm, rals or both");
}

/// Exit code for a table of per-cell outcomes: usable results win, a grid
/// where everything hit the resource cap reports the cap, any other total
/// failure is a numerical error.
template <typename Row>
int table_exit_code(const std::vector<Row>& rows) {
    bool any_ok = false, all_cap = !rows.empty();
    for (const auto& r : rows) {
        if (r.status == "ok") any_ok = true;
        if (r.status.rfind("cap_exceeded", 0) != 0) all_cap = false;
    }
    if (any_ok) return kExitOk;
    if (all_cap) return kExitCap;
    return kExitNumerical;
}

void add_rals_options(CLI::App* cmd, RalsConfig& cfg, Index& d) {
    cmd->add_option("--eta", cfg.eta, "ADMM step size");
    cmd->add_option("--est-rank", cfg.est_rank, "rank of the estimation cores");
    cmd->add_option("--sweeps", cfg.outer_sweeps, "maximum outer sweeps");
    cmd->add_option("--inner-iters", cfg.inner_iters, "inner ADMM steps per core");
    cmd->add_option("--d", d, "projected dimension (D1 = D2)");
    cmd->add_option("--s", cfg.s, "projection sparsity parameter");
    cmd->add_option("--proj-nnz", cfg.proj_nnz_per_row,
                    "fixed nonzeros per projected row (0 = i.i.d. sampling with --s)");
    cmd->add_option("--restarts", cfg.restarts, "random restarts, best run kept");
    cmd->add_option("--tol-rel", cfg.tol_rel, "relative-change stopping tolerance");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-train completion: convex ADMM and randomized alternating solvers"};
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    ExperimentSpec synth;
    std::vector<Index> synth_shape{8, 8, 10, 10};
    std::vector<Index> synth_ranks{3, 5, 7};
    std::string synth_solver = "both";
    std::string synth_out;
    Index synth_d = 10;
    auto* synth_cmd =
        app.add_subcommand("synth", "synthetic completion grid over ranks and lambdas");
    synth_cmd->add_option("--shape", synth_shape, "tensor mode extents")->delimiter(',');
    synth_cmd->add_option("--ranks", synth_ranks, "per-link rank levels (cartesian grid)")
        ->delimiter(',');
    synth_cmd->add_option("--ratio", synth.ratio, "observed fraction of cells");
    synth_cmd->add_option("--sigma2", synth.sigma2, "observation noise variance");
    synth_cmd->add_option("--lambda", synth.lambdas, "regularization grid")->delimiter(',');
    synth_cmd->add_flag("--raw-lambda", synth.raw_lambda,
                        "pass lambda to the solver unscaled instead of dividing by n");
    synth_cmd->add_option("--trials", synth.trials, "trials per grid cell");
    synth_cmd->add_option("--seed", synth.seed, "master seed");
    synth_cmd->add_option("--solver", synth_solver, "admm, rals or both");
    synth_cmd->add_option("--threads", synth.threads, "worker threads over grid cells");
    synth_cmd->add_option("--out", synth_out, "results CSV path");
    synth_cmd->add_option("--max-iter", synth.admm.max_iter, "ADMM iteration cap");
    synth_cmd->add_option("--admm-eta", synth.admm.eta, "ADMM step size");
    add_rals_options(synth_cmd, synth.rals, synth_d);

    // ---- markov ---------------------------------------------------------
    MarkovSpec markov;
    std::string markov_input, markov_solver = "rals", markov_out;
    Index markov_d = 10;
    std::uint64_t sim_length = 0;
    Index sim_order = 2;
    auto* markov_cmd =
        app.add_subcommand("markov", "complete the transition tensor of a discrete time series");
    markov_cmd->add_option("--input", markov_input, "single-column numeric series CSV");
    markov_cmd->add_option("--simulate-length", sim_length,
                           "generate a synthetic series of this length instead of a file");
    markov_cmd->add_option("--simulate-order", sim_order, "history length of the synthetic chain");
    markov_cmd->add_option("--bins", markov.bins, "discretization symbols");
    markov_cmd->add_option("--order", markov.order,
                           "tensor order K (history K-1 plus next symbol)");
    markov_cmd->add_option("--n-obs", markov.n_obs, "observed cells fed to the solver");
    markov_cmd->add_option("--split", markov.split, "leading fraction of the series for training");
    markov_cmd->add_option("--lambda", markov.lambdas, "regularization grid")->delimiter(',');
    markov_cmd->add_flag("--raw-lambda", markov.raw_lambda, "pass lambda unscaled");
    markov_cmd->add_flag("--visited-only", markov.visited_only,
                         "sample observations from visited-history slices only");
    markov_cmd->add_option("--seed", markov.seed, "master seed");
    markov_cmd->add_option("--solver", markov_solver, "admm, rals or both");
    markov_cmd->add_option("--out", markov_out, "results CSV path");
    markov_cmd->add_option("--max-iter", markov.admm.max_iter, "ADMM iteration cap");
    add_rals_options(markov_cmd, markov.rals, markov_d);

    // ---- complete -------------------------------------------------------
    CompleteSpec complete;
    std::string complete_obs, complete_solver = "rals", complete_prefix = "completed";
    std::vector<Index> complete_shape;
    double complete_lambda = 0.0;
    Index complete_d = 10;
    auto* complete_cmd = app.add_subcommand("complete", "complete an observation CSV");
    complete_cmd->add_option("--obs", complete_obs, "observation CSV (i1,...,iK,y)")->required();
    complete_cmd->add_option("--shape", complete_shape, "tensor mode extents")
        ->delimiter(',')
        ->required();
    complete_cmd->add_option("--solver", complete_solver, "admm or rals");
    complete_cmd->add_option("--lambda", complete_lambda, "regularization coefficient (unscaled)");
    complete_cmd->add_option("--out", complete_prefix, "output path prefix");
    complete_cmd->add_option("--max-iter", complete.admm.max_iter, "ADMM iteration cap");
    complete_cmd->add_option("--admm-eta", complete.admm.eta, "ADMM step size");
    complete_cmd->add_option("--seed", complete.rals.seed, "solver seed");
    add_rals_options(complete_cmd, complete.rals, complete_d);

    // ---- bench ----------------------------------------------------------
    BenchSpec bench;
    std::string bench_solver = "rals", bench_out;
    Index bench_d = 10;
    auto* bench_cmd = app.add_subcommand("bench", "per-sweep timing across tensor orders");
    bench_cmd->add_option("--k-list", bench.k_list, "tensor orders to time")->delimiter(',');
    bench_cmd->add_option("--dim", bench.dim, "mode extent");
    bench_cmd->add_option("--rank", bench.truth_rank, "rank of the synthetic truth");
    bench_cmd->add_option("--n-obs", bench.n_obs, "observed cells");
    bench_cmd->add_option("--bench-sweeps", bench.sweeps, "timed sweeps per order");
    bench_cmd->add_option("--seed", bench.seed, "seed");
    bench_cmd->add_option("--solver", bench_solver, "admm or rals");
    bench_cmd->add_option("--out", bench_out, "timing CSV path");
    bench_cmd->add_option("--lambda", bench.rals.lambda, "regularization coefficient (unscaled)");
    add_rals_options(bench_cmd, bench.rals, bench_d);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            synth.shape = Shape(synth_shape);
            synth.rank_levels = synth_ranks;
            synth.solver = parse_solver(synth_solver);
            synth.rals.d1 = synth.rals.d2 = synth_d;
            auto rows = run_synth(synth);
            if (!synth_out.empty()) {
                write_synth_csv(rows, resolve_out(synth_out));
                std::cerr << "wrote " << rows.size() << " rows to " << resolve_out(synth_out)
                          << "\n";
            }
            for (const auto& r : rows)
                std::cout << r.solver << " K=" << r.order << " ranks=" << format_ranks(r.ranks)
                          << " srr=" << r.srr << " lambda=" << r.lambda << " trial=" << r.trial
                          << " error=" << r.error << " seconds=" << r.seconds
                          << " iters=" << r.iterations << " status=" << r.status << "\n";
            return table_exit_code(rows);
        }
        if (markov_cmd->parsed()) {
            markov.solver = parse_solver(markov_solver);
            markov.rals.d1 = markov.rals.d2 = markov_d;
            std::vector<double> series;
            if (!markov_input.empty()) {
                series = read_series_csv(markov_input);
            } else if (sim_length > 0) {
                MarkovChain chain = random_markov_chain(markov.bins, sim_order, markov.seed + 1);
                auto symbols = chain.simulate(sim_length, markov.seed + 2);
                series.assign(symbols.begin(), symbols.end());
            } else {
                std::cerr << "markov: provide --input or --simulate-length\n";
                return kExitUsage;
            }
            auto rows = run_markov(markov, series);
            if (!markov_out.empty()) {
                auto out = ttc::detail::open_out(resolve_out(markov_out));
                out << "solver,K,lambda,error,seconds,iters,status\n";
                for (const auto& r : rows)
                    out << r.solver << ',' << r.order << ',' << r.lambda << ',' << r.error << ','
                        << r.seconds << ',' << r.iterations << ',' << r.status << '\n';
            }
            for (const auto& r : rows)
                std::cout << r.solver << " K=" << r.order << " lambda=" << r.lambda
                          << " error=" << r.error << " seconds=" << r.seconds
                          << " status=" << r.status << "\n";
            return table_exit_code(rows);
        }
        if (complete_cmd->parsed()) {
            complete.obs_csv = complete_obs;
            complete.shape = Shape(complete_shape);
            complete.solver = parse_solver(complete_solver);
            if (complete.solver == SolverKind::both) {
                std::cerr << "complete: pick one solver (admm or rals)\n";
                return kExitUsage;
            }
            complete.admm.lambda = complete_lambda;
            complete.rals.lambda = complete_lambda;
            complete.rals.d1 = complete.rals.d2 = complete_d;
            complete.out_prefix = resolve_out(complete_prefix);
            CompleteResult res = run_complete(complete);
            std::cout << "solution: " << res.solution_path << "\nreport: " << res.report_path
                      << "\nmasked rmse: " << res.masked_rmse << "\n";
            return kExitOk;
        }
        if (bench_cmd->parsed()) {
            bench.solver = parse_solver(bench_solver);
            bench.rals.d1 = bench.rals.d2 = bench_d;
            auto rows = run_bench(bench);
            if (!bench_out.empty()) write_bench_csv(rows, resolve_out(bench_out));
            for (const auto& r : rows)
                std::cout << r.solver << " K=" << r.order << " n=" << r.n
                          << " per_iter_seconds=" << r.per_iteration_seconds
                          << " peak_rss_kb=" << r.peak_rss_kb << " status=" << r.status << "\n";
            int ok_rows = 0;
            for (const auto& r : rows)
                if (r.status == "ok") ++ok_rows;
            if (ok_rows >= 2)
                std::cout << "fitted exponent of per-sweep time vs K: " << bench_poly_exponent(rows)
                          << "\n";
            return table_exit_code(rows);
        }
    } catch (const ttc::CapExceededError& e) {
        std::cerr << "resource cap exceeded: " << e.what() << "\n";
        return kExitCap;
    } catch (const ttc::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
