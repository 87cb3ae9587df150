#include "ttc/experiment.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <unistd.h>

using namespace ttc;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ttc_exp_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

ExperimentSpec tiny_spec() {
    ExperimentSpec spec;
    spec.shape = Shape({3, 3, 3});
    spec.rank_levels = {1, 2};
    spec.ratio = 0.8;
    spec.sigma2 = 0.01;
    spec.lambdas = {1.0};
    spec.trials = 2;
    spec.seed = 11;
    spec.solver = SolverKind::both;
    spec.admm.max_iter = 200;
    spec.rals.est_rank = 3;
    spec.rals.eta = 0.1;
    spec.rals.outer_sweeps = 10;
    spec.rals.inner_iters = 5;
    spec.rals.d1 = spec.rals.d2 = 5;
    spec.rals.s = 2.0;
    return spec;
}

}  // namespace

TEST_CASE("statistics helpers") {
    std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8};
    CHECK(pearson(x, y) == Catch::Approx(1.0));
    std::vector<double> yn{8, 6, 4, 2};
    CHECK(pearson(x, yn) == Catch::Approx(-1.0));
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1.0}), std::invalid_argument);

    std::vector<double> k{2, 4, 8}, t{4, 16, 64};  // t = k^2
    CHECK(fit_loglog_exponent(k, t) == Catch::Approx(2.0));
}

TEST_CASE("rank_grid enumerates the cartesian power") {
    auto tuples = rank_grid({3, 5, 7}, 3);
    REQUIRE(tuples.size() == 27);
    CHECK(tuples.front() == std::vector<Index>{3, 3, 3});
    CHECK(tuples.back() == std::vector<Index>{7, 7, 7});
    CHECK(sum_root_ranks({3, 5, 7}) ==
          Catch::Approx(std::sqrt(3.0) + std::sqrt(5.0) + std::sqrt(7.0)));
}

TEST_CASE("parallel_for covers every index once") {
    std::vector<std::atomic<int>> hits(200);
    parallel_for(200, 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("run_synth produces a full deterministic grid") {
    ExperimentSpec spec = tiny_spec();
    auto rows = run_synth(spec);
    REQUIRE(rows.size() == 2 * 4 * 1 * 2);  // solvers x tuples x lambdas x trials
    for (const auto& r : rows) {
        CHECK(r.status == "ok");
        CHECK(r.error >= 0);
        CHECK(std::isfinite(r.error));
        CHECK(r.seconds >= 0);
    }

    // the recorded data seed reproduces the row exactly
    const SynthRow& probe = rows[5];
    SolverKind sk = probe.solver == "admm" ? SolverKind::admm : SolverKind::rals;
    SynthRow again = run_synth_cell(spec, sk, probe.ranks, probe.lambda, probe.trial, probe.seed);
    CHECK(again.error == probe.error);

    // thread count changes nothing, including row order
    spec.threads = 3;
    auto rows_mt = run_synth(spec);
    REQUIRE(rows_mt.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows_mt[i].error == rows[i].error);
        CHECK(rows_mt[i].solver == rows[i].solver);
    }
}

TEST_CASE("run_synth interpolation sanity row") {
    ExperimentSpec spec = tiny_spec();
    spec.ratio = 1.0;
    spec.sigma2 = 0.0;
    spec.lambdas = {1e-8};
    spec.trials = 1;
    spec.admm.max_iter = 600;
    spec.rals.eta = 0.05;
    spec.rals.outer_sweeps = 60;
    spec.rals.inner_iters = 10;
    spec.rals.est_rank = 3;
    spec.rals.restarts = 2;
    auto rows = run_synth(spec);
    for (const auto& r : rows) {
        INFO(r.solver << " ranks " << format_ranks(r.ranks));
        CHECK(r.error <= 1e-3);
    }
}

TEST_CASE("synth csv schema") {
    TempDir dir;
    ExperimentSpec spec = tiny_spec();
    spec.solver = SolverKind::admm;
    spec.trials = 1;
    auto rows = run_synth(spec);
    write_synth_csv(rows, dir.file("rows.csv"));
    std::ifstream in(dir.file("rows.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "solver,K,ranks,srr,lambda,trial,error,seconds,iters,seed,status");
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    CHECK(count == rows.size());
}

TEST_CASE("bench rows and polynomial fit") {
    BenchSpec spec;
    spec.k_list = {3, 4, 5};
    spec.dim = 4;
    spec.truth_rank = 2;
    spec.n_obs = 150;
    spec.sweeps = 2;
    spec.rals.est_rank = 3;
    spec.rals.d1 = spec.rals.d2 = 5;
    spec.rals.proj_nnz_per_row = 8;
    spec.rals.inner_iters = 3;
    spec.rals.lambda = 1e-5;
    auto rows = run_bench(spec);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.status == "ok");
        CHECK(r.per_iteration_seconds > 0);
    }
    double expo = bench_poly_exponent(rows);
    CHECK(std::isfinite(expo));
}

TEST_CASE("dense-path bench grows superlinearly on a log scale") {
    BenchSpec spec;
    spec.solver = SolverKind::admm;
    spec.k_list = {4, 6, 8};
    spec.dim = 4;
    spec.truth_rank = 2;
    spec.n_obs = 100;
    spec.sweeps = 3;
    auto rows = run_bench(spec);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.status == "ok");
    // each +2 in K multiplies the state by dim^2 = 16; allow a wide margin
    // for fixed overheads at the small end
    CHECK(rows[2].per_iteration_seconds > 4.0 * rows[0].per_iteration_seconds);
}

TEST_CASE("run_complete round trip") {
    TempDir dir;
    Shape s({3, 4, 3});
    TTTensor truth = random_tt(s, {2, 2}, 55);
    ObservationSet obs = observe(truth, sample_mask(s, 30, 7), 0.01, 9);
    write_observations_csv(obs, dir.file("obs.csv"));

    CompleteSpec spec;
    spec.obs_csv = dir.file("obs.csv");
    spec.shape = s;
    spec.solver = SolverKind::rals;
    spec.rals.lambda = 1e-6;
    spec.rals.est_rank = 3;
    spec.rals.eta = 0.1;
    spec.rals.outer_sweeps = 30;
    spec.rals.inner_iters = 8;
    spec.rals.d1 = spec.rals.d2 = 5;
    spec.rals.s = 2.0;
    spec.out_prefix = dir.file("sol");
    CompleteResult res = run_complete(spec);
    CHECK(res.masked_rmse <= 0.05);

    TTTensor reloaded = read_tt_checkpoint(res.solution_path);
    double rmse = (apply_mask(reloaded, obs.indices) - obs.values).norm() /
                  std::sqrt(static_cast<double>(obs.n()));
    CHECK(rmse == Catch::Approx(res.masked_rmse).margin(1e-9));

    std::ifstream in(res.report_path);
    auto j = nlohmann::json::parse(in);
    CHECK(j["schema_version"] == kReportSchemaVersion);

    spec.solver = SolverKind::admm;
    spec.admm.lambda = 1e-8;
    spec.out_prefix = dir.file("sol_admm");
    CompleteResult res2 = run_complete(spec);
    CHECK(res2.masked_rmse <= 0.05);
    DenseTensor dense = read_dense_text(res2.solution_path);
    CHECK(dense.shape() == s);

    spec.solver = SolverKind::both;
    CHECK_THROWS_AS(run_complete(spec), std::invalid_argument);
}
