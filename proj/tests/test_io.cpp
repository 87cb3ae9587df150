#include "ttc/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <unistd.h>

using namespace ttc;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ttc_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("dense tensor text round trip") {
    TempDir dir;
    Rng rng(3);
    DenseTensor x(Shape({2, 3, 2}));
    for (std::uint64_t f = 0; f < 12; ++f) x[f] = rng.normal();
    write_dense_text(x, dir.file("x.txt"));
    DenseTensor back = read_dense_text(dir.file("x.txt"));
    CHECK(back.shape() == x.shape());
    CHECK((back.values() - x.values()).norm() == 0.0);  // 17 digits round-trip doubles
}

TEST_CASE("dense text rejects malformed input") {
    TempDir dir;
    {
        auto out = std::ofstream(dir.file("bad.txt"));
        out << "2 2 2\n1.0\nxyz\n1.0\n1.0\n";
    }
    try {
        read_dense_text(dir.file("bad.txt"));
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(read_dense_text(dir.file("missing.txt")), std::invalid_argument);
}

TEST_CASE("tt checkpoint round trip") {
    TempDir dir;
    TTTensor tt = random_tt(Shape({3, 4, 2, 3}), {2, 3, 2}, 17);
    write_tt_checkpoint(tt, dir.file("tt.txt"));
    TTTensor back = read_tt_checkpoint(dir.file("tt.txt"));
    REQUIRE(back.shape() == tt.shape());
    REQUIRE(back.internal_ranks() == tt.internal_ranks());
    for (Index c = 0; c < tt.order(); ++c)
        for (Index i = 0; i < tt.shape().dim(c); ++i)
            CHECK((back.slice(c, i) - tt.slice(c, i)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tt checkpoint validates rank chaining") {
    TempDir dir;
    {
        auto out = std::ofstream(dir.file("bad_tt.txt"));
        out << "2\n2 1 2\n1\n1\n1\n1\n2 3 1\n1\n1\n1\n1\n1\n1\n";  // 2 vs 3 mismatch
    }
    CHECK_THROWS_AS(read_tt_checkpoint(dir.file("bad_tt.txt")), std::invalid_argument);
}

TEST_CASE("observation csv round trip and validation") {
    TempDir dir;
    Shape s({3, 4, 2});
    TTTensor tt = random_tt(s, {2, 2}, 5);
    ObservationSet obs = observe(tt, sample_mask(s, 10, 7), 0.1, 9);
    write_observations_csv(obs, dir.file("obs.csv"));
    ObservationSet back = read_observations_csv(dir.file("obs.csv"), s);
    CHECK(back.indices == obs.indices);
    CHECK((back.values - obs.values).norm() == 0.0);

    {
        auto out = std::ofstream(dir.file("bad.csv"));
        out << "i1,i2,i3,y\n0,0,0,1.0\n0,9,0,2.0\n";
    }
    try {
        read_observations_csv(dir.file("bad.csv"), s);
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    {
        auto out = std::ofstream(dir.file("empty.csv"));
        out << "i1,i2,i3,y\n";
    }
    CHECK_THROWS_AS(read_observations_csv(dir.file("empty.csv"), s), std::invalid_argument);
}

TEST_CASE("series csv reads one numeric column with optional header") {
    TempDir dir;
    {
        auto out = std::ofstream(dir.file("series.csv"));
        out << "value\n1.5\n2.5\n-3.0\n";
    }
    auto series = read_series_csv(dir.file("series.csv"));
    REQUIRE(series.size() == 3);
    CHECK(series[0] == 1.5);
    CHECK(series[2] == -3.0);

    {
        auto out = std::ofstream(dir.file("noheader.csv"));
        out << "4.0\n5.0\n";
    }
    CHECK(read_series_csv(dir.file("noheader.csv")).size() == 2);

    {
        auto out = std::ofstream(dir.file("broken.csv"));
        out << "1.0\nnot_a_number\n";
    }
    CHECK_THROWS_AS(read_series_csv(dir.file("broken.csv")), std::invalid_argument);
}

TEST_CASE("solver report serializes with a schema version") {
    SolverReport r;
    r.solver = "admm";
    r.objective = {3.0, 2.0};
    r.residual = {0.5, 0.1};
    r.rel_change = {1.0, 0.2};
    r.iterations = 2;
    r.converged = true;
    auto j = report_to_json(r);
    CHECK(j["schema_version"] == kReportSchemaVersion);
    CHECK(j["solver"] == "admm");
    CHECK(j["objective"].size() == 2);

    TempDir dir;
    write_report_json(r, dir.file("report.json"));
    std::ifstream in(dir.file("report.json"));
    nlohmann::json back = nlohmann::json::parse(in);
    CHECK(back["iterations"] == 2);
    CHECK(back["converged"] == true);
}
