#include "ttc/projection.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ttc;

namespace {

/// Dense realization of one projection tensor: rows are the projected
/// dimension, columns the linearized covered modes.
Matrix densify_side(const std::vector<ProjEntry>& entries, Index d, std::uint64_t size) {
    Matrix m = Matrix::Zero(d, static_cast<Index>(size));
    for (const auto& e : entries) m(e.row, static_cast<Index>(e.flat)) += e.weight;
    return m;
}

DenseTensor random_dense(const Shape& s, std::uint64_t seed) {
    Rng rng(seed);
    DenseTensor x(s);
    for (std::uint64_t f = 0; f < s.num_elements(); ++f) x[f] = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("sample_projection stores exact magnitudes and valid indices") {
    Shape s({8, 8, 10, 10});
    auto p = sample_projection(s, 3, 10, 10, 20.0, 5);
    double mag_l = std::sqrt(20.0 / 10.0), mag_r = std::sqrt(20.0 / 10.0);
    for (const auto& e : p.left) {
        CHECK(std::abs(e.weight) == mag_l);
        CHECK(e.row < 10);
        CHECK(e.flat < p.left_size);
    }
    for (const auto& e : p.right) {
        CHECK(std::abs(e.weight) == mag_r);
        CHECK(e.flat < p.right_size);
    }
    CHECK(p.left_size == 640);
    CHECK(p.right_size == 10);

    CHECK_THROWS_AS(sample_projection(s, 3, 10, 10, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(sample_projection(s, 0, 10, 10, 3.0, 5), std::out_of_range);
    CHECK_THROWS_AS(sample_projection(s, 4, 10, 10, 3.0, 5), std::out_of_range);
}

TEST_CASE("sample_projection nonzero fraction matches 1/s") {
    Shape s({1000, 100});
    auto p = sample_projection(s, 1, 100, 4, 4.0, 11);  // 1e5 left candidates
    double frac = static_cast<double>(p.left.size()) / 1e5;
    CHECK(frac == Catch::Approx(0.25).margin(0.01));

    // signs are balanced
    Index plus = 0;
    for (const auto& e : p.left)
        if (e.weight > 0) ++plus;
    CHECK(static_cast<double>(plus) / static_cast<double>(p.left.size()) ==
          Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("sample_projection degenerate sparsity gives an empty projection") {
    Shape s({3, 3});
    auto p = sample_projection(s, 1, 2, 2, 1e12, 7);
    CHECK(p.left.empty());
    CHECK(p.right.empty());
    CHECK(project_dense(p, random_dense(s, 1)).norm() == 0.0);
}

TEST_CASE("sample_projection is deterministic per seed") {
    Shape s({6, 6, 6});
    auto a = sample_projection(s, 2, 8, 8, 3.0, 123);
    auto b = sample_projection(s, 2, 8, 8, 3.0, 123);
    REQUIRE(a.left.size() == b.left.size());
    for (std::size_t i = 0; i < a.left.size(); ++i) {
        CHECK(a.left[i].row == b.left[i].row);
        CHECK(a.left[i].flat == b.left[i].flat);
        CHECK(a.left[i].weight == b.left[i].weight);
    }
}

TEST_CASE("project_dense single-nonzero closed form") {
    Shape s({3, 4});
    DenseTensor x = random_dense(s, 3);
    SparseProjectionPair p;
    p.k = 1;
    p.d1 = 2;
    p.d2 = 2;
    p.s_left = p.s_right = 6.0;
    p.left_size = 3;
    p.right_size = 4;
    double mag_l = p.left_magnitude(), mag_r = p.right_magnitude();
    p.left.push_back({0, 2, mag_l});
    p.right.push_back({0, 1, mag_r});
    Matrix out = project_dense(p, x);
    CHECK(out(0, 0) == Catch::Approx(mag_l * mag_r * x.at(MultiIndex{2, 1})));
    CHECK(out(1, 1) == 0.0);

    CHECK(project_dense(p, DenseTensor(s)).norm() == 0.0);
}

TEST_CASE("project_dense equals the dense-matrix oracle") {
    Shape s({4, 3, 5});
    for (Index k = 1; k <= 2; ++k) {
        for (int rep = 0; rep < 10; ++rep) {
            auto p = sample_projection(s, k, 6, 7, 2.5, 100 + static_cast<std::uint64_t>(rep));
            DenseTensor x = random_dense(s, 200 + static_cast<std::uint64_t>(rep));
            Matrix left = densify_side(p.left, p.d1, p.left_size);
            Matrix right = densify_side(p.right, p.d2, p.right_size);
            Matrix oracle = left * unfold(x, k) * right.transpose();
            CHECK((project_dense(p, x) - oracle).norm() <= 1e-10 * (1 + oracle.norm()));
        }
    }
}

TEST_CASE("project_tt equals project_dense after densification") {
    Rng seeds(2025);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Index> dims, ranks;
        Index order = 4;
        for (Index k = 0; k < order; ++k) dims.push_back(2 + static_cast<Index>(seeds.uniform_below(5)));
        for (Index k = 0; k + 1 < order; ++k) ranks.push_back(1 + static_cast<Index>(seeds.uniform_below(4)));
        Shape s(dims);
        TTTensor tt = random_tt(s, ranks, seeds.next_u64());
        DenseTensor d = tt_to_dense(tt);
        Index k = 1 + static_cast<Index>(seeds.uniform_below(static_cast<std::uint64_t>(order - 1)));
        auto p = sample_projection(s, k, 5, 6, 2.0, seeds.next_u64());
        Matrix via_tt = project_tt(p, tt);
        Matrix via_dense = project_dense(p, d);
        CHECK((via_tt - via_dense).norm() <= 1e-9 * (1 + via_dense.norm()));
    }
}

TEST_CASE("project_tt trivial cases") {
    Shape s({3, 3, 3});
    TTTensor zero(s, {2, 2});
    auto p = sample_projection(s, 2, 4, 4, 2.0, 17);
    CHECK(project_tt(p, zero).norm() == 0.0);

    // rank-1 TT and single nonzeros: the projected entry is the product of
    // the picked core entries and the two magnitudes
    TTTensor tt(s, {1, 1});
    Rng rng(9);
    for (Index c = 0; c < 3; ++c)
        for (Index i = 0; i < 3; ++i) tt.slice(c, i)(0, 0) = rng.normal();
    SparseProjectionPair q;
    q.k = 2;
    q.d1 = q.d2 = 1;
    q.s_left = q.s_right = 4.0;
    q.left_size = 9;
    q.right_size = 3;
    q.left.push_back({0, 5, q.left_magnitude()});   // (j1, j2) = (1, 2)
    q.right.push_back({0, 2, -q.right_magnitude()});
    Matrix out = project_tt(q, tt);
    double expected = q.left_magnitude() * (-q.right_magnitude()) * tt.slice(0, 1)(0, 0) *
                      tt.slice(1, 2)(0, 0) * tt.slice(2, 2)(0, 0);
    CHECK(out(0, 0) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("projection is linear") {
    Shape s({4, 4, 4});
    auto p = sample_projection(s, 2, 6, 6, 2.0, 33);
    DenseTensor x = random_dense(s, 1), y = random_dense(s, 2);
    double a = 1.7, b = -0.6;
    DenseTensor combo(s, a * x.values() + b * y.values());
    Matrix lhs = project_dense(p, combo);
    Matrix rhs = a * project_dense(p, x) + b * project_dense(p, y);
    CHECK((lhs - rhs).norm() <= 1e-10 * (1 + rhs.norm()));
}

TEST_CASE("projection preserves the Frobenius norm in expectation") {
    Shape s({6, 6});
    DenseTensor x = random_dense(s, 44);
    double target = x.frobenius_norm() * x.frobenius_norm();
    double mean = 0;
    int draws = 1000;
    for (int r = 0; r < draws; ++r) {
        auto p = sample_projection(s, 1, 64, 64, 3.0, 9000 + static_cast<std::uint64_t>(r));
        mean += project_dense(p, x).squaredNorm();
    }
    mean /= draws;
    CHECK(mean == Catch::Approx(target).epsilon(0.10));
}

TEST_CASE("budgeted sampling fixes the nonzero count and keeps isometry") {
    Shape s({10, 10, 10});
    auto p = sample_projection_budget(s, 2, 5, 5, 16, 21);
    CHECK(p.left.size() == 5 * 16);
    CHECK(p.right.size() == 5 * 10);  // right side has only 10 candidates per row
    CHECK(p.s_left == Catch::Approx(100.0 / 16.0));
    CHECK(p.s_right == Catch::Approx(1.0));
    for (const auto& e : p.left) CHECK(std::abs(e.weight) == Catch::Approx(p.left_magnitude()));

    DenseTensor x = random_dense(s, 5);
    double target = x.frobenius_norm() * x.frobenius_norm();
    double mean = 0;
    int draws = 600;
    for (int r = 0; r < draws; ++r) {
        auto q = sample_projection_budget(s, 2, 48, 48, 20, 500 + static_cast<std::uint64_t>(r));
        mean += project_dense(q, x).squaredNorm();
    }
    mean /= draws;
    CHECK(mean == Catch::Approx(target).epsilon(0.10));
}

TEST_CASE("theorem threshold formula") {
    CHECK(std::ceil(theorem1_dim_threshold(3, 0.5)) == 58.0);
    CHECK(theorem1_dim_threshold(2, 0.5) == Catch::Approx(50.8489).margin(0.001));
    // the rank term dominates for tiny eps-insensitive ranks
    CHECK(theorem1_dim_threshold(1000, 0.5) == 1000.0);
}

TEST_CASE("norm sandwich holds empirically") {
    Shape s({6, 6, 6, 6});
    auto report = verify_theorem1(s, {2, 2, 2}, 64, 3.0, 0.5, 30, 7);
    CHECK(report.pairs_checked == 90);
    CHECK(report.satisfied_fraction >= 0.5);
    CHECK(report.min_ratio > 0);
    CHECK(report.max_ratio >= report.min_ratio);
    REQUIRE(report.dim_thresholds.size() == 3);
    CHECK(report.dim_thresholds[0] == Catch::Approx(50.8489).margin(0.001));
    CHECK_THROWS_AS(verify_theorem1(s, {100, 2, 2}, 64, 3.0, 0.5, 5, 7), std::invalid_argument);
}
