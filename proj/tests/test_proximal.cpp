#include "ttc/proximal.hpp"
#include "ttc/rng.hpp"
#include "ttc/tt_tensor.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ttc;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

/// Closed-form nuclear norm of a 2x2 matrix, independent of any SVD:
/// (s1 + s2)^2 = ||A||_F^2 + 2 |det A|.
double nuclear_2x2(const Matrix& a) {
    return std::sqrt(a.squaredNorm() + 2.0 * std::abs(a.determinant()));
}

double prox_objective_2x2(const Matrix& z, const Matrix& w, double b) {
    return 0.5 * (z - w).squaredNorm() + b * nuclear_2x2(z);
}

}  // namespace

TEST_CASE("svd basics") {
    auto id = svd(Matrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(id.s[i] == Catch::Approx(1.0));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 5;
    d(1, 1) = 2;
    auto f = svd(d);
    CHECK(f.s[0] == Catch::Approx(5.0));
    CHECK(f.s[1] == Catch::Approx(2.0));

    Rng rng(5);
    Matrix m = random_matrix(6, 4, rng);
    auto g = svd(m);
    CHECK((g.u * g.s.asDiagonal() * g.vt - m).norm() <= 1e-10 * m.norm());
    CHECK((g.u.transpose() * g.u - Matrix::Identity(4, 4)).norm() < 1e-8);
    CHECK((g.vt * g.vt.transpose() - Matrix::Identity(4, 4)).norm() < 1e-8);
    for (int i = 0; i + 1 < 4; ++i) CHECK(g.s[i] >= g.s[i + 1]);

    Matrix bad = Matrix::Constant(2, 2, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(svd(bad), NumericalError);
}

TEST_CASE("prox_schatten closed forms") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = 1;
    Matrix p = prox_schatten(d, 2.0);
    CHECK(p(0, 0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(p(1, 1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(std::abs(p(0, 1)) + std::abs(p(1, 0)) < 1e-12);

    Rng rng(8);
    Matrix w = random_matrix(4, 3, rng);
    CHECK((prox_schatten(w, 0.0) - w).norm() == 0.0);  // identity at b = 0

    Matrix q = prox_schatten(w, 0.4);
    auto fw = svd(w);
    auto fq = svd(q);
    for (Eigen::Index i = 0; i < fq.s.size(); ++i)
        CHECK(fq.s[i] == Catch::Approx(std::max(fw.s[i] - 0.4, 0.0)).margin(1e-10));

    CHECK_THROWS_AS(prox_schatten(w, -1.0), std::invalid_argument);
}

TEST_CASE("prox_schatten beats a brute-force grid on random 2x2 problems") {
    Rng rng(99);
    for (int rep = 0; rep < 5; ++rep) {
        Matrix w = random_matrix(2, 2, rng);
        double b = 0.1 + rng.uniform();
        Matrix z = prox_schatten(w, b);
        double best = prox_objective_2x2(z, w, b);
        double span = 0.08 * std::max(1.0, w.cwiseAbs().maxCoeff());
        Matrix cand = z;
        for (int a0 = -20; a0 <= 20; ++a0)
            for (int a1 = -20; a1 <= 20; ++a1)
                for (int a2 = -20; a2 <= 20; ++a2)
                    for (int a3 = -20; a3 <= 20; ++a3) {
                        cand(0, 0) = z(0, 0) + span * a0 / 20.0;
                        cand(0, 1) = z(0, 1) + span * a1 / 20.0;
                        cand(1, 0) = z(1, 0) + span * a2 / 20.0;
                        cand(1, 1) = z(1, 1) + span * a3 / 20.0;
                        REQUIRE(best <= prox_objective_2x2(cand, w, b) + 1e-10);
                    }
    }
}

TEST_CASE("prox firm nonexpansiveness") {
    Rng rng(14);
    for (int rep = 0; rep < 40; ++rep) {
        Matrix a = random_matrix(3, 4, rng);
        Matrix ap = random_matrix(3, 4, rng);
        double b = rng.uniform() * 2;
        CHECK((prox_schatten(a, b) - prox_schatten(ap, b)).norm() <= (a - ap).norm() + 1e-12);
    }
}

TEST_CASE("schatten1 values and eigen oracle") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3;
    d(1, 1) = 1;
    CHECK(schatten1(d) == Catch::Approx(4.0));

    Rng rng(21);
    Vector u = Vector::Zero(4), v = Vector::Zero(3);
    for (int i = 0; i < 4; ++i) u[i] = rng.normal();
    for (int i = 0; i < 3; ++i) v[i] = rng.normal();
    u.normalize();
    v.normalize();
    Matrix rank1 = u * v.transpose();
    CHECK(schatten1(rank1) == Catch::Approx(1.0).margin(1e-10));
    CHECK(schatten1(rank1) == Catch::Approx(rank1.norm()).margin(1e-10));

    Matrix m = random_matrix(4, 4, rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.transpose() * m);
    double oracle = 0;
    for (int i = 0; i < 4; ++i) oracle += std::sqrt(std::max(0.0, eig.eigenvalues()[i]));
    CHECK(schatten1(m) == Catch::Approx(oracle).margin(1e-8));
    CHECK(schatten1(m) >= m.norm() - 1e-12);
}

TEST_CASE("schatten_tt_norm") {
    Rng rng(33);
    Shape s2({3, 4});
    DenseTensor x2(s2);
    for (std::uint64_t f = 0; f < s2.num_elements(); ++f) x2[f] = rng.normal();
    CHECK(schatten_tt_norm(x2) == Catch::Approx(schatten1(unfold(x2, 1))));

    DenseTensor zero(Shape({2, 2, 2}));
    CHECK(schatten_tt_norm(zero) == 0.0);

    // rank-1 tensor with unit Frobenius norm: every unfolding has one
    // singular value, equal to 1
    TTTensor tt(Shape({3, 3, 3}), {1, 1});
    for (Index c = 0; c < 3; ++c) {
        Vector u(3);
        for (int i = 0; i < 3; ++i) u[i] = rng.normal();
        u.normalize();
        for (Index i = 0; i < 3; ++i) tt.slice(c, i)(0, 0) = u[i];
    }
    DenseTensor rank1 = tt_to_dense(tt);
    CHECK(rank1.frobenius_norm() == Catch::Approx(1.0).margin(1e-12));
    CHECK(schatten_tt_norm(rank1) == Catch::Approx(1.0).margin(1e-10));
    for (Index k = 1; k <= 2; ++k) {
        auto f = svd(unfold(rank1, k));
        CHECK(f.s[0] == Catch::Approx(1.0).margin(1e-10));
        CHECK(numerical_rank(f.s) == 1);
    }
}

TEST_CASE("schatten_tt_norm is a norm") {
    Rng rng(55);
    Shape s({3, 2, 4});
    for (int rep = 0; rep < 20; ++rep) {
        DenseTensor a(s), b(s);
        for (std::uint64_t f = 0; f < s.num_elements(); ++f) {
            a[f] = rng.normal();
            b[f] = rng.normal();
        }
        DenseTensor sum(s, a.values() + b.values());
        CHECK(schatten_tt_norm(sum) <= schatten_tt_norm(a) + schatten_tt_norm(b) + 1e-8);
        double alpha = rng.normal();
        DenseTensor scaled(s, alpha * a.values());
        CHECK(schatten_tt_norm(scaled) ==
              Catch::Approx(std::abs(alpha) * schatten_tt_norm(a)).margin(1e-8));
    }
}
