#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ntkkan/linalg.hpp"
#include "ntkkan/rng.hpp"
#include "support/eig_oracle.hpp"

using namespace ntkkan;

namespace {

using ntkkan_test::Tridiag;
using ntkkan_test::givens_tridiagonalize;
using ntkkan_test::kth_eigenvalue_bisect;

Matrix random_symmetric(Rng& rng, int n) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    return a;
}

} // namespace

TEST_CASE("identity and diagonal matrices", "[linalg]") {
    SymmetricEigenSolver id(Matrix::Identity(5, 5));
    for (int i = 0; i < 5; ++i) CHECK(id.values()[i] == Catch::Approx(1.0).margin(1e-14));

    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = -2.0;
    d(1, 1) = 0.5;
    d(2, 2) = 7.0;
    SymmetricEigenSolver es(d);
    CHECK(es.values()[0] == Catch::Approx(-2.0).margin(1e-14));
    CHECK(es.values()[1] == Catch::Approx(0.5).margin(1e-14));
    CHECK(es.values()[2] == Catch::Approx(7.0).margin(1e-14));
}

TEST_CASE("rank-1 matrix has one nonzero eigenvalue", "[linalg]") {
    Vector v(4);
    v << 1.0, -2.0, 0.5, 3.0;
    Matrix a = v * v.transpose();
    SymmetricEigenSolver es(a);
    CHECK(es.values()[3] == Catch::Approx(v.squaredNorm()).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(es.values()[i]) <= 1e-12 * v.squaredNorm());
}

TEST_CASE("eigenpairs satisfy A v = lambda v", "[linalg]") {
    Rng rng(31);
    for (int n : {2, 5, 17, 40}) {
        Matrix a = random_symmetric(rng, n);
        SymmetricEigenSolver es(a);
        for (int i = 0; i < n; ++i) {
            const Vector r = a * es.vectors().col(i) - es.values()[i] * es.vectors().col(i);
            REQUIRE(r.norm() <= 1e-10 * std::max(1.0, std::abs(es.values()[i])) * n);
            REQUIRE(es.vectors().col(i).norm() == Catch::Approx(1.0).margin(1e-10));
        }
        // ascending order
        for (int i = 1; i < n; ++i) REQUIRE(es.values()[i] >= es.values()[i - 1] - 1e-12);
    }
}

TEST_CASE("eigenvalues match the inertia-bisection oracle", "[linalg][slow]") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform() * 30);
        Matrix a = random_symmetric(rng, n);
        if (trial % 3 == 0) a *= 50.0;  // vary the scale
        SymmetricEigenSolver es(a);
        const Tridiag t = givens_tridiagonalize(a);
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * n);
        for (int k = 0; k < n; ++k) {
            const double oracle = kth_eigenvalue_bisect(t, k);
            REQUIRE(std::abs(es.values()[k] - oracle) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("repeated eigenvalues handled", "[linalg]") {
    Matrix a = 3.0 * Matrix::Identity(6, 6);
    a(5, 5) = 1.0;
    SymmetricEigenSolver es(a);
    CHECK(es.values()[0] == Catch::Approx(1.0).margin(1e-12));
    for (int i = 1; i < 6; ++i) CHECK(es.values()[i] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("asymmetry rejected", "[linalg]") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0 + 1e-4;
    CHECK_THROWS_AS(SymmetricEigenSolver(a), NonSymmetric);
    Matrix rect(2, 3);
    CHECK_THROWS_AS(SymmetricEigenSolver(rect), NonSymmetric);
}
