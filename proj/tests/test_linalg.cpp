#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "matmuon/linalg.hpp"
#include "matmuon/prng.hpp"
#include "support.hpp"

using namespace matmuon;
using testsupport::matrix_with_spectrum;
using testsupport::random_matrix;
using testsupport::random_orthonormal;

namespace {

Matrix reconstruct(const linalg::SvdResult& f) {
    Matrix out(f.u.rows(), f.v.rows());
    for (std::size_t k = 0; k < f.sigma.size(); ++k)
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j)
                out(i, j) += f.sigma[k] * f.u(i, static_cast<int>(k)) * f.v(j, static_cast<int>(k));
    return out;
}

void check_svd_invariants(const Matrix& m, double tol = 1e-8) {
    const auto f = linalg::svd(m);
    const double scale = std::max(1.0, linalg::frobenius_norm(m));
    CHECK(linalg::frobenius_norm(reconstruct(f) - m) <= tol * scale);
    CHECK(linalg::orthogonality_defect(f.u) <= tol);
    CHECK(linalg::orthogonality_defect(f.v) <= tol);
    for (std::size_t k = 0; k + 1 < f.sigma.size(); ++k) {
        CHECK(f.sigma[k] >= f.sigma[k + 1]);
        CHECK(f.sigma[k + 1] >= 0.0);
    }
}

} // namespace

TEST_CASE("svd of a positive diagonal matrix is exact") {
    const Matrix m(2, 2, {3, 0, 0, 1});
    const auto f = linalg::svd(m);
    CHECK(f.sigma[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.sigma[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(linalg::frobenius_norm(f.u - Matrix::identity(2)) <= 1e-12);
    CHECK(linalg::frobenius_norm(f.v - Matrix::identity(2)) <= 1e-12);
}

TEST_CASE("svd of a permuted diagonal matrix") {
    const Matrix m(2, 2, {0, 2, 1, 0});
    const auto f = linalg::svd(m);
    CHECK(f.sigma[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.sigma[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(linalg::frobenius_norm(reconstruct(f) - m) <= 1e-10);
}

TEST_CASE("svd singular values of [[1,1],[0,1]] match the characteristic roots") {
    // eigenvalues of M^T M = [[1,1],[1,2]] are (3 +- sqrt5)/2, so the
    // singular values are the golden ratio and its inverse
    const Matrix m(2, 2, {1, 1, 0, 1});
    const auto f = linalg::svd(m);
    CHECK(f.sigma[0] == doctest::Approx(1.6180339887498949).epsilon(1e-10));
    CHECK(f.sigma[1] == doctest::Approx(0.6180339887498949).epsilon(1e-10));
    check_svd_invariants(m, 1e-10);
}

TEST_CASE("svd invariants over random shapes, including rank-deficient and wide") {
    Xoshiro256pp rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        const int m = 1 + static_cast<int>(rng.uniform_index(12));
        const int n = 1 + static_cast<int>(rng.uniform_index(12));
        check_svd_invariants(random_matrix(rng, m, n));
    }
    // exactly rank-deficient constructions
    for (int trial = 0; trial < 10; ++trial) {
        check_svd_invariants(matrix_with_spectrum(rng, 7, 5, {2.0, 1.0, 0.5}));
        check_svd_invariants(matrix_with_spectrum(rng, 4, 6, {1.0}));
    }
    check_svd_invariants(Matrix(5, 3));
    check_svd_invariants(Matrix(3, 8));
}

TEST_CASE("svd handles a wide condition-number range") {
    Xoshiro256pp rng(202);
    for (double cond : {1e2, 1e4, 1e6}) {
        const Matrix m = matrix_with_spectrum(rng, 16, 12, {1.0, 0.5, 1.0 / cond});
        check_svd_invariants(m);
        const auto f = linalg::svd(m);
        CHECK(f.sigma[0] == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(f.sigma[2] == doctest::Approx(1.0 / cond).epsilon(1e-6));
    }
}

TEST_CASE("svd is deterministic: repeated calls are bitwise identical") {
    Xoshiro256pp rng(303);
    const Matrix m = random_matrix(rng, 9, 6);
    const auto f1 = linalg::svd(m);
    const auto f2 = linalg::svd(m);
    CHECK(bitwise_equal(f1.u, f2.u));
    CHECK(bitwise_equal(f1.v, f2.v));
    REQUIRE(f1.sigma.size() == f2.sigma.size());
    for (std::size_t k = 0; k < f1.sigma.size(); ++k) {
        const double a = f1.sigma[k], b = f2.sigma[k];
        CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
    }
}

TEST_CASE("svd rejects non-finite input") {
    Matrix m(2, 2, {1, 2, 3, 4});
    m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(linalg::svd(m), InvalidMatrix);
}

TEST_CASE("svd enforces the exact-path size cap") {
    CHECK_THROWS_AS(linalg::svd(Matrix(513, 513)), InvalidInput);
    CHECK_NOTHROW(linalg::svd(Matrix(600, 4))); // only the thin side is capped
}

TEST_CASE("newton_schulz with cubic coefficients converges on easy inputs") {
    // msign(I) = I; the oracle is the exact SVD, whose orthogonal factor
    // of the identity is the identity itself
    const Matrix q5 = linalg::newton_schulz(Matrix::identity(2), 5, linalg::kClassicCubic);
    CHECK(linalg::frobenius_norm(q5 - Matrix::identity(2)) <= 1e-6);

    Xoshiro256pp rng(404);
    const Matrix orth = random_orthonormal(rng, 6, 3); // fixed point of msign
    const Matrix q = linalg::newton_schulz(orth, 5, linalg::kClassicCubic);
    CHECK(linalg::frobenius_norm(q - orth) <= 1e-5);
}

TEST_CASE("newton_schulz quintic default oscillates near the orthogonal factor") {
    // After frobenius normalization the identity's singular values sit at
    // 1/sqrt2, where five quintic steps land at ~1.1081, giving a frozen
    // frobenius error of 0.15289...; the 5-step iterate stays within the
    // documented oscillation band rather than converging
    const Matrix q = linalg::newton_schulz(Matrix::identity(2), 5);
    const double err = linalg::frobenius_norm(q - Matrix::identity(2));
    CHECK(err == doctest::Approx(0.15289220604208964).epsilon(1e-9));

    Xoshiro256pp rng(505);
    const Matrix m = matrix_with_spectrum(rng, 8, 4, {1.0, 0.8, 0.5, 0.1});
    const Matrix q2 = linalg::newton_schulz(m, 5);
    const auto f = linalg::svd(q2);
    for (double s : f.sigma) {
        CHECK(s >= 0.6);
        CHECK(s <= 1.2);
    }
}

TEST_CASE("newton_schulz approaches the exact orthogonal factor of a random 8x4 input") {
    Xoshiro256pp rng(606);
    const Matrix m = matrix_with_spectrum(rng, 8, 4, {1.0, 0.7, 0.3, 0.1}); // cond 10
    const auto f = linalg::svd(m);
    Matrix exact(8, 4);
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 4; ++j)
                exact(i, j) += f.u(i, k) * f.v(j, k);

    // The quintic plateaus at its oscillation amplitude on this spectrum
    // (frozen from the svd oracle: err 0.4180, defect 0.7268 at 5 steps);
    // the contractive cubic drives both toward zero given enough steps.
    const Matrix q = linalg::newton_schulz(m, 5);
    CHECK(linalg::frobenius_norm(q - exact) <= 0.45);
    CHECK(linalg::orthogonality_defect(q) <= 0.75);

    const Matrix qc = linalg::newton_schulz(m, 8, linalg::kClassicCubic);
    CHECK(linalg::frobenius_norm(qc - exact) <= 0.02);
    CHECK(linalg::orthogonality_defect(qc) <= 0.03);
}

TEST_CASE("newton_schulz cubic error is monotone in the step count") {
    Xoshiro256pp rng(707);
    for (int trial = 0; trial < 20; ++trial) {
        // singular values of the normalized iterate lie in [0.3, 1]
        const double s1 = 0.3 + 0.654 * rng.uniform01();
        const double s2 = std::sqrt(1.0 - s1 * s1);
        const double scale = 0.5 + rng.uniform01();
        const Matrix m = matrix_with_spectrum(rng, 6, 2, {scale * std::max(s1, s2),
                                                          scale * std::min(s1, s2)});
        const auto f = linalg::svd(m);
        Matrix exact(6, 2);
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 2; ++j)
                    exact(i, j) += f.u(i, k) * f.v(j, k);

        double prev = std::numeric_limits<double>::infinity();
        for (int steps = 1; steps <= 5; ++steps) {
            const Matrix q = linalg::newton_schulz(m, steps, linalg::kClassicCubic);
            const double err = linalg::frobenius_norm(q - exact);
            CHECK(err <= prev + 1e-6);
            prev = err;
        }
    }
}

TEST_CASE("newton_schulz error cases") {
    CHECK_THROWS_AS(linalg::newton_schulz(Matrix(3, 3), 5), ZeroInput);
    CHECK_THROWS_AS(linalg::newton_schulz(Matrix::identity(2), 0), InvalidInput);
}

TEST_CASE("singular_gap basics") {
    const std::vector<double> a{3, 1};
    CHECK(linalg::singular_gap(a, 1e-12) == doctest::Approx(2.0));
    const std::vector<double> b{5, 5, 2};
    CHECK(linalg::singular_gap(b, 1e-12) == doctest::Approx(0.0));
    const std::vector<double> c{4, 1, 0}; // zero entries are excluded
    CHECK(linalg::singular_gap(c, 1e-12) == doctest::Approx(3.0));
    const std::vector<double> d{4, 0, 0}; // fewer than two survivors
    CHECK(std::isinf(linalg::singular_gap(d, 1e-12)));
    CHECK_THROWS_AS(linalg::singular_gap(std::vector<double>{}, 1e-12), InvalidInput);
}

TEST_CASE("singular_gap is permutation-invariant and scales linearly") {
    Xoshiro256pp rng(808);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> s(4);
        for (double& v : s) v = rng.uniform01() * 5.0;
        std::sort(s.begin(), s.end(), std::greater<>());
        const double gap = linalg::singular_gap(s, 1e-12);

        // re-sorting a shuffled copy is the identity on sorted input
        std::vector<double> shuffled = s;
        std::swap(shuffled[0], shuffled[3]);
        std::sort(shuffled.begin(), shuffled.end(), std::greater<>());
        CHECK(linalg::singular_gap(shuffled, 1e-12) == doctest::Approx(gap));

        const double c = 1.0 + 9.0 * rng.uniform01();
        std::vector<double> scaled = s;
        for (double& v : scaled) v *= c;
        CHECK(linalg::singular_gap(scaled, 1e-12) ==
              doctest::Approx(c * gap).epsilon(1e-12));
    }
}

TEST_CASE("frobenius_norm fixed values and scale property") {
    CHECK(linalg::frobenius_norm(Matrix::identity(2)) == doctest::Approx(std::sqrt(2.0)));
    CHECK(linalg::frobenius_norm(Matrix(3, 3)) == 0.0);
    CHECK(linalg::frobenius_norm(Matrix(1, 2, {3, 4})) == doctest::Approx(5.0));

    Xoshiro256pp rng(909);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = random_matrix(rng, 5, 4);
        const double c = -3.0 + 6.0 * rng.uniform01();
        CHECK(linalg::frobenius_norm(c * m) ==
              doctest::Approx(std::abs(c) * linalg::frobenius_norm(m)).epsilon(1e-12));
    }
}

TEST_CASE("orthogonality_defect fixed values") {
    CHECK(linalg::orthogonality_defect(Matrix::identity(3)) == doctest::Approx(0.0));
    CHECK(linalg::orthogonality_defect(Matrix(2, 2, {2, 0, 0, 1})) == doctest::Approx(3.0));
    CHECK(linalg::orthogonality_defect(2.0 * Matrix::identity(2)) ==
          doctest::Approx(3.0 * std::sqrt(2.0)));
    CHECK_THROWS_AS(linalg::orthogonality_defect(Matrix(2, 3)), InvalidInput);
}
