#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "matmuon/optim.hpp"
#include "matmuon/prng.hpp"
#include "support.hpp"

using namespace matmuon;
using namespace matmuon::optim;
using testsupport::matrix_with_spectrum;
using testsupport::random_matrix;

namespace {

Matrix diag2(double a, double b) { return Matrix(2, 2, {a, 0, 0, b}); }

HyperParams base_hp() {
    HyperParams hp;
    hp.eta = 0.1;
    hp.beta = 1.0;
    hp.lambda = 0.0;
    hp.tau = 0.01;
    hp.switch_mode = SwitchMode::ExactGap;
    hp.ortho_mode = OrthoMode::ExactSvd;
    return hp;
}

bool outcome_bitwise_equal(const StepOutcome& a, const StepOutcome& b) {
    return bitwise_equal(a.new_state.w, b.new_state.w) &&
           bitwise_equal(a.new_state.m, b.new_state.m) && a.new_state.t == b.new_state.t;
}

} // namespace

TEST_CASE("momentum_update fixed values") {
    const Matrix g(2, 2, {1, 2, 3, 4});
    CHECK(bitwise_equal(momentum_update(Matrix(2, 2), g, 1.0), g));
    CHECK(bitwise_equal(momentum_update(g, g, 0.37), g)); // fixed point
    const Matrix m = momentum_update(Matrix(1, 1, {2}), Matrix(1, 1, {4}), 0.5);
    CHECK(m(0, 0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(momentum_update(Matrix(2, 2), Matrix(2, 3), 0.5), ShapeError);
}

TEST_CASE("momentum_update is a convex combination in norm") {
    Xoshiro256pp rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix mp = random_matrix(rng, 4, 3);
        const Matrix g = random_matrix(rng, 4, 3);
        const double beta = 0.05 + 0.95 * rng.uniform01();
        const double lhs = linalg::frobenius_norm(momentum_update(mp, g, beta));
        const double rhs = beta * linalg::frobenius_norm(g) +
                           (1.0 - beta) * linalg::frobenius_norm(mp) + 1e-12;
        CHECK(lhs <= rhs);
    }
}

TEST_CASE("gradient_mapping powers of the spectrum") {
    Xoshiro256pp rng(22);
    const Matrix m = random_matrix(rng, 5, 3);
    CHECK(bitwise_equal(gradient_mapping(m, 1.0, OrthoMode::ExactSvd, 5), m));
    CHECK(bitwise_equal(gradient_mapping(m, 1.0, OrthoMode::NewtonSchulz, 5), m));

    const Matrix o = gradient_mapping(diag2(3, 1), 0.0, OrthoMode::ExactSvd, 5);
    CHECK(linalg::frobenius_norm(o - Matrix::identity(2)) <= 1e-12);

    const Matrix h = gradient_mapping(diag2(4, 1), 0.5, OrthoMode::ExactSvd, 5);
    CHECK(linalg::frobenius_norm(h - diag2(2, 1)) <= 1e-10);
}

TEST_CASE("gradient_mapping drops the numerical nullspace at alpha 0") {
    const Matrix m(3, 3, {4, 0, 0, 0, 1, 0, 0, 0, 0});
    const Matrix o = gradient_mapping(m, 0.0, OrthoMode::ExactSvd, 5);
    const Matrix expect(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 0});
    CHECK(linalg::frobenius_norm(o - expect) <= 1e-12);
}

TEST_CASE("gradient_mapping error cases") {
    CHECK_THROWS_AS(gradient_mapping(Matrix(2, 2), 0.0, OrthoMode::ExactSvd, 5), ZeroInput);
    CHECK_THROWS_AS(gradient_mapping(Matrix::identity(2), 0.5, OrthoMode::NewtonSchulz, 5),
                    UnsupportedMode);
}

TEST_CASE("muon_step fixed values") {
    HyperParams hp = base_hp();
    OptimizerState s = init_state(Matrix(2, 2));
    StepOutcome out = muon_step(s, diag2(4, 1), hp);
    CHECK(out.branch == Branch::Orthogonal);
    CHECK(linalg::frobenius_norm(out.new_state.w - (-0.1 * Matrix::identity(2))) <= 1e-12);
    CHECK(out.new_state.t == 1);

    hp.lambda = 0.5;
    s = init_state(Matrix::identity(2));
    out = muon_step(s, diag2(4, 1), hp);
    // (1 - 0.1*0.5) I - 0.1 I = 0.85 I
    CHECK(linalg::frobenius_norm(out.new_state.w - 0.85 * Matrix::identity(2)) <= 1e-12);
}

TEST_CASE("muon_step update norm is bounded by eta (sqrt r + lambda ||w||)") {
    Xoshiro256pp rng(23);
    HyperParams hp = base_hp();
    hp.beta = 0.6;
    hp.lambda = 0.2;
    for (int trial = 0; trial < 20; ++trial) {
        OptimizerState s = init_state(random_matrix(rng, 4, 3));
        s.m = random_matrix(rng, 4, 3);
        const StepOutcome out = muon_step(s, random_matrix(rng, 4, 3), hp);
        const double bound = hp.eta * std::sqrt(3.0) +
                             hp.eta * hp.lambda * linalg::frobenius_norm(s.w) + 1e-10;
        CHECK(linalg::frobenius_norm(out.new_state.w - s.w) <= bound);
    }
}

TEST_CASE("sgdm_step fixed values") {
    HyperParams hp = base_hp();
    StepOutcome out = sgdm_step(init_state(Matrix(1, 1)), Matrix(1, 1, {2}), hp);
    CHECK(out.branch == Branch::Momentum);
    CHECK(out.new_state.w(0, 0) == doctest::Approx(-0.2));

    hp.lambda = 0.3;
    OptimizerState s = init_state(Matrix(2, 2, {1, 2, 3, 4}));
    out = sgdm_step(s, Matrix(2, 2), hp);
    CHECK(linalg::frobenius_norm(out.new_state.w - (1.0 - 0.1 * 0.3) * s.w) <= 1e-12);

    hp = base_hp();
    hp.beta = 0.5;
    hp.eta = 1.0;
    s = init_state(Matrix(1, 1));
    s.m = Matrix(1, 1, {2});
    out = sgdm_step(s, Matrix(1, 1, {4}), hp);
    CHECK(out.new_state.w(0, 0) == doctest::Approx(-3.0));
}

TEST_CASE("mimuon_step switches on the decision value") {
    HyperParams hp = base_hp();
    const Matrix g = diag2(4, 1); // with beta = 1, m_new = g, gap = 3

    hp.tau = 2.0;
    StepOutcome out = mimuon_step(init_state(Matrix(2, 2)), g, hp);
    CHECK(out.branch == Branch::Orthogonal);
    CHECK(out.gap_value == doctest::Approx(3.0));

    hp.tau = 5.0;
    out = mimuon_step(init_state(Matrix(2, 2)), g, hp);
    CHECK(out.branch == Branch::Momentum);
    CHECK(linalg::frobenius_norm(out.new_state.w - (-0.1 * g)) <= 1e-12);

    hp.switch_mode = SwitchMode::FrobeniusProxy;
    hp.tau = 4.0; // ||diag(4,1)||_F = sqrt(17) ~ 4.123 >= 4
    out = mimuon_step(init_state(Matrix(2, 2)), g, hp);
    CHECK(out.branch == Branch::Orthogonal);
    CHECK(out.gap_value == doctest::Approx(std::sqrt(17.0)));
}

TEST_CASE("mimuon_step takes the orthogonal branch on a tie") {
    HyperParams hp = base_hp();
    hp.switch_mode = SwitchMode::FrobeniusProxy;
    hp.tau = std::sqrt(17.0);
    const StepOutcome out = mimuon_step(init_state(Matrix(2, 2)), diag2(4, 1), hp);
    const double norm17 = linalg::frobenius_norm(diag2(4, 1));
    if (norm17 == hp.tau) // exact tie: ">= tau" picks orthogonal
        CHECK(out.branch == Branch::Orthogonal);
}

TEST_CASE("musgd_step composes the orthogonal and momentum directions") {
    HyperParams hp = base_hp();
    const Matrix g = diag2(4, 1);

    hp.musgd_w_mu = 1.0;
    hp.musgd_w_sgd = 0.0;
    CHECK(outcome_bitwise_equal(musgd_step(init_state(Matrix(2, 2)), g, hp),
                                muon_step(init_state(Matrix(2, 2)), g, hp)));

    hp.musgd_w_mu = 0.0;
    hp.musgd_w_sgd = 1.0;
    CHECK(outcome_bitwise_equal(musgd_step(init_state(Matrix(2, 2)), g, hp),
                                sgdm_step(init_state(Matrix(2, 2)), g, hp)));

    hp.musgd_w_mu = 0.7;
    hp.musgd_w_sgd = 0.4;
    const StepOutcome out = musgd_step(init_state(Matrix(2, 2)), g, hp);
    CHECK(out.new_state.w(0, 0) == doctest::Approx(-0.23));
    CHECK(out.new_state.w(1, 1) == doctest::Approx(-0.11));
    CHECK(out.branch == Branch::Orthogonal);
}

TEST_CASE("orthogonal update direction has norm sqrt(rank)") {
    Xoshiro256pp rng(24);
    HyperParams hp = base_hp();
    hp.beta = 0.5;
    for (int trial = 0; trial < 10; ++trial) {
        OptimizerState s = init_state(random_matrix(rng, 5, 3));
        s.m = random_matrix(rng, 5, 3);
        const StepOutcome out = muon_step(s, random_matrix(rng, 5, 3), hp);
        CHECK(linalg::frobenius_norm(out.update_direction) ==
              doctest::Approx(std::sqrt(3.0)).epsilon(1e-8));
    }
    // rank-deficient momentum: norm sqrt(rank), not sqrt(min(m,n))
    OptimizerState s = init_state(Matrix(4, 3));
    const Matrix g = matrix_with_spectrum(rng, 4, 3, {2.0, 1.0});
    hp.beta = 1.0;
    const StepOutcome out = muon_step(s, g, hp);
    CHECK(linalg::frobenius_norm(out.update_direction) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("mimuon trajectories collapse to sgdm or muon at extreme tau") {
    Xoshiro256pp rng(25);
    for (auto mode : {SwitchMode::ExactGap, SwitchMode::FrobeniusProxy}) {
        HyperParams hp = base_hp();
        hp.beta = 0.4;
        hp.lambda = 0.1;
        hp.switch_mode = mode;

        hp.tau = 1e308; // above every decision value: pure momentum branch
        OptimizerState a = init_state(Matrix(3, 2));
        OptimizerState b = a;
        for (int t = 0; t < 50; ++t) {
            const Matrix g = random_matrix(rng, 3, 2);
            a = mimuon_step(a, g, hp).new_state;
            b = sgdm_step(b, g, hp).new_state;
        }
        CHECK(bitwise_equal(a.w, b.w));
        CHECK(bitwise_equal(a.m, b.m));

        hp.tau = 1e-300; // below every decision value: pure orthogonal branch
        a = init_state(Matrix(3, 2));
        b = a;
        for (int t = 0; t < 50; ++t) {
            const Matrix g = random_matrix(rng, 3, 2);
            a = mimuon_step(a, g, hp).new_state;
            b = muon_step(b, g, hp).new_state;
        }
        CHECK(bitwise_equal(a.w, b.w));
        CHECK(bitwise_equal(a.m, b.m));
    }
}

TEST_CASE("steps are deterministic") {
    Xoshiro256pp rng(26);
    HyperParams hp = base_hp();
    hp.beta = 0.7;
    OptimizerState s = init_state(random_matrix(rng, 4, 4));
    s.m = random_matrix(rng, 4, 4);
    const Matrix g = random_matrix(rng, 4, 4);
    const StepOutcome a = mimuon_step(s, g, hp);
    const StepOutcome b = mimuon_step(s, g, hp);
    CHECK(outcome_bitwise_equal(a, b));
    CHECK(a.gap_value == b.gap_value);
    CHECK(bitwise_equal(a.update_direction, b.update_direction));
}

TEST_CASE("hyperparams validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    hp.beta = 0.0;
    CHECK_THROWS_AS(hp.validate(), InvalidInput);
    hp = HyperParams{};
    hp.eta = 2.0;
    hp.lambda = 0.5; // lambda * eta == 1 violates lambda < 1/eta
    CHECK_THROWS_AS(hp.validate(), InvalidInput);
    hp = HyperParams{};
    hp.eta = 0.0; // degenerate frozen-iterate runs are allowed
    CHECK_NOTHROW(hp.validate());
    hp = HyperParams{};
    hp.ns_steps = 0;
    CHECK_THROWS_AS(hp.validate(), InvalidInput);
}

TEST_CASE("reference momentum conversion") {
    // mu = (1-beta)/beta inverted, with the step size rescaled by beta
    const HyperParams hp = from_reference_momentum(0.95, 0.02);
    CHECK(hp.beta == doctest::Approx(1.0 / 1.95).epsilon(1e-15));
    CHECK(hp.eta == doctest::Approx(0.02 / 1.95).epsilon(1e-15));
    CHECK((1.0 - hp.beta) / hp.beta == doctest::Approx(0.95).epsilon(1e-12));
    CHECK_THROWS_AS(from_reference_momentum(-0.1, 0.02), InvalidInput);
}
