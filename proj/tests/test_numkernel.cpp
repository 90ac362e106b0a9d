#include <cmath>
#include <random>
#include <stdexcept>

#include <doctest.h>

#include "rstc/errors.hpp"
#include "rstc/numkernel.hpp"
#include "test_util.hpp"

using namespace rstc;
using rstc::test::randn_mat;
using rstc::test::random_hurwitz;

TEST_SUITE("numkernel") {

TEST_CASE("expm of the zero matrix is the identity") {
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(4, 4);
    CHECK((num::expm(Z) - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("expm of a nilpotent gap-speed block terminates after one term") {
    // A = [[0, -1], [0, 0]] has A^2 = 0, so e^{A t} = I + A t exactly.
    Eigen::MatrixXd A(2, 2);
    A << 0.0, -1.0, 0.0, 0.0;
    const Eigen::MatrixXd E = num::expm(A, 0.7);
    CHECK(E(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(E(0, 1) == doctest::Approx(-0.7).epsilon(1e-14));
    CHECK(E(1, 0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(E(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("expm satisfies the semigroup identity on random matrices") {
    std::mt19937 rng(71);
    std::uniform_real_distribution<double> span(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        const Eigen::MatrixXd M = randn_mat(rng, 5, 5);
        const double s = span(rng);
        const double t = span(rng);
        const Eigen::MatrixXd lhs = num::expm(M, s) * num::expm(M, t);
        const Eigen::MatrixXd rhs = num::expm(M, s + t);
        CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("expm agrees with the scalar exponential on diagonal input") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
    A.diagonal() << -1.0, 0.5, 2.0;
    const Eigen::MatrixXd E = num::expm(A, 1.3);
    for (int i = 0; i < 3; ++i) {
        CHECK(E(i, i) == doctest::Approx(std::exp(A(i, i) * 1.3)).epsilon(1e-13));
    }
    CHECK((E - Eigen::MatrixXd(E.diagonal().asDiagonal())).norm() == 0.0);
}

TEST_CASE("expm preserves the disturbance direction of the platoon model") {
    // The head-speed channel only feeds the first gap and the first gap
    // feeds nothing upstream, so A D = 0 and e^{A t} D = D for every t.
    const auto m = rstc::test::reference_model(4);
    CHECK((m.M.A * m.M.D).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k <= 20; ++k) {
        const double t = 0.1 * k;
        const Eigen::VectorXd v = num::expm(m.M.A, t) * m.M.D;
        CHECK((v - m.M.D).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("expm rejects non-square input") {
    CHECK_THROWS_AS((void)num::expm(Eigen::MatrixXd::Zero(2, 3)), numerical_error);
}

TEST_CASE("solve_lyapunov reproduces closed-form solutions") {
    const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);

    // F = -I: F^T P + P F = -2P = -Q, so P = Q / 2.
    Eigen::MatrixXd P = num::solve_lyapunov(-I2, 2.0 * I2);
    CHECK((P - I2).norm() <= 1e-12);

    // Diagonal F: the equation decouples, P_ii = Q_ii / (2 |F_ii|).
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2, 2);
    F.diagonal() << -1.0, -2.0;
    P = num::solve_lyapunov(F, I2);
    CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(P(1, 1) == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(std::abs(P(0, 1)) <= 1e-13);
}

TEST_CASE("solve_lyapunov residual and symmetry on random Hurwitz matrices") {
    std::mt19937 rng(72);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd F = random_hurwitz(rng, 6);
        Eigen::MatrixXd Q = randn_mat(rng, 6, 6);
        Q = (Q * Q.transpose() + Eigen::MatrixXd::Identity(6, 6)).eval();
        const Eigen::MatrixXd P = num::solve_lyapunov(F, Q);
        CHECK((P - P.transpose()).norm() <= 1e-12 * std::max(1.0, P.norm()));
        const Eigen::MatrixXd res = F.transpose() * P + P * F + Q;
        CHECK(res.norm() <= 1e-8 * std::max(1.0, Q.norm()));
    }
}

TEST_CASE("solve_lyapunov rejects bad input") {
    Eigen::MatrixXd Q(2, 2);
    Q << 1.0, 0.5, 0.4, 1.0;  // asymmetric
    CHECK_THROWS_AS((void)num::solve_lyapunov(-Eigen::MatrixXd::Identity(2, 2), Q),
                    numerical_error);

    // A rotation generator has eigenvalues +-i, which sum to zero in pairs:
    // the Kronecker operator is singular and the solve must refuse.
    Eigen::MatrixXd F(2, 2);
    F << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS((void)num::solve_lyapunov(F, Eigen::MatrixXd::Identity(2, 2)),
                    numerical_error);
}

TEST_CASE("is_hurwitz classifies easy cases") {
    Eigen::MatrixXd S(2, 2);
    S << -1.0, 3.0, 0.0, -2.0;
    CHECK(num::is_hurwitz(S));
    CHECK_FALSE(num::is_hurwitz(Eigen::MatrixXd::Identity(2, 2)));
    Eigen::MatrixXd R(2, 2);
    R << 0.0, 1.0, -1.0, 0.0;  // marginally stable, not Hurwitz
    CHECK_FALSE(num::is_hurwitz(R));
}

TEST_CASE("solve_riccati_dual matches scalar closed forms") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);

    // A = 0, Cbar = 1, Q = R = 1: P^2 = 1 -> P = 1, L = P Cbar / R = 1.
    Eigen::MatrixXd P;
    Eigen::MatrixXd L = num::solve_riccati_dual(0.0 * one, one, one, one, &P);
    CHECK(P(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(L(0, 0) == doctest::Approx(1.0).epsilon(1e-10));

    // A = 1, Q = 0: 2P - P^2 = 0 with the stabilising root P = 2, L = 2
    // (A - L Cbar = -1 < 0; the other root P = 0 would leave A unstable).
    L = num::solve_riccati_dual(one, one, 0.0 * one, one, &P);
    CHECK(P(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(L(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("solve_riccati_dual stabilises the platoon observer pair") {
    const auto m = rstc::test::reference_model(4);
    // Cbar for the delayed channels of the reference platoon; built here
    // directly from its definition to keep this suite self-contained.
    const Eigen::MatrixXd cbar = m.M.C1 * num::expm(m.M.A, -0.0).eval() +
                                 m.M.C2 * num::expm(m.M.A, -0.8);
    Eigen::MatrixXd P;
    const Eigen::MatrixXd I_n = Eigen::MatrixXd::Identity(m.M.n(), m.M.n());
    const Eigen::MatrixXd I_y = Eigen::MatrixXd::Identity(m.M.ny(), m.M.ny());
    const Eigen::MatrixXd L = num::solve_riccati_dual(m.M.A, cbar, I_n, I_y, &P);

    CHECK(num::is_hurwitz(m.M.A - L * cbar));
    const Eigen::MatrixXd res = m.M.A * P + P * m.M.A.transpose() -
                                P * cbar.transpose() * cbar * P + I_n;
    CHECK(res.norm() <= 1e-6);
    // P symmetric positive definite.
    CHECK((P - P.transpose()).norm() <= 1e-10 * P.norm());
    CHECK(num::sym_eigen(0.5 * (P + P.transpose()))(0) > 0.0);
}

TEST_CASE("solve_riccati_dual rejects an undetectable pair") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    CHECK_THROWS_AS((void)num::solve_riccati_dual(one, 0.0 * one, one, one), numerical_error);
}

TEST_CASE("sym_eigen sorts eigenvalues and reconstructs the matrix") {
    Eigen::MatrixXd Dg = Eigen::MatrixXd::Zero(3, 3);
    Dg.diagonal() << 3.0, 1.0, 2.0;
    const Eigen::VectorXd ev = num::sym_eigen(Dg);
    CHECK(ev(0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(ev(1) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(ev(2) == doctest::Approx(3.0).epsilon(1e-13));

    std::mt19937 rng(73);
    Eigen::MatrixXd S = randn_mat(rng, 8, 8);
    S = (0.5 * (S + S.transpose())).eval();
    Eigen::MatrixXd V;
    const Eigen::VectorXd lam = num::sym_eigen(S, &V);
    CHECK((V * lam.asDiagonal() * V.transpose() - S).norm() <= 1e-9 * std::max(1.0, S.norm()));
    CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(8, 8)).norm() <= 1e-9);
    for (int i = 1; i < 8; ++i) {
        CHECK(lam(i) >= lam(i - 1));
    }
}

TEST_CASE("sym_eigen rejects asymmetric input") {
    Eigen::MatrixXd S(2, 2);
    S << 1.0, 0.2, 0.0, 1.0;
    CHECK_THROWS_AS((void)num::sym_eigen(S), numerical_error);
}

TEST_CASE("spectral_norm matches hand values") {
    Eigen::MatrixXd Dg = Eigen::MatrixXd::Zero(2, 2);
    Dg.diagonal() << 3.0, -4.0;
    CHECK(num::spectral_norm(Dg) == doctest::Approx(4.0).epsilon(1e-12));

    // Rank-one outer product: norm equals the product of the factor norms.
    Eigen::VectorXd a(3);
    a << 1.0, 2.0, 2.0;
    Eigen::VectorXd b(2);
    b << 3.0, 4.0;
    CHECK(num::spectral_norm(a * b.transpose()) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("spectral_norm of the delay transition matches its frozen value") {
    const auto m = rstc::test::reference_model(4);
    const double nrm = num::spectral_norm(num::expm(m.M.A, 0.4));
    CHECK(nrm == doctest::Approx(1.3415618583).epsilon(1e-8));
}

}  // TEST_SUITE
