#include "rstc/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rstc/errors.hpp"

namespace rstc::num {

namespace {

void require_square(const Eigen::MatrixXd& M, const char* who, int max_n) {
    if (M.rows() != M.cols()) {
        throw numerical_error(std::string(who) + ": matrix must be square, got " +
                              std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
    }
    if (M.rows() < 1 || M.rows() > max_n) {
        throw numerical_error(std::string(who) + ": dimension " + std::to_string(M.rows()) +
                              " outside supported range [1, " + std::to_string(max_n) + "]");
    }
    if (!M.allFinite()) {
        throw numerical_error(std::string(who) + ": matrix has non-finite entries");
    }
}

// Kronecker product, only needed to vectorise Lyapunov equations.
Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return K;
}

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& M, double t) {
    require_square(M, "expm", 64);
    if (!std::isfinite(t)) {
        throw numerical_error("expm: scale factor t is not finite");
    }
    const Eigen::Index n = M.rows();
    Eigen::MatrixXd S = M * t;

    // Scale until ||S / 2^k||_1 <= 0.5, where the truncated Taylor series
    // converges extremely fast (term ratio <= 0.5/j), then square back up.
    const double norm1 = S.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
        S /= std::pow(2.0, squarings);
    }

    // Degree-13 Taylor partial sum of the scaled matrix. With ||S|| <= 0.5
    // the dropped tail is below 0.5^14/14! ~ 7e-16 relative, comfortably
    // inside the 1e-10 accuracy target after squaring.
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    for (int j = 1; j <= 13; ++j) {
        term = (term * S) / static_cast<double>(j);
        E += term;
    }
    for (int k = 0; k < squarings; ++k) {
        E = E * E;
    }
    if (!E.allFinite()) {
        throw numerical_error("expm: overflow while squaring; ||M t|| too large");
    }
    return E;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q) {
    require_square(F, "solve_lyapunov", 16);
    require_square(Q, "solve_lyapunov", 16);
    const Eigen::Index n = F.rows();
    if (Q.rows() != n) {
        throw numerical_error("solve_lyapunov: F and Q dimensions disagree");
    }
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw numerical_error("solve_lyapunov: Q is not symmetric");
    }

    // vec(F^T P) = (I (+) F^T) vec(P) and vec(P F) = (F^T (+) I) vec(P), so
    // the equation becomes a single dense n^2 x n^2 solve.
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd op = kron(I, F.transpose()) + kron(F.transpose(), I);
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(op);
    if (!lu.isInvertible()) {
        throw numerical_error(
            "solve_lyapunov: singular operator (two eigenvalues of F sum to zero; "
            "F is not Hurwitz)");
    }
    const Eigen::VectorXd vec_p = lu.solve(rhs);
    Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), n, n);
    P = 0.5 * (P + P.transpose()).eval();

    // Residual gate scaled to the data: Newton steps inside the Riccati
    // solver pass right-hand sides many orders of magnitude above unity,
    // where an absolute 1e-8 would reject perfectly good solves.
    const double residual = (F.transpose() * P + P * F + Q).norm();
    if (!(residual <= 1e-8 * std::max(1.0, Q.norm()))) {
        throw numerical_error("solve_lyapunov: relative residual " +
                              std::to_string(residual / std::max(1.0, Q.norm())) +
                              " exceeds 1e-8 (ill-conditioned or non-Hurwitz F)");
    }
    return P;
}

Eigen::MatrixXd solve_riccati_dual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Cbar,
                                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                   Eigen::MatrixXd* P_out) {
    require_square(A, "solve_riccati_dual", 16);
    const Eigen::Index n = A.rows();
    const Eigen::Index m = Cbar.rows();
    if (Cbar.cols() != n) {
        throw numerical_error("solve_riccati_dual: Cbar must have as many columns as A");
    }
    require_square(Q, "solve_riccati_dual", 16);
    require_square(R, "solve_riccati_dual", 16);
    if (Q.rows() != n || R.rows() != m) {
        throw numerical_error("solve_riccati_dual: Q or R dimension disagrees with A or Cbar");
    }
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
        (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw numerical_error("solve_riccati_dual: Q and R must be symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> r_llt(R);
    if (r_llt.info() != Eigen::Success) {
        throw numerical_error("solve_riccati_dual: R is not positive definite");
    }

    // Bass construction of a stabilising initial gain: for any beta making
    // -(A + beta I) Hurwitz, i.e. beta above the magnitude of A's most
    // negative eigenvalue real part, the shifted Lyapunov equation
    //     (A + beta I)^T Z + Z (A + beta I) = 2 Cbar^T Cbar
    // has a unique solution, positive definite whenever (A, Cbar) is
    // observable, and L0 = Z^{-1} Cbar^T places A - L0 Cbar left of the
    // imaginary axis: substituting L0 into the equation gives
    // (A - L0 Cbar)^T Z + Z (A - L0 Cbar) = -2 beta Z, a Lyapunov
    // certificate with Z > 0.
    //
    // The shift is kept as small as possible because the Gramian's
    // condition number, and with it the norm of L0, grows geometrically
    // with beta; an oversized shift yields a stabilising but enormous gain
    // whose closed loop is too ill-conditioned for the Newton steps below.
    // A power-of-two ladder finds a workable shift, capped by the
    // symmetric-part eigenvalue bound, which encloses every real part of
    // A's spectrum and is therefore always sufficient.
    const Eigen::MatrixXd sym_a = 0.5 * (A + A.transpose());
    const double beta_cap = 1.0 + std::max(0.0, -sym_eigen(sym_a)(0));
    const Eigen::MatrixXd I_n = Eigen::MatrixXd::Identity(n, n);
    double beta = 1.0;
    while (beta < beta_cap && !is_hurwitz(-(A + beta * I_n))) {
        beta = std::min(2.0 * beta, beta_cap);
    }
    Eigen::MatrixXd L;
    {
        const Eigen::MatrixXd F0 = -(A + beta * Eigen::MatrixXd::Identity(n, n));
        Eigen::MatrixXd Z;
        try {
            Z = solve_lyapunov(F0, 2.0 * Cbar.transpose() * Cbar);
        } catch (const numerical_error&) {
            throw numerical_error(
                "solve_riccati_dual: stabilising start failed (pair looks non-detectable)");
        }
        L = Z.ldlt().solve(Cbar.transpose());
        if (!L.allFinite() || !is_hurwitz(A - L * Cbar)) {
            throw numerical_error(
                "solve_riccati_dual: no stabilising initial gain (pair looks non-detectable)");
        }
    }

    // Newton iteration. Each step is exact policy evaluation of the current
    // gain; the residual decreases monotonically and quadratically near the
    // stabilising solution.
    const Eigen::MatrixXd r_inv = r_llt.solve(Eigen::MatrixXd::Identity(m, m));
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    double residual = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        const Eigen::MatrixXd F = (A - L * Cbar).transpose();
        const Eigen::MatrixXd rhs = Q + L * R * L.transpose();
        try {
            P = solve_lyapunov(F, rhs);
        } catch (const numerical_error&) {
            throw numerical_error(
                "solve_riccati_dual: Newton step lost stability (pair looks non-detectable)");
        }
        L = P * Cbar.transpose() * r_inv;
        residual = (A * P + P * A.transpose() - P * Cbar.transpose() * r_inv * Cbar * P + Q).norm();
        if (residual <= 1e-8) {
            if (P_out != nullptr) {
                *P_out = P;
            }
            return L;
        }
    }
    throw numerical_error("solve_riccati_dual: residual " + std::to_string(residual) +
                          " after 200 Newton steps (pair looks non-detectable)");
}

Eigen::VectorXd sym_eigen(const Eigen::MatrixXd& S, Eigen::MatrixXd* vectors) {
    require_square(S, "sym_eigen", 16);
    const Eigen::Index n = S.rows();
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw numerical_error("sym_eigen: matrix asymmetry exceeds 1e-9");
    }
    Eigen::MatrixXd A = 0.5 * (S + S.transpose());
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);

    auto off_norm = [&A, n]() {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i != j) {
                    acc += A(i, j) * A(i, j);
                }
            }
        }
        return std::sqrt(acc);
    };

    // Cyclic Jacobi: sweep all (p, q) pairs, each rotation zeroing one
    // off-diagonal entry. Quadratic convergence makes a handful of sweeps
    // enough at these dimensions.
    bool converged = (off_norm() <= 1e-12);
    for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::abs(apq) < 1e-300) {
                    continue;
                }
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double sign = (theta >= 0.0) ? 1.0 : -1.0;
                const double tau = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tau * tau + 1.0);
                const double s = tau * c;
                // A <- J^T A J with the Givens rotation J acting on (p, q).
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p);
                    const double akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k);
                    const double aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = V(k, p);
                    const double vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = (off_norm() <= 1e-12);
    }
    if (!converged) {
        throw numerical_error("sym_eigen: Jacobi sweeps did not reach off-diagonal norm 1e-12");
    }

    // Sort eigenvalues ascending, permuting eigenvector columns to match.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    std::sort(order.begin(), order.end(),
              [&A](Eigen::Index a, Eigen::Index b) { return A(a, a) < A(b, b); });
    Eigen::VectorXd values(n);
    Eigen::MatrixXd sorted_vectors(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values(i) = A(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        sorted_vectors.col(i) = V.col(order[static_cast<std::size_t>(i)]);
    }
    if (vectors != nullptr) {
        *vectors = sorted_vectors;
    }
    return values;
}

double spectral_norm(const Eigen::MatrixXd& M) {
    if (M.size() == 0) {
        throw numerical_error("spectral_norm: empty matrix");
    }
    if (!M.allFinite()) {
        throw numerical_error("spectral_norm: matrix has non-finite entries");
    }
    // Use the smaller Gram matrix of the two; eigenvalues of M^T M and
    // M M^T agree on the nonzero spectrum.
    const bool tall = M.rows() >= M.cols();
    const Eigen::MatrixXd gram = tall ? Eigen::MatrixXd(M.transpose() * M)
                                      : Eigen::MatrixXd(M * M.transpose());
    const Eigen::VectorXd lam = sym_eigen(gram);
    const double top = std::max(0.0, lam(lam.size() - 1));
    return std::sqrt(top);
}

bool is_hurwitz(const Eigen::MatrixXd& F) {
    if (F.rows() != F.cols() || F.rows() < 1) {
        return false;
    }
    Eigen::MatrixXd P;
    try {
        P = solve_lyapunov(F, Eigen::MatrixXd::Identity(F.rows(), F.cols()));
    } catch (const numerical_error&) {
        return false;
    }
    Eigen::VectorXd lam;
    try {
        lam = sym_eigen(P);
    } catch (const numerical_error&) {
        return false;
    }
    return lam(0) > 0.0;
}

}  // namespace rstc::num
