#pragma once

#include <Eigen/Dense>

// Small dense numerical kernels the rest of the library is built on. All of
// them operate on the modest problem sizes that arise here (state dimension
// 2N+2 with N at most a dozen), so the implementations favour verifiable
// simplicity over asymptotic cleverness: scaling-and-squaring for the matrix
// exponential, a Kronecker-product linear solve for Lyapunov equations, a
// Newton iteration of Lyapunov solves for the filter Riccati equation, and a
// cyclic Jacobi sweep for symmetric eigenvalues. Every routine checks its own
// result and throws rstc::numerical_error instead of returning garbage.

namespace rstc::num {

// Matrix exponential e^{M t}. Scaling-and-squaring with a fixed-degree
// Taylor core: the scaled matrix satisfies ||M t / 2^k||_1 <= 0.5, where the
// degree-13 partial sum is accurate to well below 1e-12, and k squarings
// restore the answer. Intended for ||M t|| up to order 10 and n <= 64.
Eigen::MatrixXd expm(const Eigen::MatrixXd& M, double t = 1.0);

// Solve the continuous Lyapunov equation F^T P + P F = -Q for symmetric P
// via Kronecker vectorisation: (I (+) F^T + F^T (+) I) vec(P) = -vec(Q),
// where (+) is the Kronecker product. Q must be symmetric; P is returned
// symmetrised. Throws numerical_error when the linear system is singular or
// the residual exceeds 1e-8 (both symptoms of F not being Hurwitz: a unique
// solution requires that no two eigenvalues of F sum to zero).
// Intended for n <= 16.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Q);

// Solve the filter (dual) algebraic Riccati equation
//     A P + P A^T - P Cbar^T R^{-1} Cbar P + Q = 0
// for the stabilising P and return the injection gain L = P Cbar^T R^{-1},
// which makes A - L Cbar Hurwitz. Newton iteration: each step solves the
// Lyapunov equation (A - L_k Cbar) P + P (A - L_k Cbar)^T = -(Q + L_k R L_k^T)
// and updates L_{k+1} = P Cbar^T R^{-1}. The starting gain comes from a
// Bass-style shifted Lyapunov construction, which is stabilising whenever
// the pair (A, Cbar) is observable. Q must be symmetric positive
// semidefinite, R symmetric positive definite. Throws numerical_error if no
// stabilising start exists or the iteration fails to reach a residual of
// 1e-8 within 200 steps (symptoms of a non-detectable pair).
// If P_out is non-null the stabilising P is written through it.
Eigen::MatrixXd solve_riccati_dual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Cbar,
                                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                   Eigen::MatrixXd* P_out = nullptr);

// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
// Rejects matrices with asymmetry above 1e-9; iterates until the
// off-diagonal Frobenius norm is at or below 1e-12. If `vectors` is non-null
// it receives the orthonormal eigenvectors as columns, in the same order as
// the eigenvalues. Intended for n <= 16 and moderately scaled matrices.
Eigen::VectorXd sym_eigen(const Eigen::MatrixXd& S, Eigen::MatrixXd* vectors = nullptr);

// Spectral norm ||M||_2 = sqrt(lambda_max(M^T M)), computed through
// sym_eigen on the (symmetric) Gram matrix.
double spectral_norm(const Eigen::MatrixXd& M);

// True iff F is Hurwitz, decided constructively: solve F^T P + P F = -I and
// check that P is positive definite (the Lyapunov stability certificate).
// A failed solve or an indefinite P both mean "not Hurwitz".
bool is_hurwitz(const Eigen::MatrixXd& F);

}  // namespace rstc::num
