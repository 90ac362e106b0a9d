#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rstc/safety.hpp"

// Minimal-intervention filter: find the input closest to the nominal one
// that satisfies the hard safety row exactly and the softened rows up to
// quadratically penalised slack,
//
//   minimize  (u - u_nominal)^2 + sum_k p_k sigma_k^2
//   subject to  coeff_j u              >= rhs_j   (hard rows)
//               coeff_j u + sigma_k(j) >= rhs_j   (soft rows)
//               sigma_k >= 0.
//
// The problem is a strictly convex QP in (u, sigma), so the optimum is
// unique. solve() is a primal active-set iteration; oracle_solve() checks
// every active-set combination against the KKT conditions and exists purely
// as an independent correctness reference for tests.

namespace rstc {

struct FilterProblem {
    double u_nominal = 0.0;
    std::vector<SafetyConstraint> rows;
    std::vector<double> penalties;  // one per slack channel

    int n_slacks() const;
    void validate() const;  // channel indices dense, penalties positive, coeffs nonzero
};

struct FilterSolution {
    double u = 0.0;
    Eigen::VectorXd sigma;
    double objective = 0.0;
    std::vector<bool> row_active;  // rows binding at the optimum (diagnostic only)
    int iterations = 0;
};

// Primal active-set solve. Throws numerical_error when the hard rows are
// mutually infeasible (their intervals on u do not intersect) or the
// iteration exceeds its bound; neither occurs for constraint sets produced
// by assemble_constraints, which emit exactly one hard row.
FilterSolution solve(const FilterProblem& problem);

// Exhaustive reference solver: enumerates all 2^m subsets of the m
// constraints as candidate active sets, solves each equality-constrained
// KKT system, and returns the feasible candidate with correct multiplier
// signs and lowest objective. Limited to m <= 12.
FilterSolution oracle_solve(const FilterProblem& problem);

}  // namespace rstc
