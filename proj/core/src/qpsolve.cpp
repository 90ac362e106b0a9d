#include "rstc/qpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rstc/errors.hpp"

namespace rstc {

namespace {

constexpr double kFeasTol = 1e-9;      // primal feasibility tolerance
constexpr double kMultTol = 1e-9;      // dual sign tolerance, relative to the gradient scale
constexpr double kStepTol = 1e-12;     // directional derivative cutoff in the ratio test
constexpr double kDecreaseTol = 1e-16; // relative objective-decrease cutoff for stationarity

// The QP in stacked form over z = (u, sigma_0, ..., sigma_{K-1}):
// objective 0.5 z^T H z + f^T z (plus a constant), constraints G z >= d.
struct Stacked {
    Eigen::VectorXd h_diag;  // diagonal of H (all positive)
    Eigen::VectorXd f;
    Eigen::MatrixXd G;
    Eigen::VectorXd d;
    int n_rows = 0;  // leading problem rows; the rest are sigma >= 0 bounds
};

Stacked stack_problem(const FilterProblem& pb) {
    const int K = pb.n_slacks();
    const int nz = 1 + K;
    const int m = static_cast<int>(pb.rows.size()) + K;
    Stacked s;
    s.h_diag = Eigen::VectorXd::Constant(nz, 2.0);
    for (int k = 0; k < K; ++k) {
        s.h_diag(1 + k) = 2.0 * pb.penalties[static_cast<std::size_t>(k)];
    }
    s.f = Eigen::VectorXd::Zero(nz);
    s.f(0) = -2.0 * pb.u_nominal;
    s.G = Eigen::MatrixXd::Zero(m, nz);
    s.d = Eigen::VectorXd::Zero(m);
    for (std::size_t j = 0; j < pb.rows.size(); ++j) {
        const SafetyConstraint& row = pb.rows[j];
        s.G(static_cast<Eigen::Index>(j), 0) = row.coeff_u;
        if (row.slack_channel >= 0) {
            s.G(static_cast<Eigen::Index>(j), 1 + row.slack_channel) = 1.0;
        }
        s.d(static_cast<Eigen::Index>(j)) = row.rhs;
    }
    for (int k = 0; k < K; ++k) {
        s.G(static_cast<Eigen::Index>(pb.rows.size()) + k, 1 + k) = 1.0;
    }
    s.n_rows = static_cast<int>(pb.rows.size());
    return s;
}

double objective_of(const FilterProblem& pb, const Eigen::VectorXd& z) {
    double J = (z(0) - pb.u_nominal) * (z(0) - pb.u_nominal);
    for (int k = 0; k < pb.n_slacks(); ++k) {
        J += pb.penalties[static_cast<std::size_t>(k)] * z(1 + k) * z(1 + k);
    }
    return J;
}

FilterSolution package(const FilterProblem& pb, const Stacked& s, const Eigen::VectorXd& z,
                       int iterations) {
    FilterSolution out;
    out.u = z(0);
    out.sigma = z.tail(z.size() - 1);
    out.objective = objective_of(pb, z);
    out.iterations = iterations;
    out.row_active.resize(pb.rows.size());
    for (std::size_t j = 0; j < pb.rows.size(); ++j) {
        const Eigen::Index jj = static_cast<Eigen::Index>(j);
        const double gap = s.G.row(jj).dot(z) - s.d(jj);
        out.row_active[j] = std::abs(gap) <= 1e-7 * std::max(1.0, std::abs(s.d(jj)));
    }

    // Hard rows exact, slacks non-negative: both are contract guarantees,
    // so a violation here is a solver bug surfaced loudly.
    for (std::size_t j = 0; j < pb.rows.size(); ++j) {
        if (pb.rows[j].slack_channel < 0) {
            const double gap = s.G.row(static_cast<Eigen::Index>(j)).dot(z) -
                               s.d(static_cast<Eigen::Index>(j));
            if (gap < -kFeasTol) {
                throw numerical_error("qp: hard row violated by " + std::to_string(-gap));
            }
        }
    }
    for (Eigen::Index k = 1; k < z.size(); ++k) {
        if (z(k) < -1e-12) {
            throw numerical_error("qp: negative slack " + std::to_string(z(k)));
        }
    }
    return out;
}

// Interval on u implied by the hard rows alone; infeasibility here is the
// only way the whole QP can be infeasible, since every soft row can be
// bought off with slack.
void hard_interval(const FilterProblem& pb, double& lo, double& hi) {
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    for (const SafetyConstraint& row : pb.rows) {
        if (row.slack_channel >= 0) {
            continue;
        }
        if (row.coeff_u > 0.0) {
            lo = std::max(lo, row.rhs / row.coeff_u);
        } else if (row.coeff_u < 0.0) {
            hi = std::min(hi, row.rhs / row.coeff_u);
        } else if (row.rhs > kFeasTol) {
            throw numerical_error("qp: hard row with zero input coefficient and positive bound "
                                  "is unsatisfiable");
        }
    }
    if (lo > hi + 1e-12) {
        throw numerical_error("qp: hard rows are mutually infeasible (interval [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "])");
    }
}

}  // namespace

int FilterProblem::n_slacks() const {
    int top = -1;
    for (const SafetyConstraint& row : rows) {
        top = std::max(top, row.slack_channel);
    }
    return top + 1;
}

void FilterProblem::validate() const {
    const int K = n_slacks();
    if (static_cast<int>(penalties.size()) != K) {
        throw config_error("qp: need one penalty per slack channel, got " +
                           std::to_string(penalties.size()) + " for " + std::to_string(K) +
                           " channels");
    }
    for (double p : penalties) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw config_error("qp: slack penalties must be positive and finite");
        }
    }
    std::vector<bool> used(static_cast<std::size_t>(K), false);
    for (const SafetyConstraint& row : rows) {
        if (row.slack_channel < -1 || row.slack_channel >= K) {
            throw config_error("qp: slack channel index out of range");
        }
        if (row.slack_channel >= 0) {
            used[static_cast<std::size_t>(row.slack_channel)] = true;
        }
        if (!std::isfinite(row.coeff_u) || !std::isfinite(row.rhs)) {
            throw config_error("qp: non-finite constraint row");
        }
        if (row.coeff_u == 0.0) {
            throw config_error("qp: constraint row '" + row.label +
                               "' has no input coefficient");
        }
    }
    for (int k = 0; k < K; ++k) {
        if (!used[static_cast<std::size_t>(k)]) {
            throw config_error("qp: slack channel " + std::to_string(k) +
                               " is not referenced by any row");
        }
    }
    if (!std::isfinite(u_nominal)) {
        throw config_error("qp: non-finite nominal input");
    }
}

FilterSolution solve(const FilterProblem& problem) {
    problem.validate();
    const Stacked s = stack_problem(problem);
    const int nz = static_cast<int>(s.h_diag.size());
    const int m = static_cast<int>(s.G.rows());

    double lo = 0.0;
    double hi = 0.0;
    hard_interval(problem, lo, hi);

    // Feasible start: project the nominal input onto the hard interval and
    // lift each slack just enough to cover its rows there.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(nz);
    z(0) = std::clamp(problem.u_nominal, lo, hi);
    for (std::size_t j = 0; j < problem.rows.size(); ++j) {
        const SafetyConstraint& row = problem.rows[j];
        if (row.slack_channel >= 0) {
            const double need = row.rhs - row.coeff_u * z(0);
            z(1 + row.slack_channel) = std::max(z(1 + row.slack_channel), std::max(0.0, need));
        }
    }

    std::vector<int> working;  // constraint indices held as equalities
    const int max_iter = 100 * (m + 5);
    for (int iter = 1; iter <= max_iter; ++iter) {
        const Eigen::VectorXd grad = s.h_diag.cwiseProduct(z) + s.f;
        // grad^T H^{-1} grad is the natural scale for the objective decrease
        // an unconstrained step could achieve. Stationarity is judged
        // against it so that the huge slack penalties cannot let round-off
        // masquerade as progress: an absolute direction threshold stalls
        // the loop at a fully determined vertex, where the computed step is
        // pure solve residue yet never quite zero.
        const double newton_scale = grad.cwiseQuotient(s.h_diag).dot(grad);

        // Equality-constrained step: minimise the quadratic over directions
        // that stay on every working face. The directions live in the null
        // space of the working rows; a rank-revealing QR of their transpose
        // provides the basis, and the reduced Hessian is positive definite
        // by construction, so one small LDLT solve finds the face
        // minimiser. When the working set pins every degree of freedom the
        // step is exactly zero rather than a round-off residue.
        Eigen::VectorXd p(nz);
        Eigen::VectorXd lambda(static_cast<Eigen::Index>(working.size()));
        if (working.empty()) {
            p = -grad.cwiseQuotient(s.h_diag);
        } else {
            const int w = static_cast<int>(working.size());
            Eigen::MatrixXd gw(w, nz);
            for (int a = 0; a < w; ++a) {
                gw.row(a) = s.G.row(working[static_cast<std::size_t>(a)]);
            }
            const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gw.transpose());
            if (qr.rank() < w) {
                throw numerical_error("qp: working set became linearly dependent");
            }
            if (w == nz) {
                p.setZero();
            } else {
                const Eigen::MatrixXd basis = Eigen::MatrixXd(qr.householderQ());
                const Eigen::MatrixXd Z = basis.rightCols(nz - w);
                const Eigen::MatrixXd hr = Z.transpose() * s.h_diag.asDiagonal() * Z;
                p = -Z * hr.ldlt().solve(Z.transpose() * grad);
            }
            // Multipliers solve Gw^T lambda = grad + H p in least squares;
            // at a stationary point the system is consistent, so only
            // round-off separates this from the exact multipliers whose
            // signs decide which face to release.
            lambda = qr.solve(grad + s.h_diag.cwiseProduct(p));
        }

        const double decrease = p.dot(s.h_diag.cwiseProduct(p));
        if (decrease <= kDecreaseTol * std::max(1.0, newton_scale)) {
            // Stationary on the working faces; optimal once every
            // multiplier is non-negative, otherwise release the face that
            // most wants to separate. The sign test is relative to the
            // gradient scale: multipliers buried below it are round-off,
            // and releasing on their account would cycle.
            if (working.empty()) {
                return package(problem, s, z, iter);
            }
            int drop = -1;
            double worst = -kMultTol * std::max(1.0, grad.lpNorm<Eigen::Infinity>());
            for (int a = 0; a < static_cast<int>(working.size()); ++a) {
                if (lambda(a) < worst) {
                    worst = lambda(a);
                    drop = a;
                }
            }
            if (drop < 0) {
                return package(problem, s, z, iter);
            }
            working.erase(working.begin() + drop);
            continue;
        }

        // Ratio test: walk to the unconstrained minimiser on the working
        // faces unless a new constraint blocks the way first.
        double alpha = 1.0;
        int blocker = -1;
        for (int i = 0; i < m; ++i) {
            if (std::find(working.begin(), working.end(), i) != working.end()) {
                continue;
            }
            const double slope = s.G.row(i).dot(p);
            if (slope >= -kStepTol) {
                continue;
            }
            const double margin = s.G.row(i).dot(z) - s.d(i);
            const double a_i = std::max(0.0, margin / (-slope));
            if (a_i < alpha - 1e-15) {
                alpha = a_i;
                blocker = i;
            }
        }
        z += alpha * p;
        if (blocker >= 0) {
            working.push_back(blocker);
        }
    }
    throw numerical_error("qp: active-set iteration failed to terminate");
}

FilterSolution oracle_solve(const FilterProblem& problem) {
    problem.validate();
    const Stacked s = stack_problem(problem);
    const int nz = static_cast<int>(s.h_diag.size());
    const int m = static_cast<int>(s.G.rows());
    if (m > 12) {
        throw std::invalid_argument("oracle_solve: limited to 12 constraints, got " +
                                    std::to_string(m));
    }

    bool found = false;
    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_z;
    // Each candidate system is solved in scaled variables zs = H^{1/2} z,
    // which turns the Hessian block into the identity and leaves the
    // multipliers untouched. Without the scaling, slack penalties of 1e5
    // against input coefficients of 0.1 push a pivot of a perfectly
    // regular KKT matrix below the LU rank threshold, and the oracle would
    // discard the true optimal active set as singular.
    const Eigen::VectorXd hs = s.h_diag.cwiseSqrt();
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> active;
        for (int i = 0; i < m; ++i) {
            if (mask & (1u << i)) {
                active.push_back(i);
            }
        }
        const int w = static_cast<int>(active.size());
        if (w > nz) {
            continue;  // more equalities than unknowns is never independent
        }
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nz + w, nz + w);
        kkt.topLeftCorner(nz, nz).setIdentity();
        Eigen::VectorXd rhs(nz + w);
        rhs.head(nz) = -s.f.cwiseQuotient(hs);
        for (int a = 0; a < w; ++a) {
            const Eigen::RowVectorXd row_scaled =
                s.G.row(active[static_cast<std::size_t>(a)]).cwiseQuotient(hs.transpose());
            kkt.block(0, nz + a, nz, 1) = -row_scaled.transpose();
            kkt.block(nz + a, 0, 1, nz) = row_scaled;
            rhs(nz + a) = s.d(active[static_cast<std::size_t>(a)]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible()) {
            continue;
        }
        Eigen::VectorXd sol = lu.solve(rhs);
        // One pass of iterative refinement: this solver is the accuracy
        // reference, so it should sit at machine precision, not at
        // cond(KKT) times it.
        sol += lu.solve(rhs - kkt * sol);
        const Eigen::VectorXd z = sol.head(nz).cwiseQuotient(hs);

        bool ok = true;
        for (int i = 0; i < m && ok; ++i) {
            ok = s.G.row(i).dot(z) >= s.d(i) - kFeasTol;
        }
        for (int a = 0; a < w && ok; ++a) {
            ok = sol(nz + a) >= -kMultTol;
        }
        if (ok && objective_of(problem, z) < best_obj) {
            best_obj = objective_of(problem, z);
            best_z = z;
            found = true;
        }
    }
    if (!found) {
        throw numerical_error("qp oracle: no KKT point found (infeasible hard rows)");
    }
    return package(problem, s, best_z, 0);
}

}  // namespace rstc
