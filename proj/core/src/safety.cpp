#include "rstc/safety.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rstc/errors.hpp"

namespace rstc {

void SafetyParams::validate() const {
    const std::size_t N = eta.size();
    if (psi_hv.size() != N) {
        throw config_error("safety: psi_hv must have one entry per follower");
    }
    if (gamma.size() != N + 1) {
        throw config_error("safety: gamma needs one entry for the controlled vehicle plus one "
                           "per follower");
    }
    if (slack_penalty.size() != N) {
        throw config_error("safety: slack_penalty must have one entry per follower");
    }
    if (!(psi0 > 0.0)) {
        throw config_error("safety: psi0 must be positive");
    }
    for (double v : psi_hv) {
        if (!(v > 0.0)) {
            throw config_error("safety: follower headways must be positive");
        }
    }
    for (double v : eta) {
        if (!(v > 0.0) || !(v <= 1.0)) {
            throw config_error("safety: eta must lie in (0, 1]");
        }
    }
    for (double v : gamma) {
        if (!(v > 0.0)) {
            throw config_error("safety: gamma must be positive");
        }
    }
    for (double v : slack_penalty) {
        if (!(v > 0.0)) {
            throw config_error("safety: slack penalties must be positive");
        }
    }
}

double SafetyParams::nu(int i) const {
    const double e = eta.at(static_cast<std::size_t>(i - 1));
    const double p = psi_hv.at(static_cast<std::size_t>(i - 1));
    return 1.0 - e + p - e * psi0;
}

std::function<double(double)> SafetyParams::class_k(int row) const {
    const double g = gamma.at(static_cast<std::size_t>(row));
    return [g](double h) { return g * h; };
}

double h0(double gap0, double speed0, double psi0) { return gap0 - psi0 * speed0; }

double h0(const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds, const SafetyParams& p) {
    return h0(gaps(0), speeds(0), p.psi0);
}

double h_reduced(int i, const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds,
                 const SafetyParams& p) {
    if (i < 1 || i > p.n_followers()) {
        throw std::invalid_argument("h_reduced: follower index out of range");
    }
    const double hi = gaps(i) - p.psi_hv[static_cast<std::size_t>(i - 1)] * speeds(i);
    return hi - p.eta[static_cast<std::size_t>(i - 1)] * h0(gaps, speeds, p);
}

Eigen::VectorXd grad_h0(int n, double psi0) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    g(0) = 1.0;
    g(1) = -psi0;
    return g;
}

Eigen::VectorXd grad_h_reduced(int i, int n, const SafetyParams& p) {
    if (i < 1 || i > p.n_followers()) {
        throw std::invalid_argument("grad_h_reduced: follower index out of range");
    }
    if (n < 2 * (i + 1)) {
        throw std::invalid_argument("grad_h_reduced: state too short for follower index");
    }
    const double e = p.eta[static_cast<std::size_t>(i - 1)];
    Eigen::VectorXd g = -e * grad_h0(n, p.psi0);
    g(2 * i) += 1.0;
    g(2 * i + 1) += -p.psi_hv[static_cast<std::size_t>(i - 1)];
    return g;
}

double m_term_cav(double h0_pred, double r, const DisturbanceBounds& b, double tau_u,
                  const std::function<double(double)>& alpha) {
    const double drift = 0.5 * b.a_low * tau_u * tau_u;
    return alpha(h0_pred) - alpha(h0_pred + drift) - (r + b.a_low * tau_u);
}

double m_term_hv(double hr_pred, double r, const DisturbanceBounds& b, double tau_u, double eta_i,
                 const std::function<double(double)>& alpha) {
    const double drift = 0.5 * b.a_low * eta_i * tau_u * tau_u;
    return alpha(hr_pred) - alpha(hr_pred - drift) + eta_i * (r + b.a_up * tau_u);
}

double z_term(double h_shifted, double weight, double t,
              const std::function<double(double)>& alpha, const Eigen::VectorXd& grad,
              const ObserverTerms& obs) {
    const double envelope = weight * obs.gamma_radius() * std::exp(-obs.lambda * t);
    const double innovation_shift = grad.dot(obs.EL * obs.innovation);
    return alpha(h_shifted) - alpha(h_shifted - envelope) - innovation_shift -
           obs.lambda * envelope;
}

double z_term_cav(double h0_pred, double t, const DisturbanceBounds& b, double tau_u,
                  const SafetyParams& p, const std::function<double(double)>& alpha,
                  const Eigen::VectorXd& grad, const ObserverTerms& obs) {
    const double shifted = h0_pred + 0.5 * b.a_low * tau_u * tau_u;
    return z_term(shifted, 1.0 + p.psi0, t, alpha, grad, obs);
}

double z_term_hv(int i, double hr_pred, double t, const DisturbanceBounds& b, double tau_u,
                 const SafetyParams& p, const std::function<double(double)>& alpha,
                 const Eigen::VectorXd& grad, const ObserverTerms& obs) {
    const double eta_i = p.eta.at(static_cast<std::size_t>(i - 1));
    const double shifted = hr_pred - 0.5 * b.a_low * eta_i * tau_u * tau_u;
    return z_term(shifted, p.nu(i), t, alpha, grad, obs);
}

std::vector<SafetyConstraint> assemble_constraints(ConstraintMode mode,
                                                   const Eigen::VectorXd& x_eval, double r,
                                                   double t, const SystemMatrices& M,
                                                   const Equilibrium& eq,
                                                   const SafetyParams& params,
                                                   const DisturbanceBounds& bounds, double tau_u,
                                                   const ObserverTerms* obs) {
    params.validate();
    bounds.validate();
    if (params.n_followers() != M.N) {
        throw std::invalid_argument("assemble_constraints: parameter sizes disagree with the "
                                    "platoon size");
    }
    if (x_eval.size() != M.n()) {
        throw std::invalid_argument("assemble_constraints: state length disagrees with the model");
    }
    if (mode == ConstraintMode::DelayRobustObserver && obs == nullptr) {
        throw std::invalid_argument("assemble_constraints: observer mode needs observer terms");
    }

    const int n = M.n();
    Eigen::VectorXd gaps;
    Eigen::VectorXd speeds;
    from_perturbation(x_eval, eq, gaps, speeds);
    const Eigen::VectorXd ax = M.A * x_eval;

    std::vector<SafetyConstraint> rows;
    rows.reserve(static_cast<std::size_t>(M.N) + 1);

    // Controlled vehicle's hard row.
    {
        const Eigen::VectorXd g = grad_h0(n, params.psi0);
        const double h = h0(gaps, speeds, params);
        const auto alpha = params.class_k(0);
        SafetyConstraint row;
        row.label = "veh0";
        row.slack_channel = -1;
        row.h_value = h;
        row.coeff_u = g.dot(M.B);
        // hdot = grad . (A x + B u + D r); moving everything but the input
        // term to the right gives  coeff_u * u >= -grad.(A x) [- grad.D r]
        // - alpha(h) [+ M] [+ Z].
        double rhs = -g.dot(ax) - alpha(h);
        if (mode == ConstraintMode::DelayFree) {
            rhs -= g.dot(M.D) * r;
        } else {
            row.m_term = m_term_cav(h, r, bounds, tau_u, alpha);
            rhs += row.m_term;
            if (mode == ConstraintMode::DelayRobustObserver) {
                row.z_term = z_term_cav(h, t, bounds, tau_u, params, alpha, g, *obs);
                rhs += row.z_term;
            }
        }
        row.rhs = rhs;
        if (!(row.coeff_u < 0.0)) {
            throw numerical_error("assemble_constraints: controlled row lost its negative input "
                                  "coefficient");
        }
        rows.push_back(std::move(row));
    }

    // Follower rows, softened by one slack channel each.
    for (int i = 1; i <= M.N; ++i) {
        const Eigen::VectorXd g = grad_h_reduced(i, n, params);
        const double h = h_reduced(i, gaps, speeds, params);
        const auto alpha = params.class_k(i);
        const double eta_i = params.eta[static_cast<std::size_t>(i - 1)];
        SafetyConstraint row;
        row.label = "hv" + std::to_string(i);
        row.slack_channel = i - 1;
        row.h_value = h;
        row.coeff_u = g.dot(M.B);
        double rhs = -g.dot(ax) - alpha(h);
        if (mode == ConstraintMode::DelayFree) {
            rhs -= g.dot(M.D) * r;
        } else {
            row.m_term = m_term_hv(h, r, bounds, tau_u, eta_i, alpha);
            rhs += row.m_term;
            if (mode == ConstraintMode::DelayRobustObserver) {
                row.z_term = z_term_hv(i, h, t, bounds, tau_u, params, alpha, g, *obs);
                rhs += row.z_term;
            }
        }
        row.rhs = rhs;
        if (!(row.coeff_u > 0.0)) {
            throw numerical_error("assemble_constraints: follower row " + std::to_string(i) +
                                  " lost its positive input coefficient");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace rstc
