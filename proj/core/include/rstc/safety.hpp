#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstc/model.hpp"
#include "rstc/predictor.hpp"

// Safety constraints for the filtered input. Safety of the controlled
// vehicle is a constant-time-headway margin h_0 = gap_0 - psi_0 speed_0;
// each follower's margin h_i = gap_i - psi_i speed_i has no direct input
// influence (relative degree two from u), so the filter constrains the
// reduced margin h_i^r = h_i - eta_i h_0 instead, which restores direct
// input dependence through the h_0 component while keeping h_i >= h_i^r
// whenever h_0 >= 0. Each margin contributes one half-space constraint on
// u of the form  coeff_u * u >= rhs, derived from  hdot >= -alpha(h) plus
// robustness terms:
//
//   - Delay-free rows evaluate everything at the current state and include
//     the measured disturbance directly.
//   - Delay-robust rows evaluate at the predicted state x_p and add a
//     margin M covering the worst-case disturbance accumulated over the
//     actuation delay.
//   - Observer rows additionally add a margin Z covering the estimation
//     error envelope, evaluated at the predicted estimate.
//
// The class-K functions are linear, alpha_i(h) = gamma_i h, but the margin
// terms are written as alpha differences so a different shape can be
// substituted without touching the assembly.

namespace rstc {

struct SafetyParams {
    double psi0 = 0.5;                 // controlled vehicle's time headway (s)
    std::vector<double> psi_hv;        // follower time headways, one per follower (s)
    std::vector<double> eta;           // reduction weights, one per follower, in (0, 1]
    std::vector<double> gamma;         // class-K gains, row 0 = controlled vehicle, then followers
    std::vector<double> slack_penalty; // quadratic penalty on each follower row's slack

    int n_followers() const { return static_cast<int>(eta.size()); }
    void validate() const;  // sizes consistent and all entries positive

    // Estimation-error weight of follower i's reduced margin,
    // nu_i = 1 - eta_i + psi_i - eta_i psi_0 (i is 1-based), the certified
    // sensitivity of h_i^r to the error envelope. The controlled vehicle's
    // counterpart is 1 + psi_0.
    double nu(int i) const;

    // Linear class-K function for a constraint row (0 = controlled vehicle).
    std::function<double(double)> class_k(int row) const;
};

// Margins evaluated on absolute gaps and speeds (vectors of length N+1,
// controlled vehicle first).
double h0(double gap0, double speed0, double psi0);
double h0(const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds, const SafetyParams& p);
double h_reduced(int i, const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds,
                 const SafetyParams& p);

// Gradients with respect to the stacked state (identical for absolute and
// perturbation coordinates).
Eigen::VectorXd grad_h0(int n, double psi0);
Eigen::VectorXd grad_h_reduced(int i, int n, const SafetyParams& p);

// Worst-case disturbance margin for the controlled vehicle's row, evaluated
// at the predicted margin value:
//   M_0 = alpha(h) - alpha(h + 0.5 a_low tau_u^2) - (r + a_low tau_u),
// the last term being the gradient's disturbance channel (equal to one)
// times the worst future disturbance. Braking of the head vehicle shrinks
// the first gap, so a_low is the adversarial corner.
double m_term_cav(double h0_pred, double r, const DisturbanceBounds& b, double tau_u,
                  const std::function<double(double)>& alpha);

// Same margin for follower i's reduced row. The reduced gradient couples to
// the disturbance with weight -eta_i, so the adversarial corner flips:
//   M_i = alpha(h) - alpha(h - 0.5 a_low eta_i tau_u^2) + eta_i (r + a_up tau_u).
double m_term_hv(double hr_pred, double r, const DisturbanceBounds& b, double tau_u, double eta_i,
                 const std::function<double(double)>& alpha);

// Everything the estimation-error margins need from the observer.
struct ObserverTerms {
    Eigen::MatrixXd EL;          // e^{A tau_u} L (innovation feedthrough to x_p)
    double norm_E = 1.0;         // ||e^{A tau_u}||_2
    double upsilon = 1.0;        // error-envelope overshoot factor
    double lambda = 0.0;         // certified error decay rate (1/s)
    double eps_bar = 0.0;        // bound on the initial estimation error norm
    Eigen::VectorXd innovation;  // current measurement innovation Y - Cbar x_hat

    // Radius of the estimation-error ball mapped through the prediction:
    // Gamma = ||e^{A tau_u}|| upsilon eps_bar, decaying as e^{-lambda t}.
    double gamma_radius() const { return norm_E * upsilon * eps_bar; }
};

// Estimation-error margin shared by both row types. `h_shifted` is the
// predicted margin already shifted by its disturbance term (the same value
// the M margin's second alpha evaluation uses) and `weight` is the margin's
// sensitivity to the state-error ball (1 + psi_0 for the controlled
// vehicle's row, nu_i for follower i):
//   Z = alpha(c) - alpha(c - w Gamma e^{-lambda t})
//       - grad h . e^{A tau_u} L (Y - Cbar x_hat) - lambda w Gamma e^{-lambda t}.
// The innovation term recenters the constraint on the observer update the
// predictor has not seen yet; the lambda term pays for the envelope's own
// decay so the inflated margin stays forward-invariant.
double z_term(double h_shifted, double weight, double t,
              const std::function<double(double)>& alpha, const Eigen::VectorXd& grad,
              const ObserverTerms& obs);

double z_term_cav(double h0_pred, double t, const DisturbanceBounds& b, double tau_u,
                  const SafetyParams& p, const std::function<double(double)>& alpha,
                  const Eigen::VectorXd& grad, const ObserverTerms& obs);
double z_term_hv(int i, double hr_pred, double t, const DisturbanceBounds& b, double tau_u,
                 const SafetyParams& p, const std::function<double(double)>& alpha,
                 const Eigen::VectorXd& grad, const ObserverTerms& obs);

enum class ConstraintMode {
    DelayFree,             // current state, measured disturbance, no margins
    DelayRobust,           // predicted state plus worst-case disturbance margin M
    DelayRobustObserver,   // predicted estimate plus M and estimation margin Z
};

// One half-space constraint coeff_u * u >= rhs on the filtered input.
struct SafetyConstraint {
    double coeff_u = 0.0;
    double rhs = 0.0;
    int slack_channel = -1;  // -1 = hard row; otherwise index of its slack variable
    std::string label;       // "veh0" or "hv<i>" for diagnostics
    double h_value = 0.0;    // margin value at the evaluation state
    double m_term = 0.0;
    double z_term = 0.0;
};

// Assemble the full constraint set for one control step: one hard row for
// the controlled vehicle and one softened row per follower. `x_eval` is the
// perturbation state the rows are evaluated at (current state for
// DelayFree, predicted state or predicted estimate otherwise); `r` is the
// head vehicle's current speed deviation from the equilibrium speed (the
// disturbance channel); `obs` is required in observer mode and
// ignored otherwise. Throws numerical_error if a row's input coefficient
// comes out with the wrong sign (a structural impossibility under valid
// parameters, checked anyway because everything downstream relies on it).
std::vector<SafetyConstraint> assemble_constraints(ConstraintMode mode,
                                                   const Eigen::VectorXd& x_eval, double r,
                                                   double t, const SystemMatrices& M,
                                                   const Equilibrium& eq,
                                                   const SafetyParams& params,
                                                   const DisturbanceBounds& bounds, double tau_u,
                                                   const ObserverTerms* obs = nullptr);

}  // namespace rstc
