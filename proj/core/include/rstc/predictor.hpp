#pragma once

#include <utility>

#include <Eigen/Dense>

#include "rstc/history.hpp"
#include "rstc/model.hpp"

// Forward state prediction across the actuation delay. The input decided now
// only reaches the plant tau_u seconds later, so the safety filter must
// constrain the state the plant will have reached by then:
//   x_p = e^{A tau_u} x + integral_{-tau_u}^{0} e^{-A theta} B u(t + theta) dtheta
//         + D tau_u r(t).
// The input integral replays the inputs already in flight; the disturbance
// term uses the structural identity e^{A s} D = D (the head vehicle's speed
// deviation feeds only the first gap), so holding the current disturbance
// constant over the horizon contributes exactly D tau_u r.

namespace rstc {

// Head-vehicle acceleration bounds [a_low, a_up] used wherever the future
// disturbance must be replaced by its worst case.
struct DisturbanceBounds {
    double a_low = -5.0;  // hardest braking (m/s^2), must be negative
    double a_up = 5.0;    // hardest acceleration (m/s^2), must be positive

    void validate() const;  // throws config_error unless a_low < 0 < a_up
};

struct Prediction {
    Eigen::VectorXd x_p;   // predicted perturbation state at t + horizon
    double t = 0.0;        // time the prediction was made
    double horizon = 0.0;  // tau_u
};

class Predictor {
public:
    // Precomputes e^{A tau_u} and the quadrature columns e^{-A theta_k} B on
    // the dt grid once; per-step prediction is then a handful of axpys.
    // tau_u must be a non-negative integer multiple of dt.
    Predictor(const SystemMatrices& M, double tau_u, double dt);

    // Predict from the measured (true) state. `u_hist` is the input history
    // as of the previous step: its newest sample is the input decided one
    // step ago, since the current input is what the caller is about to
    // compute. The trapezoid node at theta = 0 therefore reuses the newest
    // sample (a zero-order-hold extension); every other node reads the
    // exact-time sample. `r` is the head vehicle's current speed deviation
    // from equilibrium (the disturbance channel of the linear model).
    Prediction predict_full(const Eigen::VectorXd& x, const DelayedSignal& u_hist, double r,
                            double t) const;

    // Predict from an observer estimate. The arithmetic is identical to
    // predict_full by design: the difference between the two predictions is
    // exactly e^{A tau_u} (x - x_hat), which is what the robustness margins
    // are sized against.
    Prediction predict_observed(const Eigen::VectorXd& x_hat, const DelayedSignal& u_hist,
                                double r, double t) const;

    const Eigen::MatrixXd& transition() const { return E_; }  // e^{A tau_u}
    double tau_u() const { return tau_u_; }
    double dt() const { return dt_; }

private:
    Eigen::MatrixXd E_;
    Eigen::VectorXd D_;
    std::vector<Eigen::VectorXd> wu_;  // e^{-A theta_j} B at theta_j = -tau_u + j dt
    double tau_u_ = 0.0;
    double dt_ = 0.0;
    int n_ = 0;
};

// Envelope of the prediction error on the first gap caused by the unknown
// future disturbance: holding r constant is exact for every channel except
// the head gap, which can drift by up to one integrated acceleration
// deviation, [0.5 a_low tau_u^2, 0.5 a_up tau_u^2].
std::pair<double, double> prediction_error_bounds(const DisturbanceBounds& b, double tau_u);

}  // namespace rstc
