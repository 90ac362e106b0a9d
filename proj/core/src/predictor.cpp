#include "rstc/predictor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rstc/errors.hpp"
#include "rstc/numkernel.hpp"

namespace rstc {

void DisturbanceBounds::validate() const {
    if (!(a_low < 0.0) || !(a_up > 0.0)) {
        throw config_error("disturbance bounds must straddle zero: a_low < 0 < a_up, got [" +
                           std::to_string(a_low) + ", " + std::to_string(a_up) + "]");
    }
}

Predictor::Predictor(const SystemMatrices& M, double tau_u, double dt) : D_(M.D), dt_(dt) {
    if (!(dt > 0.0)) {
        throw config_error("predictor: dt must be positive");
    }
    if (tau_u < 0.0) {
        throw config_error("predictor: tau_u must be non-negative");
    }
    const long long k = std::llround(tau_u / dt);
    if (std::abs(tau_u - static_cast<double>(k) * dt) > 1e-9) {
        throw config_error("predictor: tau_u=" + std::to_string(tau_u) +
                           " is not an integer multiple of dt=" + std::to_string(dt));
    }
    tau_u_ = tau_u;
    n_ = M.n();
    E_ = num::expm(M.A, tau_u);
    // Quadrature columns e^{-A theta_j} B for theta_j = -tau_u + j dt,
    // j = 0..du. Computed once; each is one small expm at construction.
    wu_.reserve(static_cast<std::size_t>(k) + 1);
    for (long long j = 0; j <= k; ++j) {
        const double theta = -tau_u + static_cast<double>(j) * dt;
        wu_.push_back(num::expm(M.A, -theta) * M.B);
    }
}

Prediction Predictor::predict_full(const Eigen::VectorXd& x, const DelayedSignal& u_hist,
                                   double r, double t) const {
    if (x.size() != n_) {
        throw std::invalid_argument("predictor: state has length " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(n_));
    }
    Prediction out;
    out.t = t;
    out.horizon = tau_u_;
    out.x_p = E_ * x;

    const int du = static_cast<int>(wu_.size()) - 1;
    if (du > 0) {
        if (std::abs(u_hist.dt() - dt_) > 1e-12) {
            throw std::invalid_argument("predictor: input history uses a different dt");
        }
        if (u_hist.points() < du) {
            throw std::invalid_argument("predictor: input history spans " +
                                        std::to_string(u_hist.span()) + " s, need at least " +
                                        std::to_string(tau_u_ - dt_) + " s");
        }
        // Composite trapezoid over [-tau_u, 0]. Node theta_j refers to the
        // input applied at absolute time t + theta_j; with the newest stored
        // sample being last step's decision, that is max(0, du - 1 - j)
        // steps back. The j = du node refers to the input being decided
        // right now, which does not exist yet, so it clamps to the newest
        // sample (zero-order hold across one step).
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_);
        for (int j = 0; j <= du; ++j) {
            const double w = (j == 0 || j == du) ? 0.5 * dt_ : dt_;
            const int steps_back = std::max(0, du - 1 - j);
            acc += (w * u_hist.at_steps_back(steps_back)) * wu_[static_cast<std::size_t>(j)];
        }
        out.x_p += acc;
    }

    // e^{A s} D = D for all s, so the constant-r disturbance integral is
    // exactly D tau_u r with no quadrature error.
    out.x_p += D_ * (tau_u_ * r);
    return out;
}

Prediction Predictor::predict_observed(const Eigen::VectorXd& x_hat, const DelayedSignal& u_hist,
                                       double r, double t) const {
    return predict_full(x_hat, u_hist, r, t);
}

std::pair<double, double> prediction_error_bounds(const DisturbanceBounds& b, double tau_u) {
    b.validate();
    if (tau_u < 0.0) {
        throw config_error("prediction_error_bounds: tau_u must be non-negative");
    }
    return {0.5 * b.a_low * tau_u * tau_u, 0.5 * b.a_up * tau_u * tau_u};
}

}  // namespace rstc
