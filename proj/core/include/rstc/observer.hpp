#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rstc/history.hpp"
#include "rstc/model.hpp"

// State estimation under sensor delay. Each measurement channel j reports
// C_j x(t - tau_{y,j}); propagating every channel forward by its own delay
// turns the stale outputs into a synthetic current measurement
//   Y(t) = Cbar x(t) + (quadrature error),  Cbar = sum_j C_j e^{-A tau_{y,j}},
// where the forward propagation replays the inputs and disturbances that
// acted during the delay window out of the recorded histories. A standard
// Luenberger observer driven by Y then estimates the current state, and a
// Lyapunov certificate on A - L Cbar yields the decay envelope
//   ||x - x_hat||(t) <= upsilon ||x - x_hat||(0) e^{-lambda t}
// that the safety margins are sized against.

namespace rstc {

// Cbar = sum_j C_j e^{-A tau_{y,j}} for the model's two channels.
Eigen::MatrixXd build_cbar(const SystemMatrices& M, const std::vector<double>& tau_ys);

// Forward-propagates the delayed measurements to the present. Weight grids
// are precomputed per channel at construction.
class OutputComposer {
public:
    OutputComposer(const SystemMatrices& M, double tau_u, const std::vector<double>& tau_ys,
                   double dt);

    // y holds the stacked delayed channel outputs (already summed into the
    // shared 3-row layout). `u_hist` follows the same previous-step
    // convention as the predictor: its newest sample is the input decided
    // one step ago, so a node at offset theta (relative to now) sits
    // -theta/dt - 1 steps back. `r_hist` must already contain the current
    // disturbance sample at offset zero.
    Eigen::VectorXd compose(const Eigen::VectorXd& y, const DelayedSignal& u_hist,
                            const DelayedSignal& r_hist) const;

    const Eigen::MatrixXd& cbar() const { return cbar_; }

private:
    struct Channel {
        int dy = 0;                         // delay in steps
        std::vector<Eigen::VectorXd> wu;    // C_j e^{-A (tau_y + tau_u + theta)} B on the u grid
        std::vector<Eigen::VectorXd> wr;    // C_j e^{-A (tau_y + theta)} D on the r grid
    };
    std::vector<Channel> channels_;
    Eigen::MatrixXd cbar_;
    double tau_u_ = 0.0;
    double dt_ = 0.0;
    int du_ = 0;
    int ny_ = 0;
};

// Convenience wrapper building a throwaway composer (tests, single calls).
Eigen::VectorXd compose_output(const Eigen::VectorXd& y, const DelayedSignal& u_hist,
                               const DelayedSignal& r_hist, const SystemMatrices& M, double tau_u,
                               const std::vector<double>& tau_ys);

struct ObserverState {
    Eigen::VectorXd x_hat;
    Eigen::MatrixXd L;
    Eigen::MatrixXd cbar;
    double upsilon = 1.0;   // certified envelope overshoot
    double lambda = 0.0;    // certified decay rate (1/s)
    double eps_bar = 0.0;   // initial error bound the margins assume
};

// One explicit-Euler observer update with the composed measurement:
//   x_hat += dt (A x_hat + B u(t - tau_u) + D r + L (Y - Cbar x_hat)).
// `u_delayed` is the input actually reaching the plant now.
void observer_step(ObserverState& obs, const SystemMatrices& M, double u_delayed, double r,
                   const Eigen::VectorXd& Y, double dt);

// Lyapunov certificate for a candidate gain: solve
// (A - L Cbar)^T P + P (A - L Cbar) = -I and convert the level sets of P
// into the (upsilon, lambda) envelope. Throws numerical_error when the gain
// fails to stabilise (singular equation or indefinite P): such a gain is
// rejected rather than certified.
std::pair<double, double> certify_decay(const SystemMatrices& M, const Eigen::MatrixXd& L,
                                        const Eigen::MatrixXd& cbar);

// Build a complete observer: Cbar from the channel delays, gain from the
// filter Riccati equation with weights (Q, R), envelope from the Lyapunov
// certificate, estimate initialised to zero perturbation (the equilibrium,
// the only state consistent with no information).
ObserverState make_observer(const SystemMatrices& M, const std::vector<double>& tau_ys,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double eps_bar);

}  // namespace rstc
