#include "rstc/observer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rstc/errors.hpp"
#include "rstc/numkernel.hpp"

namespace rstc {

namespace {

int delay_steps(double tau, double dt, const char* what) {
    if (tau < 0.0) {
        throw config_error(std::string(what) + " must be non-negative");
    }
    const long long k = std::llround(tau / dt);
    if (std::abs(tau - static_cast<double>(k) * dt) > 1e-9) {
        throw config_error(std::string(what) + "=" + std::to_string(tau) +
                           " is not an integer multiple of dt=" + std::to_string(dt));
    }
    return static_cast<int>(k);
}

}  // namespace

Eigen::MatrixXd build_cbar(const SystemMatrices& M, const std::vector<double>& tau_ys) {
    if (tau_ys.size() != 2) {
        throw config_error("build_cbar: expected one delay per measurement channel (2)");
    }
    for (double tau : tau_ys) {
        if (tau < 0.0) {
            throw config_error("build_cbar: channel delays must be non-negative");
        }
    }
    return M.C1 * num::expm(M.A, -tau_ys[0]) + M.C2 * num::expm(M.A, -tau_ys[1]);
}

OutputComposer::OutputComposer(const SystemMatrices& M, double tau_u,
                               const std::vector<double>& tau_ys, double dt)
    : tau_u_(tau_u), dt_(dt), ny_(M.ny()) {
    if (!(dt > 0.0)) {
        throw config_error("output composer: dt must be positive");
    }
    du_ = delay_steps(tau_u, dt, "tau_u");
    cbar_ = build_cbar(M, tau_ys);

    const Eigen::MatrixXd Cs[2] = {M.C1, M.C2};
    for (int j = 0; j < 2; ++j) {
        Channel ch;
        ch.dy = delay_steps(tau_ys[static_cast<std::size_t>(j)], dt, "tau_y");
        if (ch.dy > 0) {
            const double tau_y = tau_ys[static_cast<std::size_t>(j)];
            // Input replay over theta in [-tau_u - tau_y, -tau_u]: the
            // inputs that reached the plant inside the measurement's blind
            // window, each mapped through e^{-A (tau_y + tau_u + theta)}.
            ch.wu.reserve(static_cast<std::size_t>(ch.dy) + 1);
            for (int k = 0; k <= ch.dy; ++k) {
                const double theta = -tau_u - tau_y + static_cast<double>(k) * dt;
                ch.wu.push_back(Cs[j] * num::expm(M.A, -(tau_y + tau_u + theta)) * M.B);
            }
            // Disturbance replay over theta in [-tau_y, 0].
            ch.wr.reserve(static_cast<std::size_t>(ch.dy) + 1);
            for (int k = 0; k <= ch.dy; ++k) {
                const double theta = -tau_y + static_cast<double>(k) * dt;
                ch.wr.push_back(Cs[j] * num::expm(M.A, -(tau_y + theta)) * M.D);
            }
        }
        channels_.push_back(std::move(ch));
    }
}

Eigen::VectorXd OutputComposer::compose(const Eigen::VectorXd& y, const DelayedSignal& u_hist,
                                        const DelayedSignal& r_hist) const {
    if (y.size() != ny_) {
        throw std::invalid_argument("compose: measurement has wrong dimension");
    }
    if (std::abs(u_hist.dt() - dt_) > 1e-12 || std::abs(r_hist.dt() - dt_) > 1e-12) {
        throw std::invalid_argument("compose: history grids disagree with the composer's dt");
    }
    Eigen::VectorXd Y = y;
    for (const Channel& ch : channels_) {
        if (ch.dy == 0) {
            continue;  // an undelayed channel needs no compensation
        }
        // Trapezoid over the input-replay window. Node k sits at offset
        // theta_k = -tau_u - tau_y + k dt from now; with the newest stored
        // input being last step's decision, that is du + dy - 1 - k steps
        // back (clamped when tau_u = 0 makes the newest node refer to the
        // input still being decided).
        for (int k = 0; k <= ch.dy; ++k) {
            const double w = (k == 0 || k == ch.dy) ? 0.5 * dt_ : dt_;
            const int steps_back = std::max(0, du_ + ch.dy - 1 - k);
            Y += (w * u_hist.at_steps_back(steps_back)) * ch.wu[static_cast<std::size_t>(k)];
        }
        // Trapezoid over the disturbance-replay window; r is recorded
        // through the current step, so plain offsets apply.
        for (int k = 0; k <= ch.dy; ++k) {
            const double w = (k == 0 || k == ch.dy) ? 0.5 * dt_ : dt_;
            const double theta = -r_hist.dt() * static_cast<double>(ch.dy - k);
            Y += (w * r_hist.at_offset(theta)) * ch.wr[static_cast<std::size_t>(k)];
        }
    }
    return Y;
}

Eigen::VectorXd compose_output(const Eigen::VectorXd& y, const DelayedSignal& u_hist,
                               const DelayedSignal& r_hist, const SystemMatrices& M, double tau_u,
                               const std::vector<double>& tau_ys) {
    return OutputComposer(M, tau_u, tau_ys, u_hist.dt()).compose(y, u_hist, r_hist);
}

void observer_step(ObserverState& obs, const SystemMatrices& M, double u_delayed, double r,
                   const Eigen::VectorXd& Y, double dt) {
    if (obs.x_hat.size() != M.n()) {
        throw std::invalid_argument("observer_step: estimate has wrong dimension");
    }
    const Eigen::VectorXd innovation = Y - obs.cbar * obs.x_hat;
    obs.x_hat += dt * (M.A * obs.x_hat + M.B * u_delayed + M.D * r + obs.L * innovation);
}

std::pair<double, double> certify_decay(const SystemMatrices& M, const Eigen::MatrixXd& L,
                                        const Eigen::MatrixXd& cbar) {
    const Eigen::MatrixXd F = M.A - L * cbar;
    Eigen::MatrixXd P;
    try {
        P = num::solve_lyapunov(F, Eigen::MatrixXd::Identity(F.rows(), F.cols()));
    } catch (const numerical_error&) {
        throw numerical_error("certify_decay: gain rejected, error dynamics are not Hurwitz");
    }
    const Eigen::VectorXd lam = num::sym_eigen(P);
    const double lam_min = lam(0);
    const double lam_max = lam(lam.size() - 1);
    if (!(lam_min > 0.0)) {
        throw numerical_error("certify_decay: gain rejected, Lyapunov solution not positive "
                              "definite");
    }
    // Along the error flow, d/dt (e^T P e) = -||e||^2 <= -(1/lam_max) e^T P e,
    // so e^T P e decays at rate 1/lam_max and the norm envelope needs half
    // that rate plus the eccentricity sqrt(lam_max/lam_min) of P's levels.
    const double decay = 1.0 / (2.0 * lam_max);
    const double overshoot = std::sqrt(lam_max / lam_min);
    return {overshoot, decay};
}

ObserverState make_observer(const SystemMatrices& M, const std::vector<double>& tau_ys,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double eps_bar) {
    if (eps_bar < 0.0) {
        throw config_error("make_observer: eps_bar must be non-negative");
    }
    ObserverState obs;
    obs.cbar = build_cbar(M, tau_ys);
    obs.L = num::solve_riccati_dual(M.A, obs.cbar, Q, R);
    const auto cert = certify_decay(M, obs.L, obs.cbar);
    obs.upsilon = cert.first;
    obs.lambda = cert.second;
    obs.eps_bar = eps_bar;
    obs.x_hat = Eigen::VectorXd::Zero(M.n());
    return obs;
}

}  // namespace rstc
