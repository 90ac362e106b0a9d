#include "rstc/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rstc/errors.hpp"

namespace rstc {

void OvmParams::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw config_error("ovm: alpha and beta must be positive");
    }
    if (!(s_st >= 0.0) || !(s_go > s_st)) {
        throw config_error("ovm: need 0 <= s_st < s_go, got s_st=" + std::to_string(s_st) +
                           ", s_go=" + std::to_string(s_go));
    }
    if (!(v_max > 0.0)) {
        throw config_error("ovm: v_max must be positive");
    }
}

double ovm_desired_speed(double gap, const OvmParams& p) {
    if (gap <= p.s_st) {
        return 0.0;
    }
    if (gap >= p.s_go) {
        return p.v_max;
    }
    const double phase = std::numbers::pi * (gap - p.s_st) / (p.s_go - p.s_st);
    return 0.5 * p.v_max * (1.0 - std::cos(phase));
}

double ovm_desired_speed_slope(double gap, const OvmParams& p) {
    if (gap <= p.s_st || gap >= p.s_go) {
        return 0.0;
    }
    const double width = p.s_go - p.s_st;
    const double phase = std::numbers::pi * (gap - p.s_st) / width;
    return 0.5 * p.v_max * std::numbers::pi / width * std::sin(phase);
}

double ovm_accel(double gap, double gap_rate, double speed, const OvmParams& p) {
    return p.alpha * (ovm_desired_speed(gap, p) - speed) + p.beta * gap_rate;
}

Equilibrium solve_equilibrium_gap(double v_star, const OvmParams& p) {
    p.validate();
    if (!(v_star > 0.0) || !(v_star < p.v_max)) {
        throw config_error("equilibrium speed must lie strictly inside (0, v_max); got v_star=" +
                           std::to_string(v_star) + " with v_max=" + std::to_string(p.v_max));
    }
    // V is continuous and strictly increasing on [s_st, s_go] with
    // V(s_st) = 0 and V(s_go) = v_max, so bisection cannot fail.
    double lo = p.s_st;
    double hi = p.s_go;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (ovm_desired_speed(mid, p) < v_star) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double s_star = 0.5 * (lo + hi);
    if (std::abs(ovm_desired_speed(s_star, p) - v_star) > 1e-9) {
        throw numerical_error("equilibrium gap bisection failed to converge");
    }
    return Equilibrium{v_star, s_star};
}

LinearHvCoeffs linearize_hv(const Equilibrium& eq, const OvmParams& p) {
    if (!(eq.s_star > p.s_st) || !(eq.s_star < p.s_go)) {
        throw config_error(
            "linearisation point must lie strictly inside the desired-speed ramp (s_st, s_go)");
    }
    LinearHvCoeffs c;
    c.a1 = p.alpha * ovm_desired_speed_slope(eq.s_star, p);
    c.a2 = p.alpha + p.beta;
    c.a3 = p.beta;
    return c;
}

SystemMatrices build_matrices(int N, const std::vector<LinearHvCoeffs>& coeffs) {
    if (N < 0) {
        throw config_error("build_matrices: N must be non-negative");
    }
    if (static_cast<int>(coeffs.size()) != N) {
        throw config_error("build_matrices: expected " + std::to_string(N) +
                           " coefficient sets, got " + std::to_string(coeffs.size()));
    }
    const int n = 2 * (N + 1);
    SystemMatrices M;
    M.N = N;
    M.A = Eigen::MatrixXd::Zero(n, n);
    M.B = Eigen::VectorXd::Zero(n);
    M.D = Eigen::VectorXd::Zero(n);

    // Controlled vehicle: its gap closes at the head vehicle's speed minus
    // its own, and the head speed perturbation is exactly the integral of
    // the disturbance, so the gap row only sees -speed_0 plus the
    // disturbance channel; its speed row is the pure input integrator.
    M.A(0, 1) = -1.0;
    M.B(1) = 1.0;
    M.D(0) = 1.0;

    for (int i = 1; i <= N; ++i) {
        const LinearHvCoeffs& c = coeffs[static_cast<std::size_t>(i - 1)];
        const int gap_row = 2 * i;
        const int spd_row = 2 * i + 1;
        M.A(gap_row, spd_row - 2) = 1.0;   // leader speed opens the gap
        M.A(gap_row, spd_row) = -1.0;      // own speed closes it
        M.A(spd_row, spd_row - 2) = c.a3;  // linearised OVM
        M.A(spd_row, gap_row) = c.a1;
        M.A(spd_row, spd_row) = -c.a2;
    }

    // Measurement channels, padded to a shared 3-row output: channel 1
    // carries the controlled vehicle's gap and speed, channel 2 the last
    // follower's speed.
    M.C1 = Eigen::MatrixXd::Zero(3, n);
    M.C2 = Eigen::MatrixXd::Zero(3, n);
    M.C1(0, 0) = 1.0;
    M.C1(1, 1) = 1.0;
    M.C2(2, n - 1) = 1.0;
    return M;
}

SystemMatrices build_matrices(int N, const LinearHvCoeffs& coeffs) {
    return build_matrices(N, std::vector<LinearHvCoeffs>(static_cast<std::size_t>(N), coeffs));
}

Eigen::VectorXd to_perturbation(const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds,
                                const Equilibrium& eq) {
    if (gaps.size() != speeds.size() || gaps.size() < 1) {
        throw config_error("to_perturbation: gaps and speeds must have equal, positive length");
    }
    Eigen::VectorXd x(2 * gaps.size());
    for (Eigen::Index i = 0; i < gaps.size(); ++i) {
        x(2 * i) = gaps(i) - eq.s_star;
        x(2 * i + 1) = speeds(i) - eq.v_star;
    }
    return x;
}

void from_perturbation(const Eigen::VectorXd& x, const Equilibrium& eq, Eigen::VectorXd& gaps,
                       Eigen::VectorXd& speeds) {
    if (x.size() % 2 != 0 || x.size() < 2) {
        throw config_error("from_perturbation: state length must be even and positive");
    }
    const Eigen::Index m = x.size() / 2;
    gaps.resize(m);
    speeds.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        gaps(i) = x(2 * i) + eq.s_star;
        speeds(i) = x(2 * i + 1) + eq.v_star;
    }
}

}  // namespace rstc
