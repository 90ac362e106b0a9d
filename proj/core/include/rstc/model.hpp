#pragma once

#include <vector>

#include <Eigen/Dense>

// Mixed-traffic platoon model: one controlled vehicle (index 0) followed by
// N human-driven vehicles (indices 1..N), all behind an uncontrolled head
// vehicle. Human drivers follow the optimal velocity model (OVM); the
// controlled vehicle is a double integrator driven by the filtered input.
// The linear state-space model used by the controller stacks perturbations
// from the uniform-flow equilibrium as x = [gap_0, speed_0, ..., gap_N,
// speed_N] minus their equilibrium values, with the head vehicle's speed
// deviation entering as the disturbance channel.

namespace rstc {

struct OvmParams {
    double alpha = 0.6;   // gap-error gain (1/s)
    double beta = 0.9;    // relative-speed gain (1/s)
    double s_st = 5.0;    // standstill gap: desired speed is zero below this (m)
    double s_go = 40.0;   // free-flow gap: desired speed saturates above this (m)
    double v_max = 35.0;  // free-flow speed (m/s)

    void validate() const;  // throws config_error on non-physical values
};

// Desired-speed curve V(s): zero up to s_st, then a raised-cosine ramp to
// v_max at s_go, constant beyond.
double ovm_desired_speed(double gap, const OvmParams& p);

// dV/ds, zero outside the ramp interval.
double ovm_desired_speed_slope(double gap, const OvmParams& p);

// Car-following acceleration alpha (V(s) - v) + beta sdot, where sdot is
// the gap rate (leader speed minus own speed).
double ovm_accel(double gap, double gap_rate, double speed, const OvmParams& p);

struct Equilibrium {
    double v_star = 0.0;  // uniform-flow speed (m/s)
    double s_star = 0.0;  // gap at which V(s_star) = v_star (m)
};

// Invert V(s) = v_star by bisection on the monotone ramp. Requires
// 0 < v_star < v_max; throws config_error otherwise.
Equilibrium solve_equilibrium_gap(double v_star, const OvmParams& p);

// Coefficients of the OVM linearised about the equilibrium:
//   d(speed_i)/dt = a1 gap_i - a2 speed_i + a3 speed_{i-1}   (perturbations)
// with a1 = alpha V'(s_star), a2 = alpha + beta, a3 = beta.
struct LinearHvCoeffs {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
};

// Requires the equilibrium gap to lie strictly inside (s_st, s_go) so the
// slope is positive; throws config_error otherwise.
LinearHvCoeffs linearize_hv(const Equilibrium& eq, const OvmParams& p);

// Continuous-time perturbation model
//   xdot = A x + B u + D r
// with state dimension n = 2(N+1), input u the controlled vehicle's
// acceleration, and disturbance r the head vehicle's speed deviation from
// the equilibrium speed (so r feeds the lead gap's rate directly). C1
// selects the measurements available on the first channel (the controlled
// vehicle's own gap and speed); C2 selects the one on the second channel
// (the last follower's speed). Both are padded to a common 3-row output so
// delayed channels can be summed.
struct SystemMatrices {
    int N = 0;  // number of human-driven followers
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::VectorXd D;
    Eigen::MatrixXd C1;
    Eigen::MatrixXd C2;

    int n() const { return static_cast<int>(A.rows()); }
    int ny() const { return static_cast<int>(C1.rows()); }
};

// Assemble the matrices for N followers sharing the given linearised
// coefficients. `coeffs` must have one entry per follower (allowing
// heterogeneous drivers at the model level even though the shipped
// configuration is homogeneous).
SystemMatrices build_matrices(int N, const std::vector<LinearHvCoeffs>& coeffs);

// Convenience overload: all followers share one coefficient set.
SystemMatrices build_matrices(int N, const LinearHvCoeffs& coeffs);

// Stack absolute gaps/speeds (size N+1 each, controlled vehicle first) into
// the perturbation state and back.
Eigen::VectorXd to_perturbation(const Eigen::VectorXd& gaps, const Eigen::VectorXd& speeds,
                                const Equilibrium& eq);
void from_perturbation(const Eigen::VectorXd& x, const Equilibrium& eq, Eigen::VectorXd& gaps,
                       Eigen::VectorXd& speeds);

}  // namespace rstc
