#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstc/run_config.hpp"

// Closed-loop simulation. Per control step, in order: sample the head
// vehicle and record the disturbance, read the current state and check for
// collision, run the configured controller (nominal gain plus the mode's
// safety filter), store the decided input, advance the observer when one is
// running, and finally integrate the plant one explicit-Euler step. The
// plant is the nonlinear car-following model with an acceleration clamp;
// only the controller's internal machinery uses the linearisation.

namespace rstc {

// Head-vehicle speed for the configured scenario: constant at the
// equilibrium speed except for the HeadBrake wedge, a symmetric
// brake-and-recover ramp starting at the onset, clamped to [0, v_star].
double head_profile(const ScenarioSpec& scenario, double t, double v_star);

// One explicit-Euler plant step on absolute gaps and speeds:
//   gap_i += dt (lead_i - speed_i), speed_i += dt accel_i,
// where lead_0 is the head vehicle's speed and lead_i the speed of vehicle
// i-1 otherwise. Speeds on the right-hand side are the pre-step values.
void step_plant(Eigen::VectorXd& gaps, Eigen::VectorXd& speeds, const Eigen::VectorXd& accels,
                double head_speed, double dt);

// Per-row diagnostic copy of one filter constraint at one step.
struct ConstraintDiag {
    std::string label;
    double coeff_u = 0.0;
    double rhs = 0.0;
    double h_value = 0.0;
    double m_term = 0.0;
    double z_term = 0.0;
    bool active = false;  // binding at the filter optimum
};

struct StepRecord {
    double t = 0.0;
    double head_speed = 0.0;
    double head_accel = 0.0;
    Eigen::VectorXd gaps;    // absolute, controlled vehicle first
    Eigen::VectorXd speeds;
    Eigen::VectorXd accels;  // accelerations applied over this step
    double u_nominal = 0.0;
    double u_filtered = 0.0;
    Eigen::VectorXd h;       // raw margins h_i = gap_i - psi_i speed_i
    double eps_norm = -1.0;  // estimation error norm; negative = not applicable
    std::vector<ConstraintDiag> constraints;
};

struct TrajectoryLog {
    int n_followers = 0;
    double dt = 0.0;
    ControllerMode mode = ControllerMode::Nominal;
    std::vector<StepRecord> rows;

    // Column layout: t, the head vehicle's empty gap placeholder, gaps,
    // head speed, speeds, head acceleration, applied accelerations, nominal
    // and filtered inputs, margins, estimation error norm (empty when no
    // observer ran).
    void write_csv(std::ostream& out) const;

    // One line per constraint per step: t, label, coeff_u, rhs, h_value,
    // M, Z, active.
    void write_constraint_dump(std::ostream& out) const;
};

struct CollisionReport {
    bool collided = false;
    double t = 0.0;
    int vehicle = -1;  // 0 = controlled vehicle, 1..N followers
};

// Earliest logged step with any gap at or below zero; the vehicle is the
// one with the smallest gap at that step.
CollisionReport detect_collision(const TrajectoryLog& log);

struct RunOptions {
    bool stop_at_collision = true;  // scenario runs stop; sweeps run the full horizon
    bool keep_log = true;           // false: aggregates only (bisection probes)
    bool record_constraints = true; // false: skip per-row diagnostics
};

struct RunResult {
    TrajectoryLog log;
    CollisionReport collision;
    double min_h = 0.0;            // over all vehicles and logged steps
    double min_gap = 0.0;          // over all vehicles and visited states
    Eigen::VectorXd min_gaps;      // per vehicle, over all visited states
    double u_min = 0.0;
    double u_max = 0.0;
    double observer_upsilon = 0.0; // certificates when an observer ran
    double observer_lambda = 0.0;
    double eps_bar_used = 0.0;
    double runtime_seconds = 0.0;
};

// Simulate the configured scenario with the configured controller.
RunResult run(const RunConfig& cfg, const RunOptions& opt = {});

// Same loop with a caller-supplied head-speed profile (absolute m/s) and no
// follower override; used for randomized-disturbance testing.
RunResult run_with_head_speed(const RunConfig& cfg,
                              const std::function<double(double)>& head_speed,
                              const RunOptions& opt = {});

}  // namespace rstc
