#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rstc/model.hpp"
#include "rstc/predictor.hpp"
#include "rstc/safety.hpp"

// Run description: everything a simulation, sweep, or diagnosis needs, with
// defaults matching the reference platoon (four followers behind the
// controlled vehicle at 20 m/s, 0.4 s actuation delay, 0.8 s sensor delay).
// Configs are plain `[section] key = value` text; unknown sections or keys
// are errors so typos cannot silently fall back to defaults.

namespace rstc {

enum class ScenarioKind {
    HeadBrake,       // head vehicle brakes hard, then recovers symmetrically
    FollowerAccel,   // last follower accelerates for a fixed window
};

enum class ControllerMode {
    Nominal,         // feedback gain only, no safety filter
    StcDelayFree,    // filter rows evaluated at the current state, delays ignored
    RstcFullState,   // delay-robust rows on the predicted true state
    RstcObserver,    // delay-robust rows on the predicted estimate plus error margins
};

std::string to_string(ScenarioKind kind);
std::string to_string(ControllerMode mode);
ScenarioKind scenario_from_string(const std::string& text);   // throws config_error
ControllerMode mode_from_string(const std::string& text);     // throws config_error

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::HeadBrake;
    double magnitude = 5.0;  // disturbance acceleration magnitude (m/s^2)
    double duration = 3.5;   // braking or accelerating leg (s)
    double onset = 5.0;      // quiescent lead-in before the disturbance (s)
    double horizon = 40.0;   // total simulated time (s)
};

struct RunConfig {
    // [platoon]
    int n_followers = 4;
    OvmParams ovm{};
    double v_star = 20.0;
    bool hv_accel_clamp = true;     // clamp follower accelerations to physical limits
    double hv_accel_min = -6.0;
    double hv_accel_max = 6.0;

    // [delays]
    double dt = 0.01;
    double tau_u = 0.4;
    double tau_y = 0.8;

    // [safety] - scalar entries broadcast to every follower; lists give one
    // value per follower (gamma takes N+1: controlled vehicle's row first).
    double psi0 = 0.5;
    std::vector<double> psi_hv{1.0};
    std::vector<double> eta{0.25};
    std::vector<double> gamma{3.0};
    std::vector<double> slack_penalty{1e4};
    DisturbanceBounds bounds{};
    bool eps_bar_auto = true;   // size the error bound from the measured initial error
    double eps_bar = 0.0;       // used when eps_bar_auto is false
    bool eps_bar_set = false;   // whether the config file set eps_bar at all

    // [controller]
    ControllerMode mode = ControllerMode::RstcFullState;
    std::vector<double> gain_override;  // empty = built-in pattern
    double u_min = -std::numeric_limits<double>::infinity();  // optional post-filter clamp
    double u_max = std::numeric_limits<double>::infinity();

    // [scenario]
    ScenarioSpec scenario{};

    // [observer] - only allowed when mode = rstc-observer.
    bool observer_section_present = false;
    double observer_q = 1.0;  // process-noise weight (scales the identity)
    double observer_r = 1.0;  // measurement-noise weight (scales the identity)

    // [output]
    std::string out_dir = ".";

    bool loaded_from_file = false;

    // Broadcast the safety entries to their full per-row sizes.
    SafetyParams safety_params() const;

    // Nominal feedback gain: the override when given, otherwise the built-in
    // pattern [a1, -a2] for the controlled vehicle followed by [-2.0, 0.2]
    // per follower (gap and speed feedback on each block).
    Eigen::VectorXd nominal_gain(const LinearHvCoeffs& coeffs) const;

    // Cross-field validation with actionable messages; throws config_error.
    void validate() const;
};

// Parse config text (for tests); the caller decides when to validate.
RunConfig parse_config_text(const std::string& text);

// Read, parse, and validate a config file. Throws config_error for missing
// files, unknown keys, malformed values, and failed validation.
RunConfig load_config(const std::string& path);

}  // namespace rstc
