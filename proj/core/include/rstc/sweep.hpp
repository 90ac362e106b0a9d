#pragma once

#include <iosfwd>
#include <vector>

#include "rstc/run_config.hpp"
#include "rstc/sim.hpp"

// Safety-region mapping: for a scenario family parameterised by how long
// the disturbing vehicle holds its worst-case acceleration, find the
// longest duration each vehicle survives. Durations map one-to-one onto the
// disturbing vehicle's boundary speed (v_star - a t for braking,
// v_star + a t for accelerating), which is how the results are reported.
// Each probe simulates the full horizon without stopping at the first
// collision so that the per-vehicle classification stays honest; the
// boundary itself comes from bisection on the duration at a fixed
// resolution.

namespace rstc {

struct SafetyRegion {
    ScenarioKind scenario = ScenarioKind::HeadBrake;
    ControllerMode mode = ControllerMode::Nominal;
    double tau_u = 0.0;
    double v_star = 0.0;        // equilibrium speed the durations are measured from
    double accel = 0.0;         // magnitude held by the disturbing vehicle (m/s^2)
    double duration_cap = 0.0;  // largest probed duration (s)
    double resolution = 0.0;    // bisection tolerance on the duration (s)

    std::vector<double> vehicle_boundary;  // per vehicle 0..N: longest safe duration
    std::vector<bool> vehicle_bounded;     // false = survived the cap (region open)
    double chain_boundary = 0.0;           // longest duration with no collision anywhere
    bool chain_bounded = false;
};

// Boundary speed reached by the disturbing vehicle after holding the
// acceleration for `duration` (clamped at zero for braking).
double boundary_speed(ScenarioKind kind, double v_star, double accel, double duration);

// Map the safety region for one (scenario, mode, tau_u) cell. The base
// config supplies everything else (platoon size, safety parameters,
// bounds); its scenario block is ignored except for the onset. A negative
// duration_cap selects the natural cap: braking to a standstill for the
// head-brake scenario, accelerating to the 50 m/s comparison ceiling for
// the follower scenario.
SafetyRegion safety_region(const RunConfig& base, ScenarioKind kind, ControllerMode mode,
                           double tau_u, double duration_cap = -1.0, double resolution = 0.02);

// Evaluate the full cross product, deterministically ordered by the input
// order (mode-major). `jobs` bounds the number of concurrent cells; zero
// means the hardware concurrency.
std::vector<SafetyRegion> sweep_delays(const RunConfig& base, ScenarioKind kind,
                                       const std::vector<ControllerMode>& modes,
                                       const std::vector<double>& tau_us, int jobs = 0);

// CSV rows `scenario,mode,tau_u,vehicle,boundary_speed_mps` with one row
// per vehicle plus a `chain` row per region. A boundary equal to the cap
// speed means no collision occurred up to the cap.
void write_sweep_csv(std::ostream& out, const std::vector<SafetyRegion>& regions);

}  // namespace rstc
