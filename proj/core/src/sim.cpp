#include "rstc/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "rstc/errors.hpp"
#include "rstc/numkernel.hpp"
#include "rstc/observer.hpp"
#include "rstc/predictor.hpp"
#include "rstc/qpsolve.hpp"
#include "rstc/safety.hpp"

namespace rstc {

double head_profile(const ScenarioSpec& scenario, double t, double v_star) {
    if (scenario.kind != ScenarioKind::HeadBrake) {
        return v_star;  // the head vehicle is undisturbed in follower scenarios
    }
    if (t < scenario.onset) {
        return v_star;
    }
    const double te = t - scenario.onset;
    double v = v_star;
    if (te <= scenario.duration) {
        v = v_star - scenario.magnitude * te;
    } else if (te <= 2.0 * scenario.duration) {
        v = v_star - scenario.magnitude * scenario.duration +
            scenario.magnitude * (te - scenario.duration);
    }
    // A vehicle cannot reverse, and the recovery leg ends exactly at the
    // initial speed, so the wedge stays inside [0, v_star].
    return std::max(0.0, std::min(v, v_star));
}

void step_plant(Eigen::VectorXd& gaps, Eigen::VectorXd& speeds, const Eigen::VectorXd& accels,
                double head_speed, double dt) {
    const Eigen::Index n = gaps.size();
    if (speeds.size() != n || accels.size() != n || n < 1) {
        throw std::invalid_argument("step_plant: gaps, speeds, and accels must share a positive "
                                    "length");
    }
    Eigen::VectorXd lead(n);
    lead(0) = head_speed;
    lead.tail(n - 1) = speeds.head(n - 1);
    gaps += dt * (lead - speeds);
    speeds += dt * accels;
}

namespace {

void append_number(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    out += buf;
}

struct HeadSpec {
    std::function<double(double)> speed;  // absolute head speed (m/s)
    bool follower_override = false;       // apply the FollowerAccel window
};

RunResult run_impl(const RunConfig& cfg, const HeadSpec& head, const RunOptions& opt) {
    const auto wall_start = std::chrono::steady_clock::now();
    cfg.validate();

    const int N = cfg.n_followers;
    const Equilibrium eq = solve_equilibrium_gap(cfg.v_star, cfg.ovm);
    const LinearHvCoeffs coeffs = linearize_hv(eq, cfg.ovm);
    const SystemMatrices M = build_matrices(N, coeffs);
    const SafetyParams params = cfg.safety_params();
    const Eigen::VectorXd K = cfg.nominal_gain(coeffs);
    const int n = M.n();
    const double dt = cfg.dt;

    const bool observer_mode = cfg.mode == ControllerMode::RstcObserver;
    const bool filtered = cfg.mode != ControllerMode::Nominal;

    // Every mode except the delay-free filter feeds back on the predicted
    // state, so the predictor is built unconditionally (it is also the
    // cheapest way to get e^{A tau_u} for the observer margins).
    const Predictor pred(M, cfg.tau_u, dt);

    DelayedSignal u_hist(dt, observer_mode ? cfg.tau_u + cfg.tau_y : cfg.tau_u);
    DelayedSignal r_hist(dt, observer_mode ? cfg.tau_y : 0.0);
    DelayedSignal vN_hist(dt, observer_mode ? cfg.tau_y : 0.0);

    std::optional<OutputComposer> composer;
    ObserverState obs;
    ObserverTerms oterms;
    if (observer_mode) {
        const std::vector<double> tau_ys{0.0, cfg.tau_y};
        const Eigen::MatrixXd Qw = cfg.observer_q * Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd Rw = cfg.observer_r * Eigen::MatrixXd::Identity(M.ny(), M.ny());
        obs = make_observer(M, tau_ys, Qw, Rw, cfg.eps_bar_auto ? 0.0 : cfg.eps_bar);
        composer.emplace(M, cfg.tau_u, tau_ys, dt);
        oterms.EL = pred.transition() * obs.L;
        oterms.norm_E = num::spectral_norm(pred.transition());
        oterms.upsilon = obs.upsilon;
        oterms.lambda = obs.lambda;
        oterms.eps_bar = obs.eps_bar;
        oterms.innovation = Eigen::VectorXd::Zero(M.ny());
    }

    const int steps = static_cast<int>(std::llround(cfg.scenario.horizon / dt));
    Eigen::VectorXd gaps = Eigen::VectorXd::Constant(N + 1, eq.s_star);
    Eigen::VectorXd speeds = Eigen::VectorXd::Constant(N + 1, eq.v_star);

    RunResult res;
    res.log.n_followers = N;
    res.log.dt = dt;
    res.log.mode = cfg.mode;
    if (opt.keep_log) {
        res.log.rows.reserve(static_cast<std::size_t>(steps));
    }
    res.min_h = std::numeric_limits<double>::infinity();
    res.min_gap = std::numeric_limits<double>::infinity();
    res.min_gaps = Eigen::VectorXd::Constant(N + 1, std::numeric_limits<double>::infinity());
    res.u_min = std::numeric_limits<double>::infinity();
    res.u_max = -std::numeric_limits<double>::infinity();
    res.observer_upsilon = obs.upsilon;
    res.observer_lambda = obs.lambda;

    for (int m = 0; m < steps; ++m) {
        const double t = static_cast<double>(m) * dt;
        const double vh = head.speed(t);
        const double vh_next = head.speed(t + dt);
        // The disturbance channel carries the head vehicle's speed
        // deviation; its rate is what the bounds [a_low, a_up] limit.
        const double r = vh - eq.v_star;
        r_hist.push(r);

        const Eigen::VectorXd x = to_perturbation(gaps, speeds, eq);
        if (observer_mode) {
            vN_hist.push(x(n - 1));
        }

        Eigen::VectorXd h(N + 1);
        h(0) = h0(gaps, speeds, params);
        for (int i = 1; i <= N; ++i) {
            h(i) = gaps(i) - params.psi_hv[static_cast<std::size_t>(i - 1)] * speeds(i);
        }
        res.min_h = std::min(res.min_h, h.minCoeff());

        bool collided_now = false;
        if (!res.collision.collided && gaps.minCoeff() <= 0.0) {
            Eigen::Index worst = 0;
            gaps.minCoeff(&worst);
            res.collision.collided = true;
            res.collision.t = t;
            res.collision.vehicle = static_cast<int>(worst);
            collided_now = true;
        }

        // Controller. The nominal input mimics the linearised car-following
        // response (plus disturbance feedthrough); the filter projects it
        // onto the mode's constraint rows.
        double u_nom = 0.0;
        double u = 0.0;
        double eps_norm = -1.0;
        Eigen::VectorXd Y;
        std::vector<SafetyConstraint> rows;
        FilterSolution sol;
        switch (cfg.mode) {
            case ControllerMode::Nominal: {
                const Eigen::VectorXd x_p = pred.predict_full(x, u_hist, r, t).x_p;
                u_nom = K.dot(x_p) + coeffs.a3 * r;
                u = u_nom;
                break;
            }
            case ControllerMode::StcDelayFree: {
                u_nom = K.dot(x) + coeffs.a3 * r;
                rows = assemble_constraints(ConstraintMode::DelayFree, x, r, t, M, eq, params,
                                            cfg.bounds, cfg.tau_u);
                break;
            }
            case ControllerMode::RstcFullState: {
                const Eigen::VectorXd x_p = pred.predict_full(x, u_hist, r, t).x_p;
                u_nom = K.dot(x_p) + coeffs.a3 * r;
                rows = assemble_constraints(ConstraintMode::DelayRobust, x_p, r, t, M, eq,
                                            params, cfg.bounds, cfg.tau_u);
                break;
            }
            case ControllerMode::RstcObserver: {
                eps_norm = (x - obs.x_hat).norm();
                if (m == 0 && cfg.eps_bar_auto) {
                    // Size the error bound from the one error we can
                    // measure, with headroom; from an equilibrium start
                    // this is zero and the envelope term vanishes.
                    obs.eps_bar = 1.1 * eps_norm;
                    oterms.eps_bar = obs.eps_bar;
                }
                Eigen::VectorXd y = M.C1 * x;
                y(2) += vN_hist.at_offset(-cfg.tau_y);
                Y = composer->compose(y, u_hist, r_hist);
                oterms.innovation = Y - obs.cbar * obs.x_hat;
                const Eigen::VectorXd x_p = pred.predict_observed(obs.x_hat, u_hist, r, t).x_p;
                u_nom = K.dot(x_p) + coeffs.a3 * r;
                rows = assemble_constraints(ConstraintMode::DelayRobustObserver, x_p, r, t, M,
                                            eq, params, cfg.bounds, cfg.tau_u, &oterms);
                break;
            }
        }
        if (filtered) {
            FilterProblem pb;
            pb.u_nominal = u_nom;
            pb.rows = rows;
            pb.penalties = params.slack_penalty;
            sol = solve(pb);
            u = sol.u;
        }
        u = std::clamp(u, cfg.u_min, cfg.u_max);
        res.u_min = std::min(res.u_min, u);
        res.u_max = std::max(res.u_max, u);
        u_hist.push(u);

        if (observer_mode) {
            observer_step(obs, M, u_hist.at_offset(-cfg.tau_u), r, Y, dt);
        }

        // Accelerations applied over this step: the input decided tau_u ago
        // for the controlled vehicle, the clamped car-following response
        // for the followers, and the scenario override for the designated
        // follower during its window.
        Eigen::VectorXd accels(N + 1);
        accels(0) = u_hist.at_offset(-cfg.tau_u);
        for (int i = 1; i <= N; ++i) {
            double a = ovm_accel(gaps(i), speeds(i - 1) - speeds(i), speeds(i), cfg.ovm);
            if (cfg.hv_accel_clamp) {
                a = std::clamp(a, cfg.hv_accel_min, cfg.hv_accel_max);
            }
            accels(i) = a;
        }
        if (head.follower_override && t >= cfg.scenario.onset &&
            t < cfg.scenario.onset + cfg.scenario.duration) {
            accels(N) = cfg.scenario.magnitude;
        }

        if (opt.keep_log) {
            StepRecord row;
            row.t = t;
            row.head_speed = vh;
            row.head_accel = (vh_next - vh) / dt;
            row.gaps = gaps;
            row.speeds = speeds;
            row.accels = accels;
            row.u_nominal = u_nom;
            row.u_filtered = u;
            row.h = h;
            row.eps_norm = eps_norm;
            if (opt.record_constraints && filtered) {
                row.constraints.reserve(rows.size());
                for (std::size_t j = 0; j < rows.size(); ++j) {
                    ConstraintDiag diag;
                    diag.label = rows[j].label;
                    diag.coeff_u = rows[j].coeff_u;
                    diag.rhs = rows[j].rhs;
                    diag.h_value = rows[j].h_value;
                    diag.m_term = rows[j].m_term;
                    diag.z_term = rows[j].z_term;
                    diag.active = sol.row_active[j];
                    row.constraints.push_back(std::move(diag));
                }
            }
            res.log.rows.push_back(std::move(row));
        }

        if (collided_now && opt.stop_at_collision) {
            break;
        }

        step_plant(gaps, speeds, accels, vh, dt);
        res.min_gap = std::min(res.min_gap, gaps.minCoeff());
        res.min_gaps = res.min_gaps.cwiseMin(gaps);
    }

    res.eps_bar_used = obs.eps_bar;
    res.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return res;
}

}  // namespace

RunResult run(const RunConfig& cfg, const RunOptions& opt) {
    HeadSpec head;
    const ScenarioSpec scenario = cfg.scenario;
    const double v_star = cfg.v_star;
    head.speed = [scenario, v_star](double t) { return head_profile(scenario, t, v_star); };
    head.follower_override = scenario.kind == ScenarioKind::FollowerAccel;
    return run_impl(cfg, head, opt);
}

RunResult run_with_head_speed(const RunConfig& cfg,
                              const std::function<double(double)>& head_speed,
                              const RunOptions& opt) {
    HeadSpec head;
    head.speed = head_speed;
    head.follower_override = false;
    return run_impl(cfg, head, opt);
}

CollisionReport detect_collision(const TrajectoryLog& log) {
    CollisionReport report;
    for (const StepRecord& row : log.rows) {
        if (row.gaps.minCoeff() <= 0.0) {
            Eigen::Index worst = 0;
            row.gaps.minCoeff(&worst);
            report.collided = true;
            report.t = row.t;
            report.vehicle = static_cast<int>(worst);
            return report;
        }
    }
    return report;
}

void TrajectoryLog::write_csv(std::ostream& out) const {
    const int N = n_followers;
    std::string line;
    line += "t,s_-1";
    for (int i = 0; i <= N; ++i) {
        line += ",s_" + std::to_string(i);
    }
    line += ",v_-1";
    for (int i = 0; i <= N; ++i) {
        line += ",v_" + std::to_string(i);
    }
    line += ",a_-1";
    for (int i = 0; i <= N; ++i) {
        line += ",a_" + std::to_string(i);
    }
    line += ",u_nom,u_filt";
    for (int i = 0; i <= N; ++i) {
        line += ",h_" + std::to_string(i);
    }
    line += ",eps_norm\n";
    out << line;

    for (const StepRecord& row : rows) {
        line.clear();
        append_number(line, row.t);
        line += ",";  // the head vehicle has no gap: placeholder stays empty
        for (int i = 0; i <= N; ++i) {
            line += ",";
            append_number(line, row.gaps(i));
        }
        line += ",";
        append_number(line, row.head_speed);
        for (int i = 0; i <= N; ++i) {
            line += ",";
            append_number(line, row.speeds(i));
        }
        line += ",";
        append_number(line, row.head_accel);
        for (int i = 0; i <= N; ++i) {
            line += ",";
            append_number(line, row.accels(i));
        }
        line += ",";
        append_number(line, row.u_nominal);
        line += ",";
        append_number(line, row.u_filtered);
        for (int i = 0; i <= N; ++i) {
            line += ",";
            append_number(line, row.h(i));
        }
        line += ",";
        if (row.eps_norm >= 0.0) {
            append_number(line, row.eps_norm);
        }
        line += "\n";
        out << line;
    }
}

void TrajectoryLog::write_constraint_dump(std::ostream& out) const {
    std::string line;
    for (const StepRecord& row : rows) {
        for (const ConstraintDiag& diag : row.constraints) {
            line.clear();
            append_number(line, row.t);
            line += ", " + diag.label + ", ";
            append_number(line, diag.coeff_u);
            line += ", ";
            append_number(line, diag.rhs);
            line += ", ";
            append_number(line, diag.h_value);
            line += ", ";
            append_number(line, diag.m_term);
            line += ", ";
            append_number(line, diag.z_term);
            line += ", ";
            line += diag.active ? "1" : "0";
            line += "\n";
            out << line;
        }
    }
}

}  // namespace rstc
