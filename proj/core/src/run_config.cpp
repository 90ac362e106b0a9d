#include "rstc/run_config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rstc/errors.hpp"

namespace rstc {

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::HeadBrake:
            return "head-brake";
        case ScenarioKind::FollowerAccel:
            return "follower-accel";
    }
    return "?";
}

std::string to_string(ControllerMode mode) {
    switch (mode) {
        case ControllerMode::Nominal:
            return "nominal";
        case ControllerMode::StcDelayFree:
            return "stc-delayfree";
        case ControllerMode::RstcFullState:
            return "rstc-full";
        case ControllerMode::RstcObserver:
            return "rstc-observer";
    }
    return "?";
}

ScenarioKind scenario_from_string(const std::string& text) {
    if (text == "head-brake") {
        return ScenarioKind::HeadBrake;
    }
    if (text == "follower-accel") {
        return ScenarioKind::FollowerAccel;
    }
    throw config_error("unknown scenario '" + text + "' (choose head-brake or follower-accel)");
}

ControllerMode mode_from_string(const std::string& text) {
    if (text == "nominal") {
        return ControllerMode::Nominal;
    }
    if (text == "stc-delayfree") {
        return ControllerMode::StcDelayFree;
    }
    if (text == "rstc-full") {
        return ControllerMode::RstcFullState;
    }
    if (text == "rstc-observer") {
        return ControllerMode::RstcObserver;
    }
    throw config_error("unknown mode '" + text +
                       "' (choose nominal, stc-delayfree, rstc-full, or rstc-observer)");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
        ++a;
    }
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
        --b;
    }
    return s.substr(a, b - a);
}

double parse_number(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (trim(value.substr(used)).empty() && std::isfinite(v)) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw config_error("line " + std::to_string(line) + ": '" + value + "' is not a number");
}

int parse_int(const std::string& value, int line) {
    const double v = parse_number(value, line);
    const int i = static_cast<int>(std::llround(v));
    if (std::abs(v - static_cast<double>(i)) > 1e-12) {
        throw config_error("line " + std::to_string(line) + ": '" + value +
                           "' is not an integer");
    }
    return i;
}

bool parse_bool(const std::string& value, int line) {
    if (value == "on" || value == "true" || value == "yes" || value == "1") {
        return true;
    }
    if (value == "off" || value == "false" || value == "no" || value == "0") {
        return false;
    }
    throw config_error("line " + std::to_string(line) + ": '" + value +
                       "' is not a boolean (use on/off)");
}

std::vector<double> parse_list(const std::string& value, int line) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number(trim(item), line));
    }
    if (out.empty()) {
        throw config_error("line " + std::to_string(line) + ": empty list");
    }
    return out;
}

}  // namespace

SafetyParams RunConfig::safety_params() const {
    const std::size_t N = static_cast<std::size_t>(n_followers);
    auto broadcast = [&](const std::vector<double>& v, std::size_t want, const char* key) {
        if (v.size() == want) {
            return v;
        }
        if (v.size() == 1) {
            return std::vector<double>(want, v[0]);
        }
        throw config_error(std::string("safety: ") + key + " must be a scalar or a list of " +
                           std::to_string(want) + " values, got " + std::to_string(v.size()));
    };
    SafetyParams p;
    p.psi0 = psi0;
    p.psi_hv = broadcast(psi_hv, N, "psi_hv");
    p.eta = broadcast(eta, N, "eta");
    p.gamma = broadcast(gamma, N + 1, "gamma");
    p.slack_penalty = broadcast(slack_penalty, N, "slack_penalty");
    return p;
}

Eigen::VectorXd RunConfig::nominal_gain(const LinearHvCoeffs& coeffs) const {
    const int n = 2 * (n_followers + 1);
    Eigen::VectorXd K(n);
    if (!gain_override.empty()) {
        if (static_cast<int>(gain_override.size()) != n) {
            throw config_error("controller: gain override needs " + std::to_string(n) +
                               " entries, got " + std::to_string(gain_override.size()));
        }
        for (int i = 0; i < n; ++i) {
            K(i) = gain_override[static_cast<std::size_t>(i)];
        }
        return K;
    }
    // Cancel the linearised coupling on the controlled vehicle's block and
    // add mild gap/speed feedback on every follower block.
    K(0) = coeffs.a1;
    K(1) = -coeffs.a2;
    for (int i = 1; i <= n_followers; ++i) {
        K(2 * i) = -2.0;
        K(2 * i + 1) = 0.2;
    }
    return K;
}

void RunConfig::validate() const {
    if (n_followers < 0) {
        throw config_error("platoon: n_followers must be non-negative");
    }
    ovm.validate();
    const Equilibrium eq = solve_equilibrium_gap(v_star, ovm);
    (void)linearize_hv(eq, ovm);  // rejects equilibria outside the ramp

    if (hv_accel_clamp && !(hv_accel_min < 0.0 && hv_accel_max > 0.0)) {
        throw config_error("platoon: follower acceleration clamp must straddle zero");
    }
    if (!(dt > 0.0)) {
        throw config_error("delays: dt must be positive");
    }
    for (const auto& [name, tau] : {std::pair<const char*, double>{"tau_u", tau_u},
                                    std::pair<const char*, double>{"tau_y", tau_y}}) {
        if (tau < 0.0) {
            throw config_error(std::string("delays: ") + name + " must be non-negative");
        }
        const long long k = std::llround(tau / dt);
        if (std::abs(tau - static_cast<double>(k) * dt) > 1e-9) {
            throw config_error(std::string("delays: ") + name + "=" + std::to_string(tau) +
                               " is not an integer multiple of dt=" + std::to_string(dt) +
                               "; choose a dt that divides both delays");
        }
    }
    safety_params().validate();
    bounds.validate();
    if (!eps_bar_auto && !(eps_bar >= 0.0)) {
        throw config_error("safety: eps_bar must be non-negative");
    }

    if (!(scenario.magnitude > 0.0)) {
        throw config_error("scenario: magnitude must be positive");
    }
    if (!(scenario.duration > 0.0)) {
        throw config_error("scenario: duration must be positive");
    }
    if (scenario.onset < 0.0) {
        throw config_error("scenario: onset must be non-negative");
    }
    if (!(scenario.horizon > scenario.onset + 2.0 * scenario.duration)) {
        throw config_error("scenario: horizon must exceed onset + 2*duration (the disturbance "
                           "plus recovery) with settling margin");
    }
    if (scenario.kind == ScenarioKind::FollowerAccel && n_followers < 1) {
        throw config_error("scenario: follower-accel needs at least one follower");
    }

    if (!gain_override.empty() &&
        static_cast<int>(gain_override.size()) != 2 * (n_followers + 1)) {
        throw config_error("controller: gain override needs " +
                           std::to_string(2 * (n_followers + 1)) + " entries");
    }
    if (!(u_min <= u_max)) {
        throw config_error("controller: u_min must not exceed u_max");
    }

    if (observer_section_present && mode != ControllerMode::RstcObserver) {
        throw config_error("the [observer] section only applies to mode=rstc-observer; remove "
                           "the section or switch mode");
    }
    if (!(observer_q > 0.0) || !(observer_r > 0.0)) {
        throw config_error("observer: q and r weights must be positive");
    }
    if (mode == ControllerMode::RstcObserver && loaded_from_file && !eps_bar_set) {
        throw config_error("safety: eps_bar is required for mode=rstc-observer (a number, or "
                           "'auto' to size it from the measured initial error)");
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string stripped = trim(raw.substr(0, raw.find('#')));
        if (stripped.empty()) {
            continue;
        }
        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                throw config_error("line " + std::to_string(line) + ": malformed section header");
            }
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section != "platoon" && section != "delays" && section != "safety" &&
                section != "controller" && section != "scenario" && section != "observer" &&
                section != "output") {
                throw config_error("line " + std::to_string(line) + ": unknown section [" +
                                   section + "]");
            }
            if (section == "observer") {
                cfg.observer_section_present = true;
            }
            continue;
        }
        const std::size_t eq_pos = stripped.find('=');
        if (eq_pos == std::string::npos) {
            throw config_error("line " + std::to_string(line) + ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq_pos));
        const std::string value = trim(stripped.substr(eq_pos + 1));
        if (section.empty()) {
            throw config_error("line " + std::to_string(line) + ": key outside any section");
        }
        if (value.empty()) {
            throw config_error("line " + std::to_string(line) + ": empty value for " + key);
        }

        if (section == "platoon") {
            if (key == "n_followers") {
                cfg.n_followers = parse_int(value, line);
            } else if (key == "v_star") {
                cfg.v_star = parse_number(value, line);
            } else if (key == "ovm_alpha") {
                cfg.ovm.alpha = parse_number(value, line);
            } else if (key == "ovm_beta") {
                cfg.ovm.beta = parse_number(value, line);
            } else if (key == "ovm_s_st") {
                cfg.ovm.s_st = parse_number(value, line);
            } else if (key == "ovm_s_go") {
                cfg.ovm.s_go = parse_number(value, line);
            } else if (key == "ovm_v_max") {
                cfg.ovm.v_max = parse_number(value, line);
            } else if (key == "hv_accel_clamp") {
                cfg.hv_accel_clamp = parse_bool(value, line);
            } else if (key == "hv_accel_min") {
                cfg.hv_accel_min = parse_number(value, line);
            } else if (key == "hv_accel_max") {
                cfg.hv_accel_max = parse_number(value, line);
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [platoon]");
            }
        } else if (section == "delays") {
            if (key == "dt") {
                cfg.dt = parse_number(value, line);
            } else if (key == "tau_u") {
                cfg.tau_u = parse_number(value, line);
            } else if (key == "tau_y") {
                cfg.tau_y = parse_number(value, line);
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [delays]");
            }
        } else if (section == "safety") {
            if (key == "psi0") {
                cfg.psi0 = parse_number(value, line);
            } else if (key == "psi_hv") {
                cfg.psi_hv = parse_list(value, line);
            } else if (key == "eta") {
                cfg.eta = parse_list(value, line);
            } else if (key == "gamma") {
                cfg.gamma = parse_list(value, line);
            } else if (key == "slack_penalty") {
                cfg.slack_penalty = parse_list(value, line);
            } else if (key == "a_low") {
                cfg.bounds.a_low = parse_number(value, line);
            } else if (key == "a_up") {
                cfg.bounds.a_up = parse_number(value, line);
            } else if (key == "eps_bar") {
                cfg.eps_bar_set = true;
                if (value == "auto") {
                    cfg.eps_bar_auto = true;
                } else {
                    cfg.eps_bar_auto = false;
                    cfg.eps_bar = parse_number(value, line);
                }
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [safety]");
            }
        } else if (section == "controller") {
            if (key == "mode") {
                cfg.mode = mode_from_string(value);
            } else if (key == "gain") {
                cfg.gain_override = parse_list(value, line);
            } else if (key == "u_min") {
                cfg.u_min = parse_number(value, line);
            } else if (key == "u_max") {
                cfg.u_max = parse_number(value, line);
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [controller]");
            }
        } else if (section == "scenario") {
            if (key == "kind") {
                cfg.scenario.kind = scenario_from_string(value);
            } else if (key == "magnitude") {
                cfg.scenario.magnitude = parse_number(value, line);
            } else if (key == "duration") {
                cfg.scenario.duration = parse_number(value, line);
            } else if (key == "onset") {
                cfg.scenario.onset = parse_number(value, line);
            } else if (key == "horizon") {
                cfg.scenario.horizon = parse_number(value, line);
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [scenario]");
            }
        } else if (section == "observer") {
            if (key == "q") {
                cfg.observer_q = parse_number(value, line);
            } else if (key == "r") {
                cfg.observer_r = parse_number(value, line);
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [observer]");
            }
        } else if (section == "output") {
            if (key == "dir") {
                cfg.out_dir = value;
            } else {
                throw config_error("line " + std::to_string(line) + ": unknown key '" + key +
                                   "' in [output]");
            }
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw config_error("cannot open config file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << file.rdbuf();
    RunConfig cfg = parse_config_text(buffer.str());
    cfg.loaded_from_file = true;
    cfg.validate();
    return cfg;
}

}  // namespace rstc
