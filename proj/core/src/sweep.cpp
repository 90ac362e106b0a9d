#include "rstc/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <ostream>
#include <thread>

#include "rstc/errors.hpp"

namespace rstc {

namespace {

// The comparison ceiling for accelerating scenarios: probing past this
// boundary speed stops being informative, so the natural cap maps to it.
constexpr double kSpeedCeiling = 50.0;

struct ProbeOutcome {
    std::vector<bool> vehicle_collides;
    bool chain_collides = false;
};

// One full-horizon probe at a given disturbance duration. The horizon
// leaves the onset, the disturbance, the symmetric recovery, and a settling
// tail; runs never stop at the first collision so every vehicle is
// classified by its own gap.
ProbeOutcome probe(const RunConfig& base, ScenarioKind kind, ControllerMode mode, double tau_u,
                   double accel, double duration) {
    RunConfig cfg = base;
    cfg.mode = mode;
    cfg.tau_u = tau_u;
    cfg.scenario.kind = kind;
    cfg.scenario.magnitude = accel;
    cfg.scenario.duration = duration;
    cfg.scenario.horizon =
        cfg.scenario.onset + 2.0 * std::max(duration, 1.0) + 12.0;
    RunOptions opt;
    opt.stop_at_collision = false;
    opt.keep_log = false;
    opt.record_constraints = false;
    const RunResult res = run(cfg, opt);

    ProbeOutcome out;
    out.vehicle_collides.resize(static_cast<std::size_t>(base.n_followers) + 1);
    for (int i = 0; i <= base.n_followers; ++i) {
        out.vehicle_collides[static_cast<std::size_t>(i)] = res.min_gaps(i) <= 0.0;
        out.chain_collides = out.chain_collides || out.vehicle_collides[static_cast<std::size_t>(i)];
    }
    return out;
}

}  // namespace

double boundary_speed(ScenarioKind kind, double v_star, double accel, double duration) {
    if (kind == ScenarioKind::HeadBrake) {
        return std::max(0.0, v_star - accel * duration);
    }
    return v_star + accel * duration;
}

SafetyRegion safety_region(const RunConfig& base, ScenarioKind kind, ControllerMode mode,
                           double tau_u, double duration_cap, double resolution) {
    if (!(resolution > 0.0)) {
        throw config_error("sweep: resolution must be positive");
    }
    const double accel =
        kind == ScenarioKind::HeadBrake ? -base.bounds.a_low : base.bounds.a_up;
    if (!(accel > 0.0)) {
        throw config_error("sweep: disturbance bounds leave no acceleration to probe with");
    }
    double cap = duration_cap;
    if (cap < 0.0) {
        cap = kind == ScenarioKind::HeadBrake ? base.v_star / accel
                                              : (kSpeedCeiling - base.v_star) / accel;
    }
    if (!(cap > resolution)) {
        throw config_error("sweep: duration cap must exceed the resolution");
    }

    SafetyRegion region;
    region.scenario = kind;
    region.mode = mode;
    region.tau_u = tau_u;
    region.v_star = base.v_star;
    region.accel = accel;
    region.duration_cap = cap;
    region.resolution = resolution;

    // Probes are memoised on the duration so the per-vehicle and chain
    // bisections share work wherever their paths coincide (they always
    // share at least the cap probe).
    std::map<long long, ProbeOutcome> memo;
    auto outcome_at = [&](double duration) -> const ProbeOutcome& {
        const long long key = std::llround(duration * 1e9);
        auto it = memo.find(key);
        if (it == memo.end()) {
            it = memo.emplace(key, probe(base, kind, mode, tau_u, accel, duration)).first;
        }
        return it->second;
    };

    // Bisection bracket: a zero-length disturbance is the equilibrium and
    // cannot collide; the cap either collides or the region is open there.
    auto bisect = [&](auto&& collides_at) -> std::pair<double, bool> {
        if (!collides_at(outcome_at(cap))) {
            return {cap, false};
        }
        double lo = 0.0;
        double hi = cap;
        while (hi - lo > resolution) {
            const double mid = 0.5 * (lo + hi);
            if (collides_at(outcome_at(mid))) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return {lo, true};
    };

    const int n_vehicles = base.n_followers + 1;
    region.vehicle_boundary.resize(static_cast<std::size_t>(n_vehicles));
    region.vehicle_bounded.resize(static_cast<std::size_t>(n_vehicles));
    for (int i = 0; i < n_vehicles; ++i) {
        const auto [dur, bounded] = bisect([i](const ProbeOutcome& o) {
            return o.vehicle_collides[static_cast<std::size_t>(i)];
        });
        region.vehicle_boundary[static_cast<std::size_t>(i)] = dur;
        region.vehicle_bounded[static_cast<std::size_t>(i)] = bounded;
    }
    const auto [chain_dur, chain_bounded] =
        bisect([](const ProbeOutcome& o) { return o.chain_collides; });
    region.chain_boundary = chain_dur;
    region.chain_bounded = chain_bounded;
    return region;
}

std::vector<SafetyRegion> sweep_delays(const RunConfig& base, ScenarioKind kind,
                                       const std::vector<ControllerMode>& modes,
                                       const std::vector<double>& tau_us, int jobs) {
    if (modes.empty()) {
        throw config_error("sweep: the mode list is empty");
    }
    if (tau_us.empty()) {
        throw config_error("sweep: the delay list is empty");
    }
    struct Cell {
        ControllerMode mode;
        double tau_u;
    };
    std::vector<Cell> cells;
    for (ControllerMode mode : modes) {
        for (double tau : tau_us) {
            cells.push_back({mode, tau});
        }
    }

    int workers = jobs;
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers < 1) {
            workers = 1;
        }
    }
    workers = std::min<int>(workers, static_cast<int>(cells.size()));

    // Cells are independent; results land in input order no matter which
    // worker finishes first, keeping the CSV deterministic.
    std::vector<SafetyRegion> regions(cells.size());
    std::size_t next = 0;
    while (next < cells.size()) {
        const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(workers),
                                                        cells.size() - next);
        std::vector<std::future<SafetyRegion>> futs;
        futs.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const Cell cell = cells[next + b];
            futs.push_back(std::async(std::launch::async, [&base, kind, cell]() {
                return safety_region(base, kind, cell.mode, cell.tau_u);
            }));
        }
        for (std::size_t b = 0; b < batch; ++b) {
            regions[next + b] = futs[b].get();
        }
        next += batch;
    }
    return regions;
}

void write_sweep_csv(std::ostream& out, const std::vector<SafetyRegion>& regions) {
    out << "scenario,mode,tau_u,vehicle,boundary_speed_mps\n";
    char buf[64];
    for (const SafetyRegion& region : regions) {
        auto row = [&](const std::string& vehicle, double duration) {
            const double speed =
                boundary_speed(region.scenario, region.v_star, region.accel, duration);
            std::snprintf(buf, sizeof(buf), "%.10g,%s,%.10g\n", region.tau_u, vehicle.c_str(),
                          speed);
            out << to_string(region.scenario) << "," << to_string(region.mode) << "," << buf;
        };
        for (std::size_t i = 0; i < region.vehicle_boundary.size(); ++i) {
            row(std::to_string(i), region.vehicle_boundary[i]);
        }
        row("chain", region.chain_boundary);
    }
}

}  // namespace rstc
