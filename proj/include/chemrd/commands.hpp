#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <ostream>
#include <string>

#include "chemrd/config.hpp"
#include "chemrd/control.hpp"
#include "chemrd/csv.hpp"
#include "chemrd/diagnostics.hpp"
#include "chemrd/errors.hpp"
#include "chemrd/stepper.hpp"

namespace chemrd {

// Exit codes shared by all commands.
inline constexpr int exit_ok = 0;
inline constexpr int exit_validation_failure = 1;
inline constexpr int exit_config_error = 2;

inline int run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const Grid1D grid = cfg.make_grid();
    const StateVector z0 = cfg.make_initial(grid);
    const Trajectory traj =
        simulate(z0, cfg.params, grid, cfg.make_stepper(), cfg.make_boundary_control());
    std::filesystem::create_directories(out_dir);
    csv::write_trajectory(out_dir / "trajectory.csv", traj);
    csv::write_snapshots(out_dir / "snapshots.csv", traj, grid);
    return exit_ok;
}

inline int run_optimize(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log = std::cout) {
    if (!cfg.control.enabled())
        throw config_error("optimize needs a control block with knots and per-patch values");
    ControlProblem problem{cfg.params, cfg.make_grid(), {}, cfg.control.knots.back(),
                           cfg.stepper.dt, cfg.stepper.blowup_guard};
    problem.initial = cfg.make_initial(problem.grid);

    const OptimizeResult res =
        optimize(cfg.control.schedule(), problem, cfg.control.lambda, cfg.control.penalty(),
                 cfg.control.constraints(), cfg.control.optimizer);

    // Re-run the returned schedule at the configured output stride for the
    // trajectory artifacts.
    StepperConfig out_stepper = problem.stepper();
    out_stepper.snapshot_stride = cfg.output.stride;
    const Trajectory traj = simulate(problem.initial, problem.params, problem.grid, out_stepper,
                                     res.best.boundary_control());

    std::filesystem::create_directories(out_dir);
    csv::write_trajectory(out_dir / "trajectory.csv", traj);
    csv::write_snapshots(out_dir / "snapshots.csv", traj, problem.grid);
    csv::write_history(out_dir / "history.csv", res.history);
    csv::write_best_control(out_dir / "best_control.csv", res.best);
    log << "optimize: " << to_string(res.reason) << " after "
        << res.history.back().iter << " accepted iterations, total "
        << csv::format_double(res.history.back().report.total) << "\n";
    return exit_ok;
}

// Invariant battery over the loaded configuration: parameter and grid
// checks, then a capped simulation probing state nonnegativity, the
// per-step drug balance, and discrete conservation of the diffusion
// stencil. Prints one line per check; exit 1 if any fails.
inline int run_validate(const RunConfig& cfg, std::ostream& out = std::cout) {
    int failures = 0;
    auto check = [&](const char* name, bool ok, const std::string& detail = "") {
        out << (ok ? "[ok]   " : "[FAIL] ") << name;
        if (!detail.empty()) out << " (" << detail << ")";
        out << "\n";
        if (!ok) ++failures;
    };

    cfg.params.validate();
    const Grid1D grid = cfg.make_grid();
    const StateVector z0 = cfg.make_initial(grid);
    check("parameters and grid invariants", true);

    check("gate switch endpoints", heaviside_smooth(-1.0, cfg.params.delta) == 0.0 &&
                                       heaviside_smooth(cfg.params.delta, cfg.params.delta) == 1.0);

    const StabilityReport stab = stability_report(cfg.params, grid, cfg.stepper.dt);
    check("time step advisory", true,
          "dt * destruction estimate = " + csv::format_double(stab.reaction_product) +
              (stab.reaction_warning ? ", above 1" : ""));

    StepperConfig st = cfg.make_stepper();
    st.t_end = std::min(st.t_end, 200.0 * st.dt);
    const Trajectory traj = simulate(z0, cfg.params, grid, st, cfg.make_boundary_control());

    bool nonneg = true;
    for (const StateVector& z : traj.snapshots) {
        for (int sp = 0; sp < 4; ++sp)
            for (double v : z.field(sp))
                if (v < 0.0) nonneg = false;
    }
    check("states nonnegative after clipping", nonneg);

    double max_resid = 0.0;
    for (double r : drug_balance_residual(traj)) max_resid = std::max(max_resid, r);
    check("per-step drug balance", max_resid <= 1e-8,
          "max relative residual " + csv::format_double(max_resid));

    const StateVector& zf = traj.final_state();
    const FaceCoefficients faces = face_diffusion(zf.N, cfg.params.d1, grid, st.t_end,
                                                  cfg.params.delta0);
    const std::vector<double> rate = apply_diffusion(zf.N, faces, grid.h);
    double total = 0.0, variation = 0.0;
    for (double r : rate) {
        total += r * grid.h;
        variation += std::abs(r) * grid.h;
    }
    check("diffusion stencil conserves mass",
          std::abs(total) <= 1e-12 * std::max(variation, 1.0),
          "telescoped sum " + csv::format_double(total));

    if (cfg.control.enabled()) {
        InjectionSchedule v = cfg.control.schedule();
        v.validate();
        check("injection schedule admissible", true);
    }

    out << (failures == 0 ? "validation passed\n" : "validation FAILED\n");
    return failures == 0 ? exit_ok : exit_validation_failure;
}

inline int run_jeff(const std::filesystem::path& out_dir) {
    const Grid1D grid(1.0, 64);
    const JeffScenario sc = jeff_scenario(desk_defaults(), grid);
    const Trajectory traj = simulate(sc.initial, sc.params, sc.grid, sc.stepper);
    std::filesystem::create_directories(out_dir);
    csv::write_trajectory(out_dir / "trajectory.csv", traj);
    csv::write_snapshots(out_dir / "snapshots.csv", traj, sc.grid);

    std::vector<double> times, tumor_mass;
    for (const StepDiagnostics& d : traj.steps) {
        times.push_back(d.t);
        tumor_mass.push_back(d.mass[1]);
    }
    const EnvelopeCheck env = envelope_check(times, tumor_mass, sc.interval_length, 5);
    std::cout << "interval-to-interval tumor-mass contraction from j=" << env.j_begin << ": "
              << (env.all() ? "holds" : "VIOLATED") << "\n";
    return exit_ok;
}

} // namespace chemrd
