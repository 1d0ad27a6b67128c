#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "chemrd/diffusion.hpp"
#include "chemrd/errors.hpp"
#include "chemrd/grid.hpp"
#include "chemrd/kinetics.hpp"
#include "chemrd/parameters.hpp"
#include "chemrd/state.hpp"
#include "chemrd/tridiagonal.hpp"

namespace chemrd {

enum class Scheme {
    imex_be,        // implicit diffusion (backward Euler), explicit reactions
    explicit_euler, // fully explicit, for cross-checks and small problems
};

struct StepperConfig {
    double dt = 1e-3;
    double t_end = 10.0;
    Scheme scheme = Scheme::imex_be;
    // Negative entries are always zeroed; excursions at most this deep are
    // treated as round-off and left out of the recorded clipped mass.
    double clip_tolerance = 0.0;
    std::size_t snapshot_stride = 1;
    double blowup_guard = 1e6;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw model_error("stepper: dt must be positive");
        if (!(t_end >= 0.0) || !std::isfinite(t_end))
            throw model_error("stepper: t_end must be nonnegative");
        if (snapshot_stride < 1) throw model_error("stepper: snapshot stride must be >= 1");
        if (!(blowup_guard > 0.0)) throw model_error("stepper: blow-up guard must be positive");
        if (!(clip_tolerance >= 0.0)) throw model_error("stepper: clip tolerance must be >= 0");
    }
};

// Boundary drug injection rates as functions of time, one per boundary face.
struct BoundaryControl {
    std::function<double(double)> left = [](double) { return 0.0; };
    std::function<double(double)> right = [](double) { return 0.0; };

    static BoundaryControl none() { return BoundaryControl{}; }
};

// Scalar series recorded at every time level. `influx` and `absorption`
// describe the step that ends at `t` (zero on the initial row): influx is
// the gated boundary inflow rate of drug, absorption the domain integral of
// k2 U at the step start. Together with the clipped drug mass they satisfy
// mass_U(t) - mass_U(t - dt) = dt (influx - absorption) + clipped_U
// up to round-off, which diagnostics::drug_balance_residual re-checks.
struct StepDiagnostics {
    double t = 0.0;
    std::array<double, 4> mass{};
    std::array<double, 4> sup{};
    std::array<double, 4> clipped{};
    double influx = 0.0;
    double absorption = 0.0;
};

struct Trajectory {
    std::vector<double> snapshot_times;
    std::vector<StateVector> snapshots;
    std::vector<StepDiagnostics> steps; // one entry per time level, t = k dt

    const StateVector& final_state() const {
        if (snapshots.empty()) throw evaluation_error("trajectory: no snapshots stored");
        return snapshots.back();
    }
};

struct StepResult {
    StateVector state;
    std::array<double, 4> clipped{};
    double influx = 0.0;
    double absorption = 0.0;
};

namespace detail {

inline double field_mass(const std::vector<double>& f, double h) {
    double m = 0.0;
    for (double v : f) m += v;
    return m * h;
}

inline double field_sup(const std::vector<double>& f) {
    double m = 0.0;
    for (double v : f) m = std::max(m, std::abs(v));
    return m;
}

inline double clip_negative(std::vector<double>& f, double h, double tolerance) {
    double clipped = 0.0;
    for (double& v : f) {
        if (v < 0.0) {
            if (-v > tolerance) clipped += -v * h;
            v = 0.0;
        }
    }
    return clipped;
}

} // namespace detail

// One time step from `time` to `time + dt`. Reactions and the gated
// boundary inflow are evaluated explicitly at the step start; diffusion is
// either backward Euler with face coefficients frozen at the old state
// (one tridiagonal solve per species) or explicit. Negative entries of the
// new state are clipped to zero and the clipped mass recorded per species.
inline StepResult step(const StateVector& z, double time, double dt, const ModelParameters& p,
                       const Grid1D& grid, const BoundaryControl& v, Scheme scheme,
                       double clip_tolerance = 0.0) {
    if (!(dt > 0.0)) throw model_error("step: dt must be positive");
    const std::size_t n = grid.n;
    if (z.cells() != n) throw evaluation_error("step: state length does not match the grid");

    std::array<std::vector<double>, 4> react;
    for (auto& r : react) r.resize(n);
    double absorption = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Reactions F = eval_reactions(z.N[i], z.T[i], z.I[i], z.U[i], p, i, time);
        react[0][i] = F[0];
        react[1][i] = F[1];
        react[2][i] = F[2];
        react[3][i] = F[3];
        absorption -= F[3] * grid.h;
    }

    const double vl = v.left(time);
    const double vr = v.right(time);
    apply_drug_boundary_flux(react[3], vl, vr, z.N.front(), z.N.back(), p, grid.h);
    const double influx = vl * heaviside_smooth(z.N.front() - p.a0_gate, p.delta) +
                          vr * heaviside_smooth(z.N.back() - p.a0_gate, p.delta);

    const DiffusionFn* dfn[4] = {&p.d1, &p.d2, &p.d3, &p.d4};
    StepResult out;
    out.state = StateVector::zeros(n);
    out.influx = influx;
    out.absorption = absorption;

    if (scheme == Scheme::explicit_euler) {
        for (int sp = 0; sp < 4; ++sp) {
            const std::vector<double>& f = z.field(sp);
            const FaceCoefficients faces = face_diffusion(f, *dfn[sp], grid, time, p.delta0);
            const std::vector<double> diff = apply_diffusion(f, faces, grid.h);
            std::vector<double>& out_f = out.state.field(sp);
            for (std::size_t i = 0; i < n; ++i)
                out_f[i] = f[i] + dt * (diff[i] + react[sp][i]);
            out.clipped[sp] = detail::clip_negative(out_f, grid.h, clip_tolerance);
        }
        return out;
    }

    const double r = dt / (grid.h * grid.h);
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    for (int sp = 0; sp < 4; ++sp) {
        const std::vector<double>& f = z.field(sp);
        const FaceCoefficients faces = face_diffusion(f, *dfn[sp], grid, time, p.delta0);
        for (std::size_t i = 0; i < n; ++i) {
            const double dw = (i > 0) ? faces.face[i - 1] : 0.0;
            const double de = (i + 1 < n) ? faces.face[i] : 0.0;
            lower[i] = -r * dw;
            upper[i] = -r * de;
            diag[i] = 1.0 + r * (dw + de);
            rhs[i] = f[i] + dt * react[sp][i];
        }
        std::vector<double>& out_f = out.state.field(sp);
        out_f = tridiagonal_solve(lower, diag, upper, rhs);
        out.clipped[sp] = detail::clip_negative(out_f, grid.h, clip_tolerance);
    }
    return out;
}

// Integrates the system over [0, t_end] with t_k = k dt (the step count is
// t_end/dt rounded to the nearest integer). Diagnostics are recorded at
// every level; snapshots at the configured stride plus the final state.
// Identical inputs produce bit-identical trajectories.
inline Trajectory simulate(const StateVector& z0, const ModelParameters& p, const Grid1D& grid,
                           const StepperConfig& cfg,
                           const BoundaryControl& v = BoundaryControl::none()) {
    p.validate();
    cfg.validate();
    z0.validate();
    if (z0.cells() != grid.n)
        throw model_error("simulate: initial data length does not match the grid");

    const long long n_steps = std::llround(cfg.t_end / cfg.dt);

    Trajectory traj;
    traj.steps.reserve(static_cast<std::size_t>(n_steps) + 1);

    StateVector cur = z0;
    StepDiagnostics d0;
    d0.t = 0.0;
    for (int sp = 0; sp < 4; ++sp) {
        d0.mass[sp] = detail::field_mass(cur.field(sp), grid.h);
        d0.sup[sp] = detail::field_sup(cur.field(sp));
    }
    traj.steps.push_back(d0);
    traj.snapshot_times.push_back(0.0);
    traj.snapshots.push_back(cur);

    for (long long k = 1; k <= n_steps; ++k) {
        const double t_old = static_cast<double>(k - 1) * cfg.dt;
        const double t_new = static_cast<double>(k) * cfg.dt;
        StepResult res = step(cur, t_old, cfg.dt, p, grid, v, cfg.scheme, cfg.clip_tolerance);
        cur = std::move(res.state);

        StepDiagnostics d;
        d.t = t_new;
        d.clipped = res.clipped;
        d.influx = res.influx;
        d.absorption = res.absorption;
        for (int sp = 0; sp < 4; ++sp) {
            d.mass[sp] = detail::field_mass(cur.field(sp), grid.h);
            d.sup[sp] = detail::field_sup(cur.field(sp));
            if (!(d.sup[sp] <= cfg.blowup_guard))
                throw evaluation_error("simulate: field exceeded the blow-up guard at t=" +
                                       std::to_string(t_new));
        }
        traj.steps.push_back(d);

        if (k % static_cast<long long>(cfg.snapshot_stride) == 0 || k == n_steps) {
            traj.snapshot_times.push_back(t_new);
            traj.snapshots.push_back(cur);
        }
    }
    return traj;
}

// Advisory time-step check: crude bound on the explicit destruction rate at
// the logistic caps, plus the explicit-diffusion limit h^2 / (2 max d).
// Never blocks a run.
struct StabilityReport {
    double dt = 0.0;
    double reaction_rate_estimate = 0.0;
    double reaction_product = 0.0;
    bool reaction_warning = false;
    double explicit_diffusion_limit = 0.0;
    bool explicit_diffusion_warning = false;
};

inline StabilityReport stability_report(const ModelParameters& p, const Grid1D& grid, double dt) {
    StabilityReport rep;
    rep.dt = dt;
    const double cap1 = 1.0 / p.b1, cap2 = 1.0 / p.b2, cap3 = 1.0 / p.b3;
    const double rate1 = p.r1.max_value() + p.c4 * cap2 + p.a3;
    const double rate2 = p.r2.max_value() + p.c2 * cap3 + p.c3 * cap1 + p.a2;
    const double rate3 = p.r3.max_value() + p.c1 * cap2 + p.k1 + p.a1;
    const double rate4 = p.k2.max_value();
    rep.reaction_rate_estimate = std::max(std::max(rate1, rate2), std::max(rate3, rate4));
    rep.reaction_product = dt * rep.reaction_rate_estimate;
    rep.reaction_warning = rep.reaction_product > 1.0;

    const double zmax = std::max(std::max(cap1, cap2), std::max(cap3, 1.0));
    double dmax = p.delta0;
    const DiffusionFn* dfn[4] = {&p.d1, &p.d2, &p.d3, &p.d4};
    for (const DiffusionFn* d : dfn)
        for (std::size_t i = 0; i + 1 < grid.n; ++i)
            for (double z : {0.0, zmax}) dmax = std::max(dmax, (*d)(grid.face(i + 1), 0.0, z));
    rep.explicit_diffusion_limit = grid.h * grid.h / (2.0 * dmax);
    rep.explicit_diffusion_warning = dt > rep.explicit_diffusion_limit;
    return rep;
}

} // namespace chemrd
