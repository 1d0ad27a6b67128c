#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chemrd/diagnostics.hpp"
#include "chemrd/diffusion.hpp"
#include "chemrd/errors.hpp"
#include "chemrd/grid.hpp"
#include "chemrd/kinetics.hpp"
#include "chemrd/parameters.hpp"
#include "chemrd/state.hpp"
#include "chemrd/stepper.hpp"
#include "chemrd/tridiagonal.hpp"

namespace chemrd {

// Boundary drug injection, piecewise constant in time on each of the two
// boundary patches. values[p][j] applies on [knots[j], knots[j+1]); the
// final knot is the horizon end and carries no coefficient. Admissible
// schedules live in the box [0, cap] coefficientwise.
struct InjectionSchedule {
    std::vector<double> knots;
    std::array<std::vector<double>, 2> values; // [left, right]
    double cap = 1.0;

    std::size_t intervals() const { return knots.empty() ? 0 : knots.size() - 1; }

    double operator()(double t, int patch) const {
        const std::vector<double>& vals = values[static_cast<std::size_t>(patch)];
        if (t <= knots.front()) return vals.front();
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        std::size_t j = static_cast<std::size_t>(it - knots.begin());
        j = (j == 0) ? 0 : j - 1;
        if (j >= vals.size()) j = vals.size() - 1;
        return vals[j];
    }

    double max_coefficient() const {
        double m = 0.0;
        for (const auto& vals : values)
            for (double v : vals) m = std::max(m, v);
        return m;
    }

    BoundaryControl boundary_control() const {
        InjectionSchedule copy = *this;
        return BoundaryControl{
            [copy](double t) { return copy(t, 0); },
            [copy](double t) { return copy(t, 1); },
        };
    }

    void validate() const {
        if (knots.size() < 2) throw admissibility_error("injection: at least two knot times");
        if (knots.front() != 0.0) throw admissibility_error("injection: first knot must be t=0");
        for (std::size_t k = 1; k < knots.size(); ++k)
            if (!(knots[k] > knots[k - 1]))
                throw admissibility_error("injection: knot times must be strictly increasing");
        if (!(cap > 0.0) || !std::isfinite(cap))
            throw admissibility_error("injection: cap must be positive");
        for (const auto& vals : values) {
            if (vals.size() != intervals())
                throw admissibility_error("injection: one coefficient per knot interval per patch");
            for (double v : vals) {
                if (!std::isfinite(v)) throw admissibility_error("injection: non-finite coefficient");
                if (v < 0.0 || v > cap)
                    throw admissibility_error("injection: coefficient outside [0, cap]");
            }
        }
    }
};

// A direction in control space: same knots and patches as the schedule it
// perturbs, but coefficients of any sign and no box constraint.
struct ControlDirection {
    std::array<std::vector<double>, 2> values;

    static ControlDirection zeros_like(const InjectionSchedule& v) {
        ControlDirection d;
        d.values[0].assign(v.intervals(), 0.0);
        d.values[1].assign(v.intervals(), 0.0);
        return d;
    }

    static ControlDirection coordinate(const InjectionSchedule& v, int patch, std::size_t interval) {
        ControlDirection d = zeros_like(v);
        d.values[static_cast<std::size_t>(patch)].at(interval) = 1.0;
        return d;
    }

    double at(const std::vector<double>& knots, double t, int patch) const {
        const std::vector<double>& vals = values[static_cast<std::size_t>(patch)];
        if (vals.empty()) return 0.0;
        if (t <= knots.front()) return vals.front();
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        std::size_t j = static_cast<std::size_t>(it - knots.begin());
        j = (j == 0) ? 0 : j - 1;
        if (j >= vals.size()) j = vals.size() - 1;
        return vals[j];
    }
};

// Mass floors for the normal and immune populations over [0, t0]. The
// penalty acts on z = min over sample times of min(mass_N, mass_I) against
// M0 = min(a0_mass, b0_mass). Empty sample_times means every recorded step.
struct ConstraintSpec {
    double a0_mass = 0.55;
    double b0_mass = 0.20;
    std::vector<double> sample_times;

    double m0() const { return std::min(a0_mass, b0_mass); }

    void validate(double initial_mass_n, double initial_mass_i) const {
        if (!(a0_mass > 0.0 && a0_mass < initial_mass_n))
            throw model_error("a0_mass: floor must satisfy 0 < a0_mass < initial normal-cell mass");
        if (!(b0_mass > 0.0 && b0_mass < initial_mass_i))
            throw model_error("b0_mass: floor must satisfy 0 < b0_mass < initial immune-cell mass");
        for (double t : sample_times)
            if (!(t >= 0.0) || !std::isfinite(t))
                throw model_error("sample_times: entries must be finite and nonnegative");
    }
};

enum class PenaltyForm { quadratic_hinge };

struct PenaltyConfig {
    double eps = 0.05;
    PenaltyForm form = PenaltyForm::quadratic_hinge;

    void validate() const {
        if (!(eps > 0.0)) throw model_error("penalty: eps must be positive");
    }
};

// Quadratic hinge surrogate for the hard floor: worth 1/eps at z = M0,
// exactly zero for z >= M0 + eps, C1 and convex in between and below.
inline double penalty_beta(double z, double m0, double eps) {
    if (!(eps > 0.0)) throw model_error("penalty: eps must be positive");
    const double q = std::max(0.0, (m0 + eps - z) / eps);
    return q * q / eps;
}

inline double penalty_beta_derivative(double z, double m0, double eps) {
    if (!(eps > 0.0)) throw model_error("penalty: eps must be positive");
    const double q = std::max(0.0, (m0 + eps - z) / eps);
    return -2.0 * q / (eps * eps);
}

struct CostReport {
    double terminal_tumor_mass = 0.0;
    double lambda_term = 0.0;
    double penalty = 0.0;
    double total = 0.0;
    double constraint_min = std::numeric_limits<double>::infinity();
    double constraint_min_time = 0.0;
    int constraint_species = 0; // 0: normal cells, 2: immune cells
};

// Everything a cost evaluation needs besides the schedule itself. The
// stepper runs dense in time (stride 1) so a base trajectory can feed the
// sensitivity solver without re-simulation.
struct ControlProblem {
    ModelParameters params;
    Grid1D grid;
    StateVector initial;
    double t0 = 5.0;
    double dt = 2e-3;
    double blowup_guard = 1e6;

    StepperConfig stepper() const {
        StepperConfig c;
        c.dt = dt;
        c.t_end = t0;
        c.scheme = Scheme::imex_be;
        c.snapshot_stride = 1;
        c.blowup_guard = blowup_guard;
        return c;
    }
};

namespace detail {

struct ConstraintScan {
    double zmin = std::numeric_limits<double>::infinity();
    double tmin = 0.0;
    int species = 0;
    std::size_t step_index = 0;
};

// Earliest minimizer of min(mass_N, mass_I) over the sample times; ties in
// the inner min go to the normal-cell mass.
inline ConstraintScan scan_constraint(const Trajectory& traj,
                                      const std::vector<double>& sample_times) {
    std::vector<std::size_t> idx;
    if (sample_times.empty()) {
        idx.resize(traj.steps.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    } else {
        for (double t : sample_times) {
            std::size_t best = 0;
            double dist = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < traj.steps.size(); ++k) {
                const double d = std::abs(traj.steps[k].t - t);
                if (d < dist) {
                    dist = d;
                    best = k;
                }
            }
            idx.push_back(best);
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }
    ConstraintScan scan;
    for (std::size_t k : idx) {
        const double zn = traj.steps[k].mass[0];
        const double zi = traj.steps[k].mass[2];
        const double inner = std::min(zn, zi);
        if (inner < scan.zmin) {
            scan.zmin = inner;
            scan.tmin = traj.steps[k].t;
            scan.species = (zn <= zi) ? 0 : 2;
            scan.step_index = k;
        }
    }
    return scan;
}

inline void check_horizon(const InjectionSchedule& v, const ControlProblem& problem) {
    if (v.knots.back() != problem.t0)
        throw admissibility_error("injection: final knot must equal the horizon t0");
}

} // namespace detail

// Plain objective: terminal tumor mass plus lambda times the sup of the
// schedule (for a piecewise-constant control that sup is exactly the
// largest coefficient). The constraint fields of the report are filled for
// inspection; the penalty term is zero here.
inline CostReport evaluate_cost(const InjectionSchedule& v, const ControlProblem& problem,
                                double lambda, Trajectory* out_trajectory = nullptr) {
    if (!(lambda >= 0.0)) throw evaluation_error("cost: lambda must be nonnegative");
    v.validate();
    detail::check_horizon(v, problem);
    Trajectory traj = simulate(problem.initial, problem.params, problem.grid, problem.stepper(),
                               v.boundary_control());
    CostReport rep;
    rep.terminal_tumor_mass = traj.steps.back().mass[1];
    rep.lambda_term = lambda * v.max_coefficient();
    const detail::ConstraintScan scan = detail::scan_constraint(traj, {});
    rep.constraint_min = scan.zmin;
    rep.constraint_min_time = scan.tmin;
    rep.constraint_species = scan.species;
    rep.penalty = 0.0;
    rep.total = rep.terminal_tumor_mass + rep.lambda_term;
    if (out_trajectory) *out_trajectory = std::move(traj);
    return rep;
}

// Objective plus the floor penalty evaluated at the constraint minimum over
// the configured sample times.
inline CostReport penalized_cost(const InjectionSchedule& v, const ControlProblem& problem,
                                 double lambda, const PenaltyConfig& penalty,
                                 const ConstraintSpec& constraints,
                                 Trajectory* out_trajectory = nullptr) {
    penalty.validate();
    Trajectory traj;
    CostReport rep = evaluate_cost(v, problem, lambda, &traj);
    const detail::ConstraintScan scan = detail::scan_constraint(traj, constraints.sample_times);
    rep.constraint_min = scan.zmin;
    rep.constraint_min_time = scan.tmin;
    rep.constraint_species = scan.species;
    rep.penalty = penalty_beta(scan.zmin, constraints.m0(), penalty.eps);
    rep.total = rep.terminal_tumor_mass + rep.lambda_term + rep.penalty;
    if (out_trajectory) *out_trajectory = std::move(traj);
    return rep;
}

// Tangent fields along a base trajectory; entries may have either sign.
struct SensitivityState {
    std::vector<double> N, T, I, U;
};

struct SensitivityResult {
    std::vector<double> times;
    std::vector<std::array<double, 4>> mass_hat; // tangent masses per time level
    double d_terminal_tumor_mass = 0.0;
};

// Integrates the linearization of the state system along `base` for the
// control perturbation `dv`: same IMEX scheme and face coefficients as the
// base run (frozen at the base states), reaction Jacobians along the base
// trajectory, zero initial data, no clipping. The drug boundary tangent is
// dv H(N - a0_gate) + v H'(N - a0_gate) N_hat. For state-independent
// diffusion coefficients this is the exact derivative of the discrete step
// map; otherwise the face-coefficient tangent is dropped (first-order
// consistent).
inline SensitivityResult sensitivity_solve(const InjectionSchedule& v, const ControlDirection& dv,
                                           const Trajectory& base, const ControlProblem& problem) {
    v.validate();
    detail::check_horizon(v, problem);
    if (base.snapshots.size() != base.steps.size())
        throw evaluation_error("sensitivity: base trajectory must store a snapshot at every step");
    const std::size_t n = problem.grid.n;
    const double h = problem.grid.h;
    const double dt = problem.dt;
    if (!base.snapshots.empty() && base.snapshots.front().cells() != n)
        throw evaluation_error("sensitivity: base trajectory does not match the grid");
    for (std::size_t k = 1; k < base.steps.size(); ++k) {
        const double expected = static_cast<double>(k) * dt;
        if (std::abs(base.steps[k].t - expected) > 1e-12 * std::max(1.0, expected))
            throw evaluation_error("sensitivity: base trajectory dt differs from the problem dt");
    }

    SensitivityState hat{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                         std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    SensitivityResult res;
    res.times.push_back(0.0);
    res.mass_hat.push_back({0.0, 0.0, 0.0, 0.0});

    const DiffusionFn* dfn[4] = {&problem.params.d1, &problem.params.d2, &problem.params.d3,
                                 &problem.params.d4};
    const double r = dt / (h * h);
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    std::array<std::vector<double>, 4> forced;
    for (auto& f : forced) f.resize(n);

    const std::size_t n_steps = base.steps.size() - 1;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const StateVector& Z = base.snapshots[k];

        for (std::size_t i = 0; i < n; ++i) {
            const ReactionJacobian J =
                eval_reaction_jacobian(Z.N[i], Z.T[i], Z.I[i], Z.U[i], problem.params, i, t);
            const double hn = hat.N[i], ht = hat.T[i], hi = hat.I[i], hu = hat.U[i];
            forced[0][i] = J[0][0] * hn + J[0][1] * ht + J[0][2] * hi + J[0][3] * hu;
            forced[1][i] = J[1][0] * hn + J[1][1] * ht + J[1][2] * hi + J[1][3] * hu;
            forced[2][i] = J[2][0] * hn + J[2][1] * ht + J[2][2] * hi + J[2][3] * hu;
            forced[3][i] = J[3][0] * hn + J[3][1] * ht + J[3][2] * hi + J[3][3] * hu;
        }

        const double delta = problem.params.delta;
        const double gate = problem.params.a0_gate;
        const double flux_l = dv.at(v.knots, t, 0) * heaviside_smooth(Z.N.front() - gate, delta) +
                              v(t, 0) * heaviside_derivative(Z.N.front() - gate, delta) * hat.N.front();
        const double flux_r = dv.at(v.knots, t, 1) * heaviside_smooth(Z.N.back() - gate, delta) +
                              v(t, 1) * heaviside_derivative(Z.N.back() - gate, delta) * hat.N.back();
        forced[3].front() += flux_l / h;
        forced[3].back() += flux_r / h;

        std::vector<double>* fields[4] = {&hat.N, &hat.T, &hat.I, &hat.U};
        for (int sp = 0; sp < 4; ++sp) {
            const FaceCoefficients faces =
                face_diffusion(Z.field(sp), *dfn[sp], problem.grid, t, problem.params.delta0);
            std::vector<double>& f = *fields[sp];
            for (std::size_t i = 0; i < n; ++i) {
                const double dw = (i > 0) ? faces.face[i - 1] : 0.0;
                const double de = (i + 1 < n) ? faces.face[i] : 0.0;
                lower[i] = -r * dw;
                upper[i] = -r * de;
                diag[i] = 1.0 + r * (dw + de);
                rhs[i] = f[i] + dt * forced[sp][i];
            }
            f = tridiagonal_solve(lower, diag, upper, rhs);
        }

        std::array<double, 4> m{};
        for (int sp = 0; sp < 4; ++sp) {
            double acc = 0.0;
            for (double x : *fields[sp]) acc += x;
            m[sp] = acc * h;
        }
        res.times.push_back(static_cast<double>(k + 1) * dt);
        res.mass_hat.push_back(m);
    }
    res.d_terminal_tumor_mass = res.mass_hat.back()[1];
    return res;
}

enum class GradientMethod { sensitivity, finite_difference };

using ControlGradient = std::array<std::vector<double>, 2>;

// Componentwise clamp onto the admissible box [0, cap].
inline InjectionSchedule project(InjectionSchedule v) {
    for (auto& vals : v.values)
        for (double& x : vals) x = std::clamp(x, 0.0, v.cap);
    return v;
}

// Gradient of the penalized cost with respect to the schedule coefficients.
// The sensitivity method runs one tangent solve per coefficient and adds
// the lambda subgradient on the earliest maximal coefficient (knot-major
// order, left patch before right) plus the penalty chain rule at the
// earliest constraint-minimizing sample time, through whichever species
// achieves the inner min there. The finite-difference method uses central
// differences of the penalized cost with step 1e-4 cap, one-sided at the
// box faces.
inline ControlGradient gradient(const InjectionSchedule& v, const ControlProblem& problem,
                                double lambda, const PenaltyConfig& penalty,
                                const ConstraintSpec& constraints,
                                GradientMethod method = GradientMethod::sensitivity) {
    const std::size_t m = v.intervals();
    ControlGradient g{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};

    if (method == GradientMethod::finite_difference) {
        const double step = 1e-4 * v.cap;
        for (int p = 0; p < 2; ++p) {
            for (std::size_t j = 0; j < m; ++j) {
                const double x = v.values[static_cast<std::size_t>(p)][j];
                const double hi = std::min(x + step, v.cap);
                const double lo = std::max(x - step, 0.0);
                InjectionSchedule vh = v, vl = v;
                vh.values[static_cast<std::size_t>(p)][j] = hi;
                vl.values[static_cast<std::size_t>(p)][j] = lo;
                const double fh = penalized_cost(vh, problem, lambda, penalty, constraints).total;
                const double fl = penalized_cost(vl, problem, lambda, penalty, constraints).total;
                g[static_cast<std::size_t>(p)][j] = (fh - fl) / (hi - lo);
            }
        }
        return g;
    }

    Trajectory base;
    penalized_cost(v, problem, lambda, penalty, constraints, &base);
    const detail::ConstraintScan scan = detail::scan_constraint(base, constraints.sample_times);
    const double bprime = penalty_beta_derivative(scan.zmin, constraints.m0(), penalty.eps);

    for (int p = 0; p < 2; ++p) {
        for (std::size_t j = 0; j < m; ++j) {
            const ControlDirection e = ControlDirection::coordinate(v, p, j);
            const SensitivityResult r = sensitivity_solve(v, e, base, problem);
            double gi = r.d_terminal_tumor_mass;
            if (bprime != 0.0) gi += bprime * r.mass_hat[scan.step_index][scan.species];
            g[static_cast<std::size_t>(p)][j] = gi;
        }
    }

    if (lambda > 0.0) {
        const double vmax = v.max_coefficient();
        bool placed = false;
        for (std::size_t j = 0; j < m && !placed; ++j) {
            for (int p = 0; p < 2 && !placed; ++p) {
                if (v.values[static_cast<std::size_t>(p)][j] == vmax) {
                    g[static_cast<std::size_t>(p)][j] += lambda;
                    placed = true;
                }
            }
        }
    }
    return g;
}

struct OptimizeOptions {
    int max_iter = 25;
    double step0 = 1.0;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    double rel_tol = 1e-6;
    int max_backtracks = 40;
    GradientMethod method = GradientMethod::sensitivity;

    void validate() const {
        if (max_iter < 0) throw model_error("optimizer: max_iter must be >= 0");
        if (!(step0 > 0.0)) throw model_error("optimizer: step0 must be positive");
        if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw model_error("optimizer: armijo_c in (0,1)");
        if (!(backtrack > 0.0 && backtrack < 1.0)) throw model_error("optimizer: backtrack in (0,1)");
        if (!(rel_tol >= 0.0)) throw model_error("optimizer: rel_tol must be >= 0");
        if (max_backtracks < 1) throw model_error("optimizer: max_backtracks must be >= 1");
    }
};

enum class TerminationReason { converged, max_iterations, zero_gradient, line_search_failure };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::converged: return "converged";
        case TerminationReason::max_iterations: return "max-iterations";
        case TerminationReason::zero_gradient: return "zero-gradient";
        default: return "line-search-failure";
    }
}

struct HistoryEntry {
    int iter = 0;
    CostReport report;
    double step_size = 0.0;
    bool feasible = false;
};

struct OptimizeResult {
    InjectionSchedule best;
    std::vector<HistoryEntry> history;
    TerminationReason reason = TerminationReason::max_iterations;
};

// Projected gradient descent with Armijo backtracking on the penalized
// cost. Every iterate stays in the admissible box; accepted costs are
// nonincreasing by construction. The step doubles after each accepted
// iterate and shrinks by `backtrack` inside the line search. A failed line
// search returns the best iterate so far with the corresponding flag.
inline OptimizeResult optimize(const InjectionSchedule& v0, const ControlProblem& problem,
                               double lambda, const PenaltyConfig& penalty,
                               const ConstraintSpec& constraints, const OptimizeOptions& opt = {}) {
    opt.validate();
    penalty.validate();
    constraints.validate(mass(problem.initial.N, problem.grid), mass(problem.initial.I, problem.grid));

    OptimizeResult out;
    InjectionSchedule v = project(v0);
    v.validate();
    detail::check_horizon(v, problem);

    CostReport rep = penalized_cost(v, problem, lambda, penalty, constraints);
    const double m0 = constraints.m0();
    out.history.push_back({0, rep, 0.0, rep.constraint_min >= m0});

    double step = opt.step0;
    out.reason = TerminationReason::max_iterations;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        const ControlGradient g = gradient(v, problem, lambda, penalty, constraints, opt.method);
        double gmax = 0.0;
        for (const auto& row : g)
            for (double x : row) gmax = std::max(gmax, std::abs(x));
        if (gmax == 0.0) {
            out.reason = TerminationReason::zero_gradient;
            break;
        }

        bool accepted = false;
        InjectionSchedule trial = v;
        CostReport trial_rep;
        bool stationary = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            trial = v;
            for (int p = 0; p < 2; ++p)
                for (std::size_t j = 0; j < v.intervals(); ++j)
                    trial.values[static_cast<std::size_t>(p)][j] -=
                        step * g[static_cast<std::size_t>(p)][j];
            trial = project(std::move(trial));

            double predicted = 0.0;
            for (int p = 0; p < 2; ++p)
                for (std::size_t j = 0; j < v.intervals(); ++j)
                    predicted += g[static_cast<std::size_t>(p)][j] *
                                 (v.values[static_cast<std::size_t>(p)][j] -
                                  trial.values[static_cast<std::size_t>(p)][j]);
            if (predicted == 0.0) {
                // The projection swallowed the whole step: v is stationary
                // for the box problem along this gradient.
                stationary = true;
                break;
            }

            // Armijo condition: f(trial) <= f(v) - c * <g, v - trial>.
            trial_rep = penalized_cost(trial, problem, lambda, penalty, constraints);
            if (trial_rep.total <= rep.total - opt.armijo_c * predicted) {
                accepted = true;
                break;
            }
            step *= opt.backtrack;
        }
        if (stationary) {
            out.reason = TerminationReason::converged;
            break;
        }
        if (!accepted) {
            out.reason = TerminationReason::line_search_failure;
            break;
        }

        const double rel_change =
            std::abs(rep.total - trial_rep.total) / std::max(std::abs(rep.total), 1e-30);
        v = trial;
        rep = trial_rep;
        out.history.push_back({iter, rep, step, rep.constraint_min >= m0});
        step *= 2.0;
        if (rel_change < opt.rel_tol) {
            out.reason = TerminationReason::converged;
            break;
        }
    }

    out.best = v;
    return out;
}

} // namespace chemrd
