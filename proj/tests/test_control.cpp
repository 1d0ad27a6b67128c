#include <catch2/catch_amalgamated.hpp>

#include <chemrd/control.hpp>
#include <chemrd/diagnostics.hpp>
#include <chemrd/grid.hpp>
#include <chemrd/parameters.hpp>
#include <chemrd/state.hpp>

#include "desk.hpp"

#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

using chemrd::ConstraintSpec;
using chemrd::ControlDirection;
using chemrd::ControlProblem;
using chemrd::CostReport;
using chemrd::evaluate_cost;
using chemrd::gradient;
using chemrd::GradientMethod;
using chemrd::InjectionSchedule;
using chemrd::optimize;
using chemrd::OptimizeOptions;
using chemrd::OptimizeResult;
using chemrd::penalized_cost;
using chemrd::penalty_beta;
using chemrd::penalty_beta_derivative;
using chemrd::PenaltyConfig;
using chemrd::project;
using chemrd::sensitivity_solve;
using chemrd::SensitivityResult;
using chemrd::TerminationReason;
using chemrd::Trajectory;

TEST_CASE("injection schedule admissibility") {
    InjectionSchedule v = desk::schedule();
    CHECK_NOTHROW(v.validate());

    SECTION("first knot must be zero") {
        v.knots[0] = 0.5;
        CHECK_THROWS_AS(v.validate(), chemrd::admissibility_error);
    }
    SECTION("knots must increase") {
        v.knots[2] = v.knots[1];
        CHECK_THROWS_AS(v.validate(), chemrd::admissibility_error);
    }
    SECTION("coefficients live in the box") {
        v.values[0][1] = -0.1;
        CHECK_THROWS_AS(v.validate(), chemrd::admissibility_error);
        v.values[0][1] = v.cap + 0.1;
        CHECK_THROWS_AS(v.validate(), chemrd::admissibility_error);
    }
    SECTION("one coefficient per interval per patch") {
        v.values[1].pop_back();
        CHECK_THROWS_AS(v.validate(), chemrd::admissibility_error);
    }
}

TEST_CASE("injection schedule evaluates half-open intervals") {
    InjectionSchedule v = desk::schedule();
    v.values[0] = {0.1, 0.2, 0.3, 0.4};
    v.values[1] = {1.0, 1.1, 1.2, 1.3};
    CHECK(v(0.0, 0) == 0.1);
    CHECK(v(1.2499, 0) == 0.1);
    CHECK(v(1.25, 0) == 0.2); // value switches exactly at the knot
    CHECK(v(3.75, 0) == 0.4);
    CHECK(v(5.0, 0) == 0.4); // horizon end holds the last interval value
    CHECK(v(2.5, 1) == 1.2);
    CHECK(v.max_coefficient() == 1.3);
}

TEST_CASE("projection clamps onto the box") {
    InjectionSchedule v = desk::schedule();
    v.values[0] = {-0.3, 0.5, 2.5, 1.0};
    v.values[1] = {0.0, 2.0, -1.0, 3.0};
    const InjectionSchedule q = project(v);
    CHECK(q.values[0][0] == 0.0);
    CHECK(q.values[0][1] == 0.5);
    CHECK(q.values[0][2] == 2.0);
    CHECK(q.values[1][3] == 2.0);
    CHECK_NOTHROW(q.validate());
}

TEST_CASE("penalty hinge values and derivative") {
    const double m0 = 0.2, eps = 0.05;
    CHECK(penalty_beta(m0, m0, eps) == Catch::Approx(1.0 / eps).margin(1e-12));
    CHECK(penalty_beta(m0 + eps, m0, eps) == 0.0);
    CHECK(penalty_beta(m0 + 2.0 * eps, m0, eps) == 0.0);
    CHECK(penalty_beta(m0 + eps / 2.0, m0, eps) == Catch::Approx(1.0 / (4.0 * eps)).margin(1e-12));
    CHECK(penalty_beta_derivative(m0 + 2.0 * eps, m0, eps) == 0.0);

    // Central differences where the hinge is smooth.
    const double h = 1e-7;
    for (double z : {m0 - 0.03, m0 + 0.01, m0 + 0.04}) {
        const double fd = (penalty_beta(z + h, m0, eps) - penalty_beta(z - h, m0, eps)) / (2.0 * h);
        CHECK(penalty_beta_derivative(z, m0, eps) == Catch::Approx(fd).epsilon(1e-6));
    }
    CHECK_THROWS_AS(penalty_beta(0.1, m0, 0.0), chemrd::model_error);
}

TEST_CASE("shrinking eps sharpens the penalty on infeasible points") {
    const double m0 = 0.2;
    const double z = m0 - 0.01;
    CHECK(penalty_beta(z, m0, 0.005) > penalty_beta(z, m0, 0.05));
    CHECK(penalty_beta(z, m0, 0.0005) > penalty_beta(z, m0, 0.005));
}

TEST_CASE("plain cost: lambda scaling and the no-drug baseline") {
    const ControlProblem prob = desk::problem(12, 5e-3);
    SECTION("zero schedule pays no lambda term") {
        const InjectionSchedule v0 = desk::schedule(0.0);
        Trajectory traj;
        const CostReport rep = evaluate_cost(v0, prob, 1.0, &traj);
        CHECK(rep.lambda_term == 0.0);
        CHECK(rep.penalty == 0.0);
        CHECK(rep.total == rep.terminal_tumor_mass);
        CHECK(traj.steps.size() == 1001);
        CHECK(rep.terminal_tumor_mass == traj.steps.back().mass[1]);
    }
    SECTION("doubling lambda doubles only the lambda term") {
        const InjectionSchedule v = desk::schedule(0.5);
        const CostReport a = evaluate_cost(v, prob, 0.01);
        const CostReport b = evaluate_cost(v, prob, 0.02);
        CHECK(a.terminal_tumor_mass == b.terminal_tumor_mass);
        CHECK(b.lambda_term == Catch::Approx(2.0 * a.lambda_term).margin(1e-15));
        CHECK(a.lambda_term == Catch::Approx(0.01 * 0.5).margin(1e-15));
    }
    SECTION("repeated evaluation is bitwise deterministic") {
        const InjectionSchedule v = desk::schedule(0.5);
        const CostReport a = evaluate_cost(v, prob, 0.01);
        const CostReport b = evaluate_cost(v, prob, 0.01);
        CHECK(a.total == b.total);
        CHECK(a.constraint_min == b.constraint_min);
    }
    SECTION("the schedule horizon must match the problem") {
        InjectionSchedule v = desk::schedule();
        v.knots.back() = 4.0;
        CHECK_THROWS_AS(evaluate_cost(v, prob, 0.0), chemrd::admissibility_error);
    }
    SECTION("negative lambda is rejected") {
        CHECK_THROWS_AS(evaluate_cost(desk::schedule(), prob, -1.0), chemrd::evaluation_error);
    }
}

TEST_CASE("penalized cost activates exactly on the hinge") {
    const ControlProblem prob = desk::problem(12, 5e-3);
    const InjectionSchedule v = desk::schedule(0.25);
    SECTION("desk floors leave the penalty off") {
        const CostReport rep =
            penalized_cost(v, prob, 0.01, PenaltyConfig{}, desk::constraints());
        CHECK(rep.constraint_min >= 0.2);
        CHECK(rep.penalty <= 1e-8);
    }
    SECTION("a wide hinge activates and matches the scalar formula") {
        PenaltyConfig pen;
        pen.eps = 0.2; // m0 + eps = 0.4 sits above the immune mass scale
        const CostReport rep = penalized_cost(v, prob, 0.01, pen, desk::constraints());
        CHECK(rep.penalty > 0.0);
        CHECK(rep.penalty ==
              Catch::Approx(penalty_beta(rep.constraint_min, desk::constraints().m0(), pen.eps))
                  .margin(1e-14));
        CHECK(rep.total ==
              Catch::Approx(rep.terminal_tumor_mass + rep.lambda_term + rep.penalty).margin(1e-14));
    }
}

TEST_CASE("sensitivity of the zero direction is zero") {
    const ControlProblem prob = desk::problem(12, 5e-3);
    const InjectionSchedule v = desk::schedule(0.25);
    Trajectory base;
    evaluate_cost(v, prob, 0.0, &base);
    const SensitivityResult r =
        sensitivity_solve(v, ControlDirection::zeros_like(v), base, prob);
    CHECK(r.d_terminal_tumor_mass == 0.0);
    for (const auto& m : r.mass_hat)
        for (double x : m) CHECK(x == 0.0);
}

TEST_CASE("sensitivity is linear in the direction") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    const InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);
    Trajectory base;
    evaluate_cost(v, prob, 0.0, &base);

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    ControlDirection d1 = ControlDirection::zeros_like(v);
    ControlDirection d2 = ControlDirection::zeros_like(v);
    for (int p = 0; p < 2; ++p)
        for (std::size_t j = 0; j < v.intervals(); ++j) {
            d1.values[static_cast<std::size_t>(p)][j] = dist(rng);
            d2.values[static_cast<std::size_t>(p)][j] = dist(rng);
        }
    const double a = 0.7;
    ControlDirection combo = ControlDirection::zeros_like(v);
    for (int p = 0; p < 2; ++p)
        for (std::size_t j = 0; j < v.intervals(); ++j)
            combo.values[static_cast<std::size_t>(p)][j] =
                a * d1.values[static_cast<std::size_t>(p)][j] +
                d2.values[static_cast<std::size_t>(p)][j];

    const SensitivityResult r1 = sensitivity_solve(v, d1, base, prob);
    const SensitivityResult r2 = sensitivity_solve(v, d2, base, prob);
    const SensitivityResult rc = sensitivity_solve(v, combo, base, prob);
    REQUIRE(rc.mass_hat.size() == r1.mass_hat.size());
    double scale = 0.0;
    for (const auto& m : rc.mass_hat)
        for (double x : m) scale = std::max(scale, std::abs(x));
    for (std::size_t k = 0; k < rc.mass_hat.size(); ++k)
        for (int sp = 0; sp < 4; ++sp) {
            const double lin = a * r1.mass_hat[k][static_cast<std::size_t>(sp)] +
                               r2.mass_hat[k][static_cast<std::size_t>(sp)];
            CHECK(std::abs(rc.mass_hat[k][static_cast<std::size_t>(sp)] - lin) <=
                  1e-10 * std::max(scale, 1e-12));
        }
}

TEST_CASE("sensitivity matches central differences of the plain cost") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    const InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);
    Trajectory base;
    evaluate_cost(v, prob, 0.0, &base);

    const double h = 1e-4;
    const std::pair<int, std::size_t> coords[] = {{0, 0}, {1, 2}};
    for (const auto& [patch, interval] : coords) {
        const ControlDirection e = ControlDirection::coordinate(v, patch, interval);
        const SensitivityResult r = sensitivity_solve(v, e, base, prob);
        InjectionSchedule vp = v, vm = v;
        vp.values[static_cast<std::size_t>(patch)][interval] += h;
        vm.values[static_cast<std::size_t>(patch)][interval] -= h;
        const double fd = (evaluate_cost(vp, prob, 0.0).total -
                           evaluate_cost(vm, prob, 0.0).total) /
                          (2.0 * h);
        CHECK(std::abs(r.d_terminal_tumor_mass - fd) <=
              1e-3 * std::max(std::abs(fd), 1e-10));
    }
}

TEST_CASE("sensitivity requires a dense matching base trajectory") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    const InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);
    chemrd::StepperConfig sparse = prob.stepper();
    sparse.snapshot_stride = 10;
    const Trajectory base = simulate(prob.initial, prob.params, prob.grid, sparse,
                                     v.boundary_control());
    CHECK_THROWS_AS(sensitivity_solve(v, ControlDirection::zeros_like(v), base, prob),
                    chemrd::evaluation_error);
}

TEST_CASE("lambda enters the gradient on the earliest maximal coefficient") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    const PenaltyConfig pen;
    const ConstraintSpec cons = desk::constraints();
    InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);

    SECTION("unique maximum") {
        v.values[0] = {0.5, 0.4, 0.3, 0.2};
        v.values[1] = {0.45, 0.35, 0.25, 0.15};
        const auto g0 = gradient(v, prob, 0.01, pen, cons);
        const auto g1 = gradient(v, prob, 0.02, pen, cons);
        CHECK(g1[0][0] - g0[0][0] == Catch::Approx(0.01).margin(1e-14));
        for (int p = 0; p < 2; ++p)
            for (std::size_t j = 0; j < v.intervals(); ++j)
                if (!(p == 0 && j == 0)) CHECK(g1[static_cast<std::size_t>(p)][j] ==
                                               g0[static_cast<std::size_t>(p)][j]);
    }
    SECTION("ties resolve knot-major, left patch first") {
        const auto g0 = gradient(v, prob, 0.0, pen, cons);
        const auto g1 = gradient(v, prob, 0.05, pen, cons);
        CHECK(g1[0][0] - g0[0][0] == Catch::Approx(0.05).margin(1e-14));
        CHECK(g1[1][0] == g0[1][0]);
        CHECK(g1[0][1] == g0[0][1]);
    }
}

TEST_CASE("sensitivity gradient agrees with finite differences of the penalized cost") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    PenaltyConfig pen;
    pen.eps = 0.2; // keeps the hinge active so the chain rule is exercised
    const ConstraintSpec cons = desk::constraints();
    InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);
    v.values[0] = {0.8, 0.6, 0.4, 0.2}; // distinct, so the max stays put under FD steps
    v.values[1] = {0.7, 0.5, 0.3, 0.1};
    const double lambda = 0.01;

    const auto gs = gradient(v, prob, lambda, pen, cons, GradientMethod::sensitivity);
    const auto gf = gradient(v, prob, lambda, pen, cons, GradientMethod::finite_difference);
    for (int p = 0; p < 2; ++p)
        for (std::size_t j = 0; j < v.intervals(); ++j) {
            const double a = gs[static_cast<std::size_t>(p)][j];
            const double b = gf[static_cast<std::size_t>(p)][j];
            CHECK(std::abs(a - b) <= 2e-3 * std::max({std::abs(a), std::abs(b), 1e-8}));
        }
}

TEST_CASE("a closed gate makes the control gradient vanish") {
    // Normal cells start and stay below the gate, so no drug ever enters and
    // the cost cannot depend on the schedule.
    ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    prob.initial = chemrd::StateVector::uniform(prob.grid.n, 0.02, 0.25, 0.25, 0.0);
    prob.params.r1 = chemrd::Schedule::constant(1e-6);
    ConstraintSpec cons;
    cons.a0_mass = 0.01;
    cons.b0_mass = 0.10;
    const InjectionSchedule v = desk::schedule(0.3, 2.0, 2.5);

    const auto g = gradient(v, prob, 0.0, PenaltyConfig{}, cons);
    for (const auto& row : g)
        for (double x : row) CHECK(x == 0.0);

    OptimizeOptions opt;
    opt.max_iter = 5;
    const OptimizeResult res = optimize(v, prob, 0.0, PenaltyConfig{}, cons, opt);
    CHECK(res.reason == TerminationReason::zero_gradient);
    CHECK(res.history.size() == 1);
    CHECK(res.best.values[0] == v.values[0]);
}

TEST_CASE("optimizer with zero iteration budget returns the start") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    const InjectionSchedule v = desk::schedule(0.25, 2.0, 2.5);
    OptimizeOptions opt;
    opt.max_iter = 0;
    const OptimizeResult res =
        optimize(v, prob, 0.01, PenaltyConfig{}, desk::constraints(), opt);
    CHECK(res.history.size() == 1);
    CHECK(res.reason == TerminationReason::max_iterations);
    CHECK(res.best.values[0] == v.values[0]);
    CHECK(res.best.values[1] == v.values[1]);
}

TEST_CASE("short optimizer run descends inside the box") {
    const ControlProblem prob = desk::problem(16, 4e-3);
    const InjectionSchedule v0 = desk::schedule(0.25);
    OptimizeOptions opt;
    opt.max_iter = 5;
    const OptimizeResult res =
        optimize(v0, prob, 0.01, PenaltyConfig{}, desk::constraints(), opt);

    REQUIRE(res.history.size() >= 2); // at least one accepted iterate
    for (std::size_t k = 1; k < res.history.size(); ++k) {
        CHECK(res.history[k].report.total <= res.history[k - 1].report.total);
        CHECK(res.history[k].step_size > 0.0);
    }
    for (const auto& row : res.best.values)
        for (double x : row) {
            CHECK(x >= 0.0);
            CHECK(x <= res.best.cap);
        }
    CHECK_NOTHROW(res.best.validate());
    for (const auto& e : res.history) CHECK(e.feasible);
}

TEST_CASE("constraint floors must leave room below the initial masses") {
    const ControlProblem prob = desk::problem(10, 5e-3, 2.5);
    ConstraintSpec cons = desk::constraints();
    cons.b0_mass = 0.30; // initial immune mass is 0.25
    CHECK_THROWS_WITH(optimize(desk::schedule(0.25, 2.0, 2.5), prob, 0.01, PenaltyConfig{}, cons),
                      Catch::Matchers::ContainsSubstring("b0_mass"));
}

TEST_CASE("optimizer options are validated") {
    OptimizeOptions opt;
    opt.step0 = 0.0;
    CHECK_THROWS_AS(opt.validate(), chemrd::model_error);
    opt = OptimizeOptions{};
    opt.armijo_c = 1.5;
    CHECK_THROWS_AS(opt.validate(), chemrd::model_error);
    opt = OptimizeOptions{};
    opt.backtrack = 1.0;
    CHECK_THROWS_AS(opt.validate(), chemrd::model_error);
    opt = OptimizeOptions{};
    opt.max_backtracks = 0;
    CHECK_THROWS_AS(opt.validate(), chemrd::model_error);
}
