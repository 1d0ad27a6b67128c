#include <catch2/catch_amalgamated.hpp>

#include <chemrd/diagnostics.hpp>
#include <chemrd/grid.hpp>
#include <chemrd/parameters.hpp>
#include <chemrd/state.hpp>
#include <chemrd/stepper.hpp>

#include "ode_reference.hpp"

#include <cmath>
#include <random>
#include <vector>

using chemrd::BoundaryControl;
using chemrd::desk_defaults;
using chemrd::Grid1D;
using chemrd::ModelParameters;
using chemrd::Scheme;
using chemrd::simulate;
using chemrd::StabilityReport;
using chemrd::stability_report;
using chemrd::StateVector;
using chemrd::StepperConfig;
using chemrd::Trajectory;

namespace {

ModelParameters sourceless_desk() {
    ModelParameters p = desk_defaults();
    p.s = chemrd::Schedule::constant(0.0);
    return p;
}

StepperConfig stepper(double dt, double t_end, Scheme scheme = Scheme::imex_be,
                      std::size_t stride = 1) {
    StepperConfig c;
    c.dt = dt;
    c.t_end = t_end;
    c.scheme = scheme;
    c.snapshot_stride = stride;
    return c;
}

// Largest relative deviation of the (uniform) PDE state from the reference
// point, measured in the vector sup norm.
double uniform_state_error(const StateVector& z, const oracle::Vec4& ref) {
    double num = 0.0, den = 0.0;
    for (int sp = 0; sp < 4; ++sp) {
        for (double v : z.field(sp)) num = std::max(num, std::abs(v - ref[static_cast<std::size_t>(sp)]));
        den = std::max(den, std::abs(ref[static_cast<std::size_t>(sp)]));
    }
    return num / den;
}

} // namespace

TEST_CASE("a spatial rest point stays put") {
    const ModelParameters p = sourceless_desk();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 1.0, 0.0, 0.0, 0.0);
    const Trajectory traj = simulate(z0, p, g, stepper(0.01, 0.1));
    const StateVector& zf = traj.final_state();
    for (double v : zf.N) CHECK(std::abs(v - 1.0) <= 1e-13);
    for (double v : zf.T) CHECK(v == 0.0);
    for (double v : zf.I) CHECK(v == 0.0);
    for (double v : zf.U) CHECK(v == 0.0);
}

TEST_CASE("explicit scheme reproduces one Euler step of the drug decay") {
    const ModelParameters p = sourceless_desk();
    const Grid1D g(1.0, 4);
    const StateVector z0 = StateVector::uniform(g.n, 0.0, 0.0, 0.0, 1.0);
    const Trajectory traj = simulate(z0, p, g, stepper(0.1, 0.1, Scheme::explicit_euler));
    REQUIRE(traj.steps.size() == 2);
    for (double v : traj.final_state().U) CHECK(std::abs(v - 0.9) <= 1e-15);
}

TEST_CASE("zero horizon records the initial data only") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    const Trajectory traj = simulate(z0, p, g, stepper(1e-3, 0.0));
    CHECK(traj.steps.size() == 1);
    CHECK(traj.snapshots.size() == 1);
    CHECK(traj.steps[0].t == 0.0);
    CHECK(traj.steps[0].mass[0] == Catch::Approx(0.9).margin(1e-14));
}

TEST_CASE("snapshot stride keeps every stride-th level plus the final one") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    const Trajectory traj = simulate(z0, p, g, stepper(1e-3, 0.1, Scheme::imex_be, 30));
    // Levels 0, 30, 60, 90 and the final level 100.
    REQUIRE(traj.snapshot_times.size() == 5);
    CHECK(traj.snapshot_times[1] == Catch::Approx(0.03).margin(1e-15));
    CHECK(traj.snapshot_times.back() == Catch::Approx(0.1).margin(1e-15));
    CHECK(traj.steps.size() == 101);
}

TEST_CASE("identical runs produce identical trajectories") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 16);
    StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    z0.T[7] = 0.6; // break symmetry
    const BoundaryControl v{[](double) { return 0.3; }, [](double) { return 0.1; }};
    const Trajectory a = simulate(z0, p, g, stepper(1e-3, 0.2), v);
    const Trajectory b = simulate(z0, p, g, stepper(1e-3, 0.2), v);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        for (int sp = 0; sp < 4; ++sp) {
            CHECK(a.steps[k].mass[sp] == b.steps[k].mass[sp]);
            CHECK(a.steps[k].sup[sp] == b.steps[k].sup[sp]);
        }
    }
    for (int sp = 0; sp < 4; ++sp)
        for (std::size_t i = 0; i < g.n; ++i)
            CHECK(a.final_state().field(sp)[i] == b.final_state().field(sp)[i]);
}

TEST_CASE("uniform data track the space-free reference") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    const Trajectory traj = simulate(z0, p, g, stepper(1e-3, 1.0));
    const oracle::Vec4 ref = oracle::integrate({0.9, 0.25, 0.25, 0.0}, 0.0, 1.0, oracle::Params{});
    CHECK(uniform_state_error(traj.final_state(), ref) <= 1e-3);
}

TEST_CASE("halving dt halves the error") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    const oracle::Vec4 ref = oracle::integrate({0.9, 0.25, 0.25, 0.0}, 0.0, 1.0, oracle::Params{});
    double errs[3];
    const double dts[3] = {4e-3, 2e-3, 1e-3};
    for (int k = 0; k < 3; ++k) {
        const Trajectory traj = simulate(z0, p, g, stepper(dts[k], 1.0));
        errs[k] = uniform_state_error(traj.final_state(), ref);
    }
    const double ratio1 = errs[0] / errs[1];
    const double ratio2 = errs[1] / errs[2];
    CHECK(ratio1 >= 1.8);
    CHECK(ratio1 <= 2.2);
    CHECK(ratio2 >= 1.8);
    CHECK(ratio2 <= 2.2);
}

TEST_CASE("states stay nonnegative under injection") {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> init(0.0, 1.2);
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 12);
    for (int trial = 0; trial < 5; ++trial) {
        StateVector z0 = StateVector::zeros(g.n);
        for (int sp = 0; sp < 4; ++sp)
            for (double& v : z0.field(sp)) v = init(rng);
        const BoundaryControl v{[](double) { return 0.5; }, [](double) { return 0.5; }};
        const Trajectory traj = simulate(z0, p, g, stepper(1e-3, 0.3, Scheme::imex_be, 50), v);
        for (const StateVector& z : traj.snapshots) z.validate(); // throws on negatives
        for (const auto& d : traj.steps)
            for (int sp = 0; sp < 4; ++sp) CHECK(d.clipped[sp] <= 1e-10);
    }
}

TEST_CASE("per-step drug balance holds with injection and decay") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 16);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.1);
    const BoundaryControl v{[](double t) { return 0.5 * std::exp(-t); }, [](double) { return 0.25; }};
    const Trajectory traj = simulate(z0, p, g, stepper(1e-3, 0.5), v);
    for (double r : chemrd::drug_balance_residual(traj)) CHECK(r <= 1e-10);
}

TEST_CASE("clipping records the removed mass") {
    // One explicit step with dt so large the drug overshoots to -1 in every
    // cell: the recorded clipped mass is the whole initial drug mass.
    const ModelParameters p = sourceless_desk();
    const Grid1D g(1.0, 4);
    const StateVector z0 = StateVector::uniform(g.n, 0.0, 0.0, 0.0, 1.0);
    const Trajectory traj = simulate(z0, p, g, stepper(2.0, 2.0, Scheme::explicit_euler));
    REQUIRE(traj.steps.size() == 2);
    CHECK(traj.steps[1].clipped[3] == Catch::Approx(1.0).margin(1e-14));
    for (double v : traj.final_state().U) CHECK(v == 0.0);

    // With a tolerance above the excursion the state is still clipped but
    // the bookkeeping treats it as round-off.
    StepperConfig cfg = stepper(2.0, 2.0, Scheme::explicit_euler);
    cfg.clip_tolerance = 2.0;
    const Trajectory quiet = simulate(z0, p, g, cfg);
    CHECK(quiet.steps[1].clipped[3] == 0.0);
    for (double v : quiet.final_state().U) CHECK(v == 0.0);
}

TEST_CASE("blow-up guard aborts the run") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector z0 = StateVector::uniform(g.n, 0.9, 0.25, 0.25, 0.0);
    StepperConfig cfg = stepper(1e-3, 1.0);
    cfg.blowup_guard = 0.5;
    CHECK_THROWS_WITH(simulate(z0, p, g, cfg), Catch::Matchers::ContainsSubstring("blow-up"));
}

TEST_CASE("stepper configuration is validated") {
    StepperConfig cfg;
    cfg.dt = 0.0;
    CHECK_THROWS_AS(cfg.validate(), chemrd::model_error);
    cfg = StepperConfig{};
    cfg.t_end = -1.0;
    CHECK_THROWS_AS(cfg.validate(), chemrd::model_error);
    cfg = StepperConfig{};
    cfg.snapshot_stride = 0;
    CHECK_THROWS_AS(cfg.validate(), chemrd::model_error);

    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 8);
    const StateVector wrong = StateVector::uniform(4, 0.9, 0.25, 0.25, 0.0);
    CHECK_THROWS_AS(simulate(wrong, p, g, StepperConfig{}), chemrd::model_error);
}

TEST_CASE("stability advisory") {
    const ModelParameters p = desk_defaults();
    const Grid1D g(1.0, 64);
    SECTION("desk rates give an estimate of 4") {
        const StabilityReport rep = stability_report(p, g, 1e-4);
        CHECK(rep.reaction_rate_estimate == Catch::Approx(4.0).margin(1e-12));
        CHECK_FALSE(rep.reaction_warning);
        CHECK(rep.explicit_diffusion_limit ==
              Catch::Approx((g.h * g.h) / (2.0 * 0.05)).margin(1e-15));
        CHECK_FALSE(rep.explicit_diffusion_warning);
    }
    SECTION("a huge dt trips both warnings") {
        const StabilityReport rep = stability_report(p, g, 10.0);
        CHECK(rep.reaction_product == Catch::Approx(40.0).margin(1e-10));
        CHECK(rep.reaction_warning);
        CHECK(rep.explicit_diffusion_warning);
    }
}
