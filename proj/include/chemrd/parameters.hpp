#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "chemrd/errors.hpp"
#include "chemrd/schedule.hpp"

namespace chemrd {

// Diffusion coefficient as a function of (position, time, local concentration).
using DiffusionFn = std::function<double(double x, double t, double z)>;

inline DiffusionFn constant_diffusion(double d) {
    return [d](double, double, double) { return d; };
}

// Every coefficient of the four-species model. Growth rates, the immune
// source, and the drug consumption rate are time tables (optionally per
// cell); diffusion coefficients are callables bounded below by delta0.
struct ModelParameters {
    Schedule r1 = Schedule::constant(1.0); // normal-cell growth rate
    Schedule r2 = Schedule::constant(1.0); // tumor-cell growth rate
    Schedule r3 = Schedule::constant(1.0); // immune-cell growth rate
    double b1 = 1.0, b2 = 1.0, b3 = 1.0;   // inverse carrying capacities
    double c1 = 1.0;                       // tumor kill rate on immune cells
    double c2 = 1.0;                       // immune kill rate on tumor cells
    double c3 = 1.0;                       // normal-cell kill rate on tumor cells
    double c4 = 1.0;                       // tumor kill rate on normal cells
    double a1 = 1.0, a2 = 1.0, a3 = 1.0;   // drug kill amplitudes on I, T, N
    double k1 = 0.2;                       // immune natural death rate
    Schedule k2 = Schedule::constant(1.0); // drug consumption rate
    double alpha = 1.0;                    // immune recruitment half-saturation
    double rho = 0.5;                      // immune recruitment amplitude
    Schedule s = Schedule::constant(0.1);  // immune source
    double delta = 0.05;                   // gate smoothing width
    double a0_gate = 0.1;                  // normal-cell floor gating drug inflow
    double delta0 = 0.05;                  // uniform lower bound for the d_i
    double r_lower = 1e-6;                 // declared growth-rate bounds
    double r_upper = 10.0;
    double k2_floor = 1e-6;                // declared lower bound for k2
    DiffusionFn d1 = constant_diffusion(0.05);
    DiffusionFn d2 = constant_diffusion(0.05);
    DiffusionFn d3 = constant_diffusion(0.05);
    DiffusionFn d4 = constant_diffusion(0.05);

    // Re-checks growth-rate bounds at the point of use; the declared range
    // must hold at every evaluation, not just at the knots.
    double growth_rate(int which, double t, std::size_t cell) const {
        const Schedule& r = (which == 1) ? r1 : (which == 2) ? r2 : r3;
        const double v = r(t, cell);
        if (!(v >= r_lower && v <= r_upper))
            throw model_error("r" + std::to_string(which) +
                              ": growth rate leaves [r_lower, r_upper] at t=" + std::to_string(t));
        return v;
    }

    double consumption_rate(double t, std::size_t cell) const {
        const double v = k2(t, cell);
        if (!(v >= k2_floor))
            throw model_error("k2: consumption rate below its declared floor at t=" + std::to_string(t));
        return v;
    }

    double source(double t, std::size_t cell) const {
        const double v = s(t, cell);
        if (v < 0.0) throw model_error("s: immune source must be nonnegative");
        return v;
    }

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw model_error(std::string(name) + ": must be positive and finite");
        };
        auto capacity = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw model_error(std::string(name) + ": inverse carrying capacities must be positive");
        };
        capacity(b1, "b1");
        capacity(b2, "b2");
        capacity(b3, "b3");
        positive(c1, "c1");
        positive(c2, "c2");
        positive(c3, "c3");
        positive(c4, "c4");
        positive(a1, "a1");
        positive(a2, "a2");
        positive(a3, "a3");
        positive(k1, "k1");
        positive(alpha, "alpha");
        positive(rho, "rho");
        positive(delta, "delta");
        positive(delta0, "delta0");
        positive(r_lower, "r_lower");
        positive(k2_floor, "k2_floor");
        if (!(r_lower <= r_upper)) throw model_error("r_lower: must not exceed r_upper");
        if (!(a0_gate > 0.0 && a0_gate < 1.0 / b1))
            throw model_error("a0_gate: 0 < a0_gate < 1/b1 violated");
        r1.validate("r1");
        r2.validate("r2");
        r3.validate("r3");
        k2.validate("k2");
        s.validate("s");
        if (r1.min_value() < r_lower || r1.max_value() > r_upper)
            throw model_error("r1: knot values leave [r_lower, r_upper]");
        if (r2.min_value() < r_lower || r2.max_value() > r_upper)
            throw model_error("r2: knot values leave [r_lower, r_upper]");
        if (r3.min_value() < r_lower || r3.max_value() > r_upper)
            throw model_error("r3: knot values leave [r_lower, r_upper]");
        if (k2.min_value() < k2_floor)
            throw model_error("k2: knot values below k2_floor");
        if (s.min_value() < 0.0)
            throw model_error("s: knot values must be nonnegative");
        if (!d1 || !d2 || !d3 || !d4)
            throw model_error("d1..d4: diffusion coefficient functions must be set");
    }
};

// The documented desk parameter set used by tests and default configs.
// These are working values for exercising the solver, not fitted data.
inline ModelParameters desk_defaults() {
    return ModelParameters{};
}

} // namespace chemrd
