#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "chemrd/errors.hpp"
#include "chemrd/parameters.hpp"

namespace chemrd {

// Pointwise kinetics of the four-species treatment model. Fields:
//   N normal cells, T tumor cells, I immune cells, U drug concentration.
//
//   F1 = r1 N (1 - b1 N) - c4 T N - a3 (1 - e^{-U}) N
//   F2 = r2 T (1 - b2 T) - c2 I T - c3 T N - a2 (1 - e^{-U}) T
//   F3 = r3 I (1 - b3 I) + s + rho I T / (alpha + T) - c1 I T - k1 I
//        - a1 (1 - e^{-U}) I
//   F4 = -k2 U
//
// r1..r3, s, k2 are evaluated through their schedules at (time, cell).
// The kinetics are quasi-positive: F_i >= 0 whenever species i is zero and
// the other species are nonnegative, so the continuous model cannot cross
// zero through the reaction terms.

using Reactions = std::array<double, 4>;
using ReactionJacobian = std::array<std::array<double, 4>, 4>;

namespace detail {

inline void require_finite(double v, const char* name) {
    if (!std::isfinite(v))
        throw evaluation_error(std::string("kinetics: non-finite input ") + name);
}

inline void require_finite_state(double n, double t_, double i, double u) {
    require_finite(n, "n");
    require_finite(t_, "t_");
    require_finite(i, "i");
    require_finite(u, "u");
}

} // namespace detail

inline Reactions eval_reactions(double n, double t_, double i, double u,
                                const ModelParameters& p, std::size_t cell, double time) {
    detail::require_finite_state(n, t_, i, u);
    const double r1 = p.growth_rate(1, time, cell);
    const double r2 = p.growth_rate(2, time, cell);
    const double r3 = p.growth_rate(3, time, cell);
    const double k2 = p.consumption_rate(time, cell);
    const double s = p.source(time, cell);
    const double kill = 1.0 - std::exp(-u); // fraction of the drug's max kill rate
    return Reactions{
        r1 * n * (1.0 - p.b1 * n) - p.c4 * t_ * n - p.a3 * kill * n,
        r2 * t_ * (1.0 - p.b2 * t_) - p.c2 * i * t_ - p.c3 * t_ * n - p.a2 * kill * t_,
        r3 * i * (1.0 - p.b3 * i) + s + p.rho * i * t_ / (p.alpha + t_) - p.c1 * i * t_ -
            p.k1 * i - p.a1 * kill * i,
        -k2 * u,
    };
}

// Analytic partial derivatives of eval_reactions with respect to (N, T, I, U).
// Row = reaction, column = species. k2 is treated as state-independent.
inline ReactionJacobian eval_reaction_jacobian(double n, double t_, double i, double u,
                                               const ModelParameters& p, std::size_t cell,
                                               double time) {
    detail::require_finite_state(n, t_, i, u);
    const double r1 = p.growth_rate(1, time, cell);
    const double r2 = p.growth_rate(2, time, cell);
    const double r3 = p.growth_rate(3, time, cell);
    const double k2 = p.consumption_rate(time, cell);
    const double eu = std::exp(-u);
    const double kill = 1.0 - eu;
    const double recr = p.alpha + t_;
    ReactionJacobian J{};
    J[0][0] = r1 * (1.0 - 2.0 * p.b1 * n) - p.c4 * t_ - p.a3 * kill;
    J[0][1] = -p.c4 * n;
    J[0][2] = 0.0;
    J[0][3] = -p.a3 * eu * n;
    J[1][0] = -p.c3 * t_;
    J[1][1] = r2 * (1.0 - 2.0 * p.b2 * t_) - p.c2 * i - p.c3 * n - p.a2 * kill;
    J[1][2] = -p.c2 * t_;
    J[1][3] = -p.a2 * eu * t_;
    J[2][0] = 0.0;
    J[2][1] = p.rho * i * p.alpha / (recr * recr) - p.c1 * i;
    J[2][2] = r3 * (1.0 - 2.0 * p.b3 * i) + p.rho * t_ / recr - p.c1 * t_ - p.k1 - p.a1 * kill;
    J[2][3] = -p.a1 * eu * i;
    J[3][0] = 0.0;
    J[3][1] = 0.0;
    J[3][2] = 0.0;
    J[3][3] = -k2;
    return J;
}

// C1 monotone switch: exactly 0 for z <= 0, exactly 1 for z >= delta,
// cubic smoothstep 3w^2 - 2w^3 with w = z/delta in between.
inline double heaviside_smooth(double z, double delta) {
    if (!(delta > 0.0)) throw model_error("heaviside: smoothing width must be positive");
    if (!std::isfinite(z)) throw evaluation_error("heaviside: non-finite argument");
    if (z <= 0.0) return 0.0;
    if (z >= delta) return 1.0;
    const double w = z / delta;
    return w * w * (3.0 - 2.0 * w);
}

// Derivative of heaviside_smooth; zero outside (0, delta).
inline double heaviside_derivative(double z, double delta) {
    if (!(delta > 0.0)) throw model_error("heaviside: smoothing width must be positive");
    if (!std::isfinite(z)) throw evaluation_error("heaviside: non-finite argument");
    if (z <= 0.0 || z >= delta) return 0.0;
    const double w = z / delta;
    return 6.0 * w * (1.0 - w) / delta;
}

// Saturating rescale F_i -> F_i / (1 + eps sum_j |F_j|). Signs are kept and
// each component is bounded by 1/eps in magnitude when eps > 0.
inline Reactions regularize_reactions(const Reactions& F, double eps) {
    if (!(eps >= 0.0)) throw evaluation_error("regularize: eps must be nonnegative");
    double sum = 0.0;
    for (double f : F) {
        detail::require_finite(f, "F");
        sum += std::abs(f);
    }
    const double denom = 1.0 + eps * sum;
    return Reactions{F[0] / denom, F[1] / denom, F[2] / denom, F[3] / denom};
}

} // namespace chemrd
