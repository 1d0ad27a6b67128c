#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chemrd/errors.hpp"
#include "chemrd/grid.hpp"
#include "chemrd/kinetics.hpp"
#include "chemrd/parameters.hpp"

namespace chemrd {

// Diffusion coefficients at the n-1 interior faces of a grid, one species
// at a time. Boundary faces carry no coefficient: the normal flux there is
// prescribed (zero, or the gated drug inflow added separately).
struct FaceCoefficients {
    std::vector<double> face;
};

// Face value = d at the face midpoint and the arithmetic mean of the two
// adjacent cell values. Enforces the uniform lower bound delta0.
inline FaceCoefficients face_diffusion(const std::vector<double>& field, const DiffusionFn& d,
                                       const Grid1D& grid, double time, double delta0) {
    if (field.size() != grid.n)
        throw evaluation_error("face_diffusion: field length does not match the grid");
    FaceCoefficients fc;
    fc.face.resize(grid.n - 1);
    for (std::size_t i = 0; i + 1 < grid.n; ++i) {
        const double x = grid.face(i + 1);
        const double z = 0.5 * (field[i] + field[i + 1]);
        const double v = d(x, time, z);
        if (!(v >= delta0))
            throw model_error("diffusion coefficient fell below delta0 at x=" + std::to_string(x));
        fc.face[i] = v;
    }
    return fc;
}

// Conservative flux-difference stencil with zero flux through both boundary
// faces: rate_i = (flux_{i+1/2} - flux_{i-1/2}) / h. The rates telescope, so
// sum(rate_i) * h vanishes up to round-off.
inline std::vector<double> apply_diffusion(const std::vector<double>& field,
                                           const FaceCoefficients& faces, double h) {
    const std::size_t n = field.size();
    if (faces.face.size() + 1 != n)
        throw evaluation_error("apply_diffusion: face count must be cell count minus one");
    std::vector<double> rate(n);
    double flux_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double flux_e = (i + 1 < n) ? faces.face[i] * (field[i + 1] - field[i]) / h : 0.0;
        rate[i] = (flux_e - flux_w) / h;
        flux_w = flux_e;
    }
    return rate;
}

// Adds the gated drug inflow v H(N - a0_gate) through each boundary face to
// the boundary cell's rate. The prescribed flux enters one cell of width h,
// hence the 1/h scaling. Interior cells are untouched.
inline void apply_drug_boundary_flux(std::vector<double>& u_rate, double v_left, double v_right,
                                     double n_left, double n_right, const ModelParameters& p,
                                     double h) {
    if (v_left < 0.0 || v_right < 0.0)
        throw admissibility_error("boundary flux: injection rate must be nonnegative");
    if (u_rate.empty()) throw evaluation_error("boundary flux: empty rate vector");
    u_rate.front() += v_left * heaviside_smooth(n_left - p.a0_gate, p.delta) / h;
    u_rate.back() += v_right * heaviside_smooth(n_right - p.a0_gate, p.delta) / h;
}

} // namespace chemrd
