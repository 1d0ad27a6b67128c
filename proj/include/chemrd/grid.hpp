#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "chemrd/errors.hpp"

namespace chemrd {

// Uniform 1D finite-volume grid on [0, length]. Cell i owns
// [i h, (i+1) h] with center at (i + 1/2) h; faces sit at i h.
struct Grid1D {
    double length = 1.0;
    std::size_t n = 0;
    double h = 0.0;
    std::vector<double> centers;

    Grid1D(double length_, std::size_t n_) : length(length_), n(n_) {
        if (!(length > 0.0) || !std::isfinite(length))
            throw model_error("grid: length must be positive and finite");
        if (n < 3) throw model_error("grid: at least 3 cells required");
        h = length / static_cast<double>(n);
        centers.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            centers[i] = (static_cast<double>(i) + 0.5) * h;
    }

    double face(std::size_t i) const { return static_cast<double>(i) * h; }
};

} // namespace chemrd
