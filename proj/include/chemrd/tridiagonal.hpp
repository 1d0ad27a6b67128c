#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "chemrd/errors.hpp"

namespace chemrd {

// Thomas algorithm without pivoting. lower[i] multiplies x[i-1], diag[i]
// multiplies x[i], upper[i] multiplies x[i+1]; lower[0] and upper[n-1] are
// ignored. Intended for the strictly diagonally dominant systems produced
// by the implicit diffusion step, where elimination cannot break down.
inline std::vector<double> tridiagonal_solve(const std::vector<double>& lower,
                                             const std::vector<double>& diag,
                                             const std::vector<double>& upper,
                                             const std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n)
        throw evaluation_error("tridiagonal: inconsistent band lengths");
    std::vector<double> c(n), x(n);
    double denom = diag[0];
    if (denom == 0.0 || !std::isfinite(denom))
        throw evaluation_error("tridiagonal: zero or non-finite pivot");
    c[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - lower[i] * c[i - 1];
        if (denom == 0.0 || !std::isfinite(denom))
            throw evaluation_error("tridiagonal: zero or non-finite pivot");
        c[i] = upper[i] / denom;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] -= c[i] * x[i + 1];
    return x;
}

} // namespace chemrd
