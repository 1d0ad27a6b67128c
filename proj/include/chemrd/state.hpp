#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "chemrd/errors.hpp"

namespace chemrd {

// The four cell-centered concentration fields. Valid states are finite and
// nonnegative with all arrays the same length.
struct StateVector {
    std::vector<double> N, T, I, U;

    std::size_t cells() const { return N.size(); }

    static StateVector zeros(std::size_t n) {
        return StateVector{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                           std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    }

    static StateVector uniform(std::size_t n, double n0, double t0, double i0, double u0) {
        return StateVector{std::vector<double>(n, n0), std::vector<double>(n, t0),
                           std::vector<double>(n, i0), std::vector<double>(n, u0)};
    }

    const std::vector<double>& field(int species) const {
        switch (species) {
            case 0: return N;
            case 1: return T;
            case 2: return I;
            default: return U;
        }
    }

    std::vector<double>& field(int species) {
        switch (species) {
            case 0: return N;
            case 1: return T;
            case 2: return I;
            default: return U;
        }
    }

    void validate() const {
        const std::size_t n = N.size();
        if (n == 0 || T.size() != n || I.size() != n || U.size() != n)
            throw model_error("state: all four fields must share one nonzero length");
        static const char* names[4] = {"N", "T", "I", "U"};
        for (int sp = 0; sp < 4; ++sp) {
            for (double v : field(sp)) {
                if (!std::isfinite(v))
                    throw model_error(std::string("state: non-finite entry in ") + names[sp]);
                if (v < 0.0)
                    throw model_error(std::string("state: negative entry in ") + names[sp]);
            }
        }
    }
};

} // namespace chemrd
