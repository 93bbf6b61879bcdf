#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "ekbound/basis.hpp"
#include "ekbound/slaving.hpp"

namespace testutil {

/// Smooth random field: normal coefficients damped as 1/(n+1).
inline ekbound::TestField random_field(std::mt19937_64& rng, int dim = 10) {
    std::normal_distribution<double> nd;
    std::vector<double> c(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] = nd(rng) / (i + 1.0);
    return ekbound::TestField(std::move(c));
}

/// Trapezoid L2 norm on a uniform grid.
inline double grid_l2(std::span<const double> v) {
    const double h = 1.0 / static_cast<double>(v.size() - 1);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double w = (i == 0 || i + 1 == v.size()) ? 0.5 : 1.0;
        s += w * v[i] * v[i];
    }
    return std::sqrt(s * h);
}

inline double rel_l2(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return grid_l2(d) / grid_l2(b);
}

/// Richardson limit of the finite-difference oracle from n_fine and
/// (n_fine + 1) / 2 points, returned on the coarse grid.
inline ekbound::GridField richardson_oracle(double k, const ekbound::FlowParameters& p, const ekbound::ScalarFn& theta,
                                            int n_fine,
                                            ekbound::WallCondition walls = ekbound::WallCondition::Robin) {
    const auto fine = ekbound::oracle_solve(k, p, theta, n_fine, walls);
    auto coarse = ekbound::oracle_solve(k, p, theta, (n_fine + 1) / 2, walls);
    for (std::size_t i = 0; i < coarse.values.size(); ++i) {
        coarse.values[i] = (4.0 * fine.values[2 * i] - coarse.values[i]) / 3.0;
    }
    return coarse;
}

}  // namespace testutil
