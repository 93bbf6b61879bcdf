#pragma once

#include <span>

#include <Eigen/Dense>

#include "ekbound/core.hpp"
#include "ekbound/quadrature.hpp"

namespace ekbound::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Basis values and slaved velocities w[e_j] at the nodes of an outer
/// panel rule.
struct SlavedBasis {
    PanelRule rule;
    RowMatrix basis;     // nodes x dim
    RowMatrix velocity;  // nodes x dim
};

/// Slaves the first `dim` basis functions at once. Between consecutive
/// nodes the kernel integrals are advanced by a stable forward/backward
/// recursion; the basis is interpolated on each panel's Gauss nodes and the
/// interpolation weights are integrated against the exponential factors.
SlavedBasis slave_basis(double k, const FlowParameters& params, int dim, std::span<const double> edges, int order);

}  // namespace ekbound::detail
