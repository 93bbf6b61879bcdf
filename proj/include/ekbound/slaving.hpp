#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ekbound/basis.hpp"
#include "ekbound/core.hpp"

// Velocity modes slaved to a temperature mode:
//
//   k^6 w - w'' = k^4 Ra~ theta,   k^2 w(0) = s w'(0),   k^2 w(1) = -s w'(1),
//
// with s = sqrt(eps/2). The solution is split as w = c1 sinh(k^3 z) +
// c2 cosh(k^3 z) + h, where h solves the same equation with Dirichlet ends.
// Every hyperbolic ratio is evaluated with the e^{k^3} factor cancelled so
// that k^3 can run far past the overflow point of sinh.

namespace ekbound {

using ScalarFn = std::function<double(double)>;

/// Thrown when two quadrature orders disagree beyond the resolution tolerance.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// g(z, s) / sinh(k^3), i.e. sinh(k^3 min) sinh(k^3 (1 - max)) / sinh(k^3).
double greens_kernel(double k, double z, double s);

/// d/dz of greens_kernel at z = 0 and z = 1 (functions of s only).
double greens_kernel_dz0(double k, double s);
double greens_kernel_dz1(double k, double s);

/// Ra~ k * int_0^1 g(z,s) f(s) ds / sinh(k^3), panel-wise Gauss with a panel
/// break at z and geometric grading toward z at scale k^{-3}.
double green_integral(double k, double ra_tilde, double z, const ScalarFn& f, int order);

/// The same integral at every point of a sorted grid in [0, 1], by a
/// forward/backward recursion over the grid intervals. Cost is linear in
/// the grid size.
std::vector<double> green_integral_on_grid(double k, double ra_tilde, std::span<const double> grid, const ScalarFn& f,
                                           int order);

/// h'(0) and h'(1) from the differentiated kernel.
double green_dz0(double k, double ra_tilde, const ScalarFn& f, int order);
double green_dz1(double k, double ra_tilde, const ScalarFn& f, int order);

struct GridField {
    std::vector<double> grid;
    std::vector<double> values;
};

/// Uniform grid of n points including both ends.
std::vector<double> uniform_grid(int n);

struct HField {
    GridField field;
    double dz0 = 0.0;  // h'(0)
    double dz1 = 0.0;  // h'(1)
};

/// Dirichlet part h_k on a uniform grid (1025 points unless told otherwise).
/// Order quad_order is checked against quad_order + 8; a relative
/// disagreement above 1e-8 throws ResolutionError.
HField h_field(double k, double ra_tilde, const ScalarFn& theta, int quad_order = 32, int n_grid = 1025);
HField h_field(double k, double ra_tilde, const TestField& theta, int quad_order = 32, int n_grid = 1025);

struct RobinCoefficients {
    double c1 = 0.0;
    double c2 = 0.0;
    double a = 0.0;         // (c1 + c2) / 2
    double b = 0.0;         // (c2 - c1) / 2
    double a_scaled = 0.0;  // a * e^{k^3}, finite for every k
};

/// Homogeneous coefficients that move h onto the Ekman-pumping conditions.
RobinCoefficients robin_coefficients(double k, double eps, double dh0, double dh1);

/// w_k = c1 sinh(k^3 z) + c2 cosh(k^3 z) + h_k(z), stored in scaled form.
struct SlavingSolution {
    double k = 0.0;
    double eps = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double A = 0.0;
    double B = 0.0;
    double A_scaled = 0.0;
    double hk_prime_0 = 0.0;
    double hk_prime_1 = 0.0;
    double ra_tilde = 0.0;
    int quad_order = 32;
    ScalarFn theta;

    /// Pointwise w_k(z).
    double operator()(double z) const;
    /// h_k at a single point.
    double h(double z) const;
    /// w_k on a sorted grid in [0, 1].
    std::vector<double> evaluate(std::span<const double> grid) const;
    /// A e^{k^3 z} + B e^{-k^3 z}, overflow-safe.
    double exponential_part(double z) const;

    double w0() const;
    double w1() const;
    double dw0() const;
    double dw1() const;
    /// |k^2 w(0) - s w'(0)| and |k^2 w(1) + s w'(1)|.
    double robin_residual_0() const;
    double robin_residual_1() const;
};

SlavingSolution solve_slaving(double k, const FlowParameters& params, const ScalarFn& theta, int quad_order = 32);
SlavingSolution solve_slaving(double k, const FlowParameters& params, const TestField& theta, int quad_order = 32);

enum class WallCondition { Robin, Dirichlet };

/// Second-order centred finite differences for the slaving equation with
/// ghost-point Robin closures, solved by the Thomas algorithm.
GridField oracle_solve(double k, const FlowParameters& params, const ScalarFn& theta, int n_grid,
                       WallCondition walls = WallCondition::Robin);

}  // namespace ekbound
