#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ekbound {

/// Test-field basis on [0, 1]:
///   e_n(z) = (P_n(x) - P_{n+2}(x)) / sqrt(8n + 12),  x = 2z - 1,  n >= 0.
/// Every member vanishes at both walls and the derivatives are orthonormal,
/// int_0^1 e_n' e_m' dz = delta_nm, so the stiffness matrix is the identity
/// and the mass matrix is pentadiagonal (offsets 0 and +-2 only).
///
/// Fills values[n] = e_n(z) and derivs[n] = e_n'(z) for n < values.size().
/// derivs may be empty.
void eval_basis(double z, std::span<double> values, std::span<double> derivs = {});

/// Mass matrix int_0^1 e_n e_m dz in closed form.
Eigen::MatrixXd basis_mass_matrix(int dim);

/// Temperature-fluctuation mode expanded in the basis above.
class TestField {
public:
    TestField() = default;
    explicit TestField(std::vector<double> coeffs);

    std::span<const double> coeffs() const { return c_; }
    std::size_t size() const { return c_.size(); }
    /// Polynomial degree of the expansion.
    int degree() const { return static_cast<int>(c_.size()) + 1; }

    double value(double z) const;
    double derivative(double z) const;

    double l2_norm() const;
    /// ||theta'||_2, which equals the Euclidean norm of the coefficients.
    double dz_l2_norm() const;

    std::function<double(double)> as_function() const;

private:
    std::vector<double> c_;
};

}  // namespace ekbound
