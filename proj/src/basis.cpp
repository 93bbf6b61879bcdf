#include "ekbound/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace ekbound {

void eval_basis(double z, std::span<double> values, std::span<double> derivs) {
    const std::size_t n = values.size();
    if (n == 0) return;
    if (!derivs.empty() && derivs.size() < n) {
        throw std::invalid_argument("eval_basis: derivs shorter than values");
    }
    const double x = 2.0 * z - 1.0;
    // Legendre recurrence, two steps ahead of the basis index.
    double pm = 1.0;  // P_{k}
    double p = x;     // P_{k+1}
    double pp = 0.0;  // P_{k+2}
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k);
        pp = ((2.0 * kk + 3.0) * x * p - (kk + 1.0) * pm) / (kk + 2.0);
        const double scale = 1.0 / std::sqrt(8.0 * kk + 12.0);
        values[k] = (pm - pp) * scale;
        if (!derivs.empty()) derivs[k] = -2.0 * (2.0 * kk + 3.0) * p * scale;
        pm = p;
        p = pp;
    }
}

Eigen::MatrixXd basis_mass_matrix(int dim) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) {
        const double a = 8.0 * n + 12.0;
        m(n, n) = (1.0 / (2.0 * n + 1.0) + 1.0 / (2.0 * n + 5.0)) / a;
        if (n + 2 < dim) {
            const double off = -1.0 / ((2.0 * n + 5.0) * std::sqrt(a * (8.0 * n + 28.0)));
            m(n, n + 2) = off;
            m(n + 2, n) = off;
        }
    }
    return m;
}

TestField::TestField(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    for (double c : c_) {
        if (!std::isfinite(c)) throw std::invalid_argument("TestField: non-finite coefficient");
    }
}

double TestField::value(double z) const {
    if (c_.empty()) return 0.0;
    std::vector<double> v(c_.size());
    eval_basis(z, v);
    double s = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) s += c_[i] * v[i];
    return s;
}

double TestField::derivative(double z) const {
    if (c_.empty()) return 0.0;
    std::vector<double> v(c_.size()), d(c_.size());
    eval_basis(z, v, d);
    double s = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) s += c_[i] * d[i];
    return s;
}

double TestField::l2_norm() const {
    if (c_.empty()) return 0.0;
    const auto m = basis_mass_matrix(static_cast<int>(c_.size()));
    const Eigen::Map<const Eigen::VectorXd> c(c_.data(), static_cast<Eigen::Index>(c_.size()));
    return std::sqrt(std::max(0.0, c.dot(m * c)));
}

double TestField::dz_l2_norm() const {
    double s = 0.0;
    for (double c : c_) s += c * c;
    return std::sqrt(s);
}

std::function<double(double)> TestField::as_function() const {
    return [f = *this](double z) { return f.value(z); };
}

}  // namespace ekbound
