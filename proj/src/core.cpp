#include "ekbound/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ekbound {

FlowParameters derive_params(double ra, double ek) {
    if (!(ra > 0.0) || !(ek > 0.0) || !std::isfinite(ra) || !std::isfinite(ek)) {
        throw std::domain_error("derive_params: Ra and Ek must be positive and finite");
    }
    const double eps = std::cbrt(ek);
    if (!(eps < 2.0)) {
        throw std::domain_error("derive_params: Ek^(1/3) must be < 2 (got " + std::to_string(eps) + ")");
    }
    // Ra Ek^{4/3} = Ra * Ek * eps keeps the rounding to a couple of ulps.
    return FlowParameters{ra, ek, ra * ek * eps, eps};
}

FlowParameters params_from_scaled(double ra_tilde, double eps) {
    if (!(ra_tilde >= 0.0) || !(eps > 0.0) || !(eps < 2.0)) {
        throw std::domain_error("params_from_scaled: need ra_tilde >= 0 and 0 < eps < 2");
    }
    const double ek = eps * eps * eps;
    return FlowParameters{ra_tilde / (ek * eps), ek, ra_tilde, eps};
}

const Constants& constants() {
    static const Constants c = [] {
        Constants k;
        k.gamma = std::asinh(1.0);
        const double g2 = 2.0 * k.gamma;
        const double csch = 1.0 / std::sinh(g2);
        k.L = k.gamma / 2.0 + 4.0 / std::tanh(g2) + csch * csch / k.gamma;
        k.P = 2.0 * (std::sinh(1.0) - 1.0);
        return k;
    }();
    return c;
}

PiecewiseLinearProfile::PiecewiseLinearProfile() : z_{0.0, 1.0}, v_{0.0, 0.0} {}

PiecewiseLinearProfile::PiecewiseLinearProfile(std::vector<double> breakpoints, std::vector<double> values)
    : z_(std::move(breakpoints)), v_(std::move(values)) {
    if (z_.size() < 2 || z_.size() != v_.size()) {
        throw std::invalid_argument("PiecewiseLinearProfile: need >= 2 breakpoints and one value per breakpoint");
    }
    if (z_.front() != 0.0 || z_.back() != 1.0) {
        throw std::invalid_argument("PiecewiseLinearProfile: breakpoints must start at 0 and end at 1");
    }
    for (std::size_t i = 1; i < z_.size(); ++i) {
        if (!(z_[i] > z_[i - 1])) {
            throw std::invalid_argument("PiecewiseLinearProfile: breakpoints must increase strictly");
        }
    }
    if (v_.front() != 0.0 || v_.back() != 0.0) {
        throw std::invalid_argument("PiecewiseLinearProfile: phi(0) and phi(1) must be zero");
    }
    for (double v : v_) {
        if (!std::isfinite(v)) throw std::invalid_argument("PiecewiseLinearProfile: non-finite value");
    }
}

double PiecewiseLinearProfile::slope(std::size_t i) const {
    return (v_[i + 1] - v_[i]) / (z_[i + 1] - z_[i]);
}

std::size_t PiecewiseLinearProfile::segment_of(double z) const {
    auto it = std::upper_bound(z_.begin(), z_.end(), z);
    std::size_t idx = static_cast<std::size_t>(it - z_.begin());
    if (idx == 0) return 0;
    return std::min(idx - 1, segments() - 1);
}

double PiecewiseLinearProfile::max_abs_slope() const {
    double m = 0.0;
    for (std::size_t i = 0; i < segments(); ++i) m = std::max(m, std::abs(slope(i)));
    return m;
}

bool PiecewiseLinearProfile::is_zero() const {
    return std::all_of(v_.begin(), v_.end(), [](double v) { return v == 0.0; });
}

namespace {
void check_unit(double z, const char* who) {
    if (!(z >= 0.0 && z <= 1.0)) {
        throw std::domain_error(std::string(who) + ": z must lie in [0, 1]");
    }
}
}  // namespace

double profile_eval(const PiecewiseLinearProfile& p, double z) {
    check_unit(z, "profile_eval");
    const auto zs = p.breakpoints();
    const auto vs = p.values();
    const std::size_t i = p.segment_of(z);
    if (z == zs[i]) return vs[i];
    if (z == zs[i + 1]) return vs[i + 1];
    const double t = (z - zs[i]) / (zs[i + 1] - zs[i]);
    return vs[i] + t * (vs[i + 1] - vs[i]);
}

double profile_derivative_eval(const PiecewiseLinearProfile& p, double z) {
    check_unit(z, "profile_derivative_eval");
    return p.slope(p.segment_of(z));
}

double phi_prime_l2sq(const PiecewiseLinearProfile& p) {
    const auto zs = p.breakpoints();
    const auto vs = p.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.segments(); ++i) {
        const double dv = vs[i + 1] - vs[i];
        sum += dv * dv / (zs[i + 1] - zs[i]);
    }
    return sum;
}

PiecewiseLinearProfile make_paper_profile(double c, double delta) {
    if (!(delta > 0.0 && delta <= 0.5)) {
        throw std::domain_error("make_paper_profile: delta must lie in (0, 1/2]");
    }
    if (delta == 0.5 || c == 0.0) {
        if (delta == 0.5) return PiecewiseLinearProfile({0.0, 0.5, 1.0}, {0.0, 0.0, 0.0});
        return PiecewiseLinearProfile({0.0, delta, 1.0 - delta, 1.0}, {0.0, 0.0, 0.0, 0.0});
    }
    const double edge = c * (delta - 0.5);
    return PiecewiseLinearProfile({0.0, delta, 1.0 - delta, 1.0}, {0.0, edge, -edge, 0.0});
}

double boundary_layer_width(const PiecewiseLinearProfile& p) {
    const auto zs = p.breakpoints();
    if (zs.size() <= 2) return 0.5;
    return std::min({zs[1], 1.0 - zs[zs.size() - 2], 0.5});
}

}  // namespace ekbound
