#pragma once

#include <span>
#include <vector>

namespace ekbound {

/// Rayleigh and Ekman numbers together with the scaled quantities of the
/// reduced model: ra_tilde = Ra Ek^{4/3} and eps = Ek^{1/3}.
struct FlowParameters {
    double ra = 0.0;
    double ek = 0.0;
    double ra_tilde = 0.0;
    double eps = 0.0;
};

/// Throws std::domain_error for non-positive input or eps >= 2.
FlowParameters derive_params(double ra, double ek);

/// Builds parameters directly from the scaled pair. Ra and Ek are recovered
/// from eps^3 and ra_tilde / eps^4.
FlowParameters params_from_scaled(double ra_tilde, double eps);

struct Constants {
    double gamma = 0.0;  // sinh(gamma) = 1
    double L = 0.0;      // gamma/2 + 4 coth(2 gamma) + csch^2(2 gamma)/gamma
    double P = 0.0;      // 2 (sinh 1 - 1)
};

const Constants& constants();

/// Continuous piecewise-linear background profile on [0, 1] with phi(0) =
/// phi(1) = 0. Immutable after construction.
class PiecewiseLinearProfile {
public:
    /// Zero profile on a single segment.
    PiecewiseLinearProfile();

    /// Breakpoints must start at 0, end at 1 and increase strictly; the end
    /// values must be exactly zero. Throws std::invalid_argument otherwise.
    PiecewiseLinearProfile(std::vector<double> breakpoints, std::vector<double> values);

    std::span<const double> breakpoints() const { return z_; }
    std::span<const double> values() const { return v_; }
    std::size_t segments() const { return z_.size() - 1; }

    /// Slope of segment i.
    double slope(std::size_t i) const;

    /// Index of the segment containing z; right-continuous at breakpoints.
    std::size_t segment_of(double z) const;

    /// Largest |phi'| over all segments.
    double max_abs_slope() const;

    bool is_zero() const;

private:
    std::vector<double> z_;
    std::vector<double> v_;
};

double profile_eval(const PiecewiseLinearProfile& profile, double z);

/// Right-limit convention at breakpoints (left limit at z = 1).
double profile_derivative_eval(const PiecewiseLinearProfile& profile, double z);

/// Exact ||phi'||_2^2.
double phi_prime_l2sq(const PiecewiseLinearProfile& profile);

/// Three-branch profile: steep boundary segments of width delta joined by
/// phi = c (z - 1/2) in the interior. delta = 1/2 gives the zero profile.
PiecewiseLinearProfile make_paper_profile(double c, double delta);

/// Width of the wall segments: min(first interior breakpoint, 1 - last
/// interior breakpoint), or 1/2 when the profile has a single segment.
double boundary_layer_width(const PiecewiseLinearProfile& profile);

}  // namespace ekbound
