#pragma once

#include <string>
#include <vector>

#include "ekbound/core.hpp"

// Analytic right-hand sides of the velocity and boundary-layer estimates,
// the admissible layer width, the closed-form parameter choice with b = 4
// and the resulting Nusselt-number bounds.

namespace ekbound {

/// Cauchy-Schwarz bound on |h_k'(0)| and |h_k'(1)|:
///   Ra~ k^4 ||theta|| sqrt(sinh(2k^3)/k^3 - 2) / (2 sinh k^3).
double hk_prime_bound(double k, double ra_tilde, double theta_l2);

/// Uniform simplification (sqrt 2 / 2) Ra~ k^{5/2} ||theta||.
double hk_prime_bound_simplified(double k, double ra_tilde, double theta_l2);

/// Validity domains of the coefficient estimates.
bool ab_domain(double k, double eps);     // k > 1, eps < 2
bool c1c2_domain(double k, double eps);   // 0 < k <= 1, k <= sqrt(2/eps)

struct ABBounds {
    double a_bound = 0.0;
    double b_bound = 0.0;
    double a_bound_scaled = 0.0;  // a_bound * e^{k^3}
};

/// |A| <= (sqrt 2/2) e^{-k^3} k^{-1/2} Ra~ ||theta||, |B| <= (sqrt 2/2) k^{-1/2} Ra~ ||theta||.
/// Throws std::domain_error for k <= 1.
ABBounds AB_bounds(double k, double ra_tilde, double theta_l2);

struct C1C2Bounds {
    double c1_bound = 0.0;
    double c2_bound = 0.0;
};

/// |c1| <= sqrt(1/(2k)) Ra~ ||theta||, |c2| <= sqrt(eps k)/2 Ra~ ||theta||.
/// Throws std::domain_error outside c1c2_domain.
C1C2Bounds c1c2_bounds(double k, double eps, double ra_tilde, double theta_l2);

/// Coefficient p(k) of ||theta'|| ||theta|| bounding the layer integral of
/// the exponential part of w_k.
double p_of_k(double k, double b, double ra_tilde, double eps, double delta);

/// Bound on (int_0^delta h_k^2)^{1/2} (and on the mirrored layer), using the
/// k^3 delta <= gamma branch or the k^3 delta >= gamma branch.
double green_layer_bound(double k, double ra_tilde, double delta, double theta_l2);

/// Coefficient of ||theta|| ||theta'|| bounding (b / 2 delta) int_B |h_k theta_k|.
double green_boundary_coefficient(double k, double b, double ra_tilde, double delta);

/// min(16 d1^2 eps^2 / (5 b^2 Ra~^2), 8 d2 sqrt(gamma) eps / (b Ra~ sqrt L), 1/2).
double delta_admissible(double b, double d1, double d2, const FlowParameters& params);

struct RecipeParameters {
    double b = 4.0;
    double c = 4.0;
    double delta = 0.5;
    double d1 = 0.0;
    double d2 = 0.0;
    double M = 0.0;
    bool clamped = false;  // delta hit the 1/2 ceiling
};

/// Closed-form choice c = b (b = 4 by default) with d1 from the positive root
/// of d1^2 + M d1 - (b-1) M = 0, d2 = b - 1 - d1, and delta the smaller of
/// the two (then equal) arms. Throws std::domain_error for b <= 1.
RecipeParameters recipe(const FlowParameters& params, double b = 4.0);

enum class BoundMethod { Recipe, Simplified, Family, Profile };

const char* method_name(BoundMethod m);

struct BoundValue {
    double nu_upper = 1.0;
    double leading_term = 0.0;   // coefficient * (Ra Ek)^2
    double linear_term = 0.0;
    double constant_term = 0.0;
    BoundMethod method = BoundMethod::Recipe;
};

/// max(1, 5 (sqrt(1 + 12/M) + 1)^2 Ra~^2 / (54 eps^2) - 1/3); 1 when delta clamps.
BoundValue bound_recipe(const FlowParameters& params);

/// max(1, (10/27) (Ra Ek)^2 + (2 sqrt L / (9 sqrt gamma)) Ra Ek - 1/3).
BoundValue bound_simplified(const FlowParameters& params);

/// Coefficients of the simplified bound.
double simplified_leading_coefficient();
double simplified_linear_coefficient();

struct LiteratureBound {
    std::string label;
    double value = 0.0;
};

/// Earlier no-slip bounds: 1 + 9.5 Ra^2 Ek, 0.6635 Ra^{2/5} and
/// 2 Ra^{4/11} (1 + 1/(2 Ek))^{4/11}.
std::vector<LiteratureBound> literature_bounds(double ra, double ek);

}  // namespace ekbound
