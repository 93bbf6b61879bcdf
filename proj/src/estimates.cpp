#include "ekbound/estimates.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace ekbound {

namespace {

// (sinh 2x - 2x) / (4 sinh^2 x), finite for every x > 0.
double hk_ratio(double x) {
    if (x < 0.5) {
        const double y = 2.0 * x;
        const double y2 = y * y;
        double term = y * y2 / 6.0;
        double sum = term;
        for (int j = 2; j < 12; ++j) {
            term *= y2 / ((2.0 * j) * (2.0 * j + 1.0));
            sum += term;
        }
        const double sh = std::sinh(x);
        return sum / (4.0 * sh * sh);
    }
    const double e2 = std::exp(-2.0 * x);
    const double om = -std::expm1(-2.0 * x);
    return (0.5 * (1.0 - e2 * e2) - 2.0 * x * e2) / (om * om);
}

void require_positive_k(double k, const char* who) {
    if (!(k > 0.0)) throw std::domain_error(std::string(who) + ": k must be positive");
}

}  // namespace

double hk_prime_bound(double k, double ra_tilde, double theta_l2) {
    require_positive_k(k, "hk_prime_bound");
    if (theta_l2 == 0.0) return 0.0;
    return ra_tilde * std::pow(k, 2.5) * theta_l2 * std::sqrt(hk_ratio(k * k * k));
}

double hk_prime_bound_simplified(double k, double ra_tilde, double theta_l2) {
    require_positive_k(k, "hk_prime_bound_simplified");
    return std::sqrt(0.5) * ra_tilde * std::pow(k, 2.5) * theta_l2;
}

bool ab_domain(double k, double eps) { return k > 1.0 && eps > 0.0 && eps < 2.0; }

bool c1c2_domain(double k, double eps) { return k > 0.0 && k <= 1.0 && eps > 0.0 && k <= std::sqrt(2.0 / eps); }

ABBounds AB_bounds(double k, double ra_tilde, double theta_l2) {
    if (!(k > 1.0)) throw std::domain_error("AB_bounds: requires k > 1");
    ABBounds r;
    r.b_bound = std::sqrt(0.5) / std::sqrt(k) * ra_tilde * theta_l2;
    r.a_bound_scaled = r.b_bound;
    r.a_bound = r.b_bound * std::exp(-k * k * k);
    return r;
}

C1C2Bounds c1c2_bounds(double k, double eps, double ra_tilde, double theta_l2) {
    if (!c1c2_domain(k, eps)) throw std::domain_error("c1c2_bounds: requires 0 < k <= 1 and k <= sqrt(2/eps)");
    return {std::sqrt(1.0 / (2.0 * k)) * ra_tilde * theta_l2, 0.5 * std::sqrt(eps * k) * ra_tilde * theta_l2};
}

double p_of_k(double k, double b, double ra_tilde, double eps, double delta) {
    require_positive_k(k, "p_of_k");
    if (k <= 1.0) {
        return 0.5 * b * ra_tilde * std::sqrt(delta + delta * delta * delta) * (std::pow(k, 2.5) + std::sqrt(eps * k));
    }
    return b * ra_tilde * std::sqrt(delta / k);
}

double green_layer_bound(double k, double ra_tilde, double delta, double theta_l2) {
    require_positive_k(k, "green_layer_bound");
    const auto& c = constants();
    if (k * k * k * delta <= c.gamma) {
        return delta * ra_tilde * theta_l2 * std::sqrt(delta * std::pow(k, 5.0) * c.P);
    }
    return 0.5 * delta * ra_tilde * theta_l2 * std::sqrt(c.L / (2.0 * k * delta));
}

double green_boundary_coefficient(double k, double b, double ra_tilde, double delta) {
    // (b/2) ||theta'|| sqrt(2) * layer bound / ||theta||
    return b / std::sqrt(2.0) * green_layer_bound(k, ra_tilde, delta, 1.0);
}

double delta_admissible(double b, double d1, double d2, const FlowParameters& p) {
    const auto& c = constants();
    assert(8.0 * std::sqrt(c.gamma / c.L) < 2.0 * std::sqrt(2.0) / std::sqrt(c.gamma * c.P));
    if (p.ra_tilde == 0.0) return 0.5;
    const double rt = p.ra_tilde;
    const double arm1 = 16.0 * d1 * d1 * p.eps * p.eps / (5.0 * b * b * rt * rt);
    const double arm2 = 8.0 * d2 * std::sqrt(c.gamma) * p.eps / (b * rt * std::sqrt(c.L));
    return std::min({arm1, arm2, 0.5});
}

RecipeParameters recipe(const FlowParameters& p, double b) {
    if (!(b > 1.0) || !std::isfinite(b)) throw std::domain_error("recipe: b must exceed 1");
    const auto& c = constants();
    RecipeParameters r;
    r.b = b;
    r.c = r.b;
    if (p.ra_tilde == 0.0) {
        r.M = 0.0;
        r.d1 = r.b - 1.0;
        r.d2 = 0.0;
        r.delta = 0.5;
        r.clamped = true;
        return r;
    }
    r.M = 5.0 * r.b * std::sqrt(c.gamma) * p.ra_tilde / (2.0 * std::sqrt(c.L) * p.eps);
    const double q = 4.0 * (r.b - 1.0) / r.M;
    const double root = std::sqrt(1.0 + q) + 1.0;
    r.d1 = 2.0 * (r.b - 1.0) / root;
    r.d2 = (r.b - 1.0) * q / (root * root);  // b - 1 - d1 without cancellation
    r.delta = delta_admissible(r.b, r.d1, r.d2, p);
    r.clamped = r.delta >= 0.5;
    return r;
}

const char* method_name(BoundMethod m) {
    switch (m) {
        case BoundMethod::Recipe: return "recipe";
        case BoundMethod::Simplified: return "simplified";
        case BoundMethod::Family: return "family";
        case BoundMethod::Profile: return "profile";
    }
    return "unknown";
}

double simplified_leading_coefficient() { return 10.0 / 27.0; }

double simplified_linear_coefficient() {
    const auto& c = constants();
    return 2.0 * std::sqrt(c.L) / (9.0 * std::sqrt(c.gamma));
}

BoundValue bound_recipe(const FlowParameters& p) {
    BoundValue v;
    v.method = BoundMethod::Recipe;
    const auto r = recipe(p);
    const double x = p.ra_tilde / p.eps;
    v.leading_term = simplified_leading_coefficient() * x * x;
    v.constant_term = -1.0 / 3.0;
    if (r.clamped) {
        v.nu_upper = 1.0;
        v.linear_term = 0.0;
        return v;
    }
    const double root = std::sqrt(1.0 + 12.0 / r.M) + 1.0;
    const double full = 5.0 * root * root * x * x / 54.0;
    v.linear_term = full - v.leading_term;
    v.nu_upper = std::max(1.0, full - 1.0 / 3.0);
    return v;
}

BoundValue bound_simplified(const FlowParameters& p) {
    BoundValue v;
    v.method = BoundMethod::Simplified;
    const double x = p.ra_tilde / p.eps;  // = Ra Ek
    v.leading_term = simplified_leading_coefficient() * x * x;
    v.linear_term = simplified_linear_coefficient() * x;
    v.constant_term = -1.0 / 3.0;
    v.nu_upper = std::max(1.0, v.leading_term + v.linear_term + v.constant_term);
    return v;
}

std::vector<LiteratureBound> literature_bounds(double ra, double ek) {
    if (!(ra > 0.0) || !(ek > 0.0)) throw std::domain_error("literature_bounds: Ra and Ek must be positive");
    return {
        {"lit_ra2ek", 1.0 + 9.5 * ra * ra * ek},
        {"lit_ra2_5", 0.6635 * std::pow(ra, 0.4)},
        {"lit_ra4_11", 2.0 * std::pow(ra, 4.0 / 11.0) * std::pow(1.0 + 1.0 / (2.0 * ek), 4.0 / 11.0)},
    };
}

}  // namespace ekbound
