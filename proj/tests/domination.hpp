#pragma once

// Randomized comparison of every analytic estimate against the exact
// quantity from the slaving solver. Shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "ekbound/basis.hpp"
#include "ekbound/estimates.hpp"
#include "ekbound/quadrature.hpp"
#include "ekbound/slaving.hpp"

namespace testutil {

struct DominationKind {
    int cases = 0;
    int violations = 0;
    double worst_ratio = 0.0;  // largest exact / bound
};

struct DominationReport {
    std::map<std::string, DominationKind> kinds;
    std::string first_violation;

    int cases() const {
        int n = 0;
        for (const auto& [_, k] : kinds) n += k.cases;
        return n;
    }
    int violations() const {
        int n = 0;
        for (const auto& [_, k] : kinds) n += k.violations;
        return n;
    }
};

namespace detail {

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

inline ekbound::TestField random_theta(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ud(1, 14);
    std::normal_distribution<double> nd;
    const int dim = ud(rng);
    const bool damped = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    std::vector<double> c(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] = nd(rng) / (damped ? i + 1.0 : 1.0);
    return ekbound::TestField(std::move(c));
}

// (b / 2 delta) * int over [0, delta] and [1 - delta, 1] of |f|, graded toward both walls.
template <class F>
double layer_integral(F&& f, double delta, double rate, double b) {
    double s = 0.0;
    for (const auto& [a, c, peak] : {std::tuple{0.0, delta, 0.0}, std::tuple{1.0 - delta, 1.0, 1.0}}) {
        auto edges = ekbound::graded_edges(a, c, peak, rate, 8);
        const auto r = ekbound::map_to_panels(edges, 20);
        for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::abs(f(r.nodes[i]));
    }
    return b / (2.0 * delta) * s;
}

}  // namespace detail

inline DominationReport run_domination_suite(std::uint64_t seed, int per_kind) {
    using namespace ekbound;
    DominationReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto record = [&](const std::string& kind, double exact, double bound, const std::string& where) {
        auto& k = rep.kinds[kind];
        ++k.cases;
        const double ratio = bound > 0.0 ? exact / bound : (exact > 0.0 ? INFINITY : 0.0);
        k.worst_ratio = std::max(k.worst_ratio, ratio);
        if (exact > bound * (1.0 + 1e-9) + 1e-300) {
            ++k.violations;
            if (rep.first_violation.empty()) {
                std::ostringstream os;
                os.precision(17);
                os << kind << ": " << exact << " > " << bound << " at " << where;
                rep.first_violation = os.str();
            }
        }
    };

    for (int t = 0; t < per_kind; ++t) {
        const double eps = detail::log_uniform(rng, 1e-3, 1.5);
        const double rt = detail::log_uniform(rng, 1e-2, 1e3);
        const double b = 1.2 + 6.8 * unit(rng);
        const double delta = detail::log_uniform(rng, 1e-5, 0.5);
        const auto p = params_from_scaled(rt, eps);
        const auto theta = detail::random_theta(rng);
        const double n0 = theta.l2_norm(), n1 = theta.dz_l2_norm();
        const auto fn = theta.as_function();

        std::ostringstream where;
        where.precision(17);
        where << "t=" << t << " eps=" << eps << " Ra~=" << rt << " b=" << b << " delta=" << delta;

        // h'(0), h'(1) at any k.
        {
            const double k = detail::log_uniform(rng, 0.05, 8.0);
            const double bound = hk_prime_bound(k, rt, n0);
            const double d0 = green_dz0(k, rt, fn, 32), d1 = green_dz1(k, rt, fn, 32);
            record("hk_prime", std::max(std::abs(d0), std::abs(d1)), bound, where.str() + " k=" + std::to_string(k));
        }
        // |A|, |B| for k > 1.
        const double kl = 1.0 + 5.0 * unit(rng) + 1e-9;
        const auto sl = solve_slaving(kl, p, fn);
        {
            const auto ab = AB_bounds(kl, rt, n0);
            record("A", std::abs(sl.A_scaled), ab.a_bound_scaled, where.str() + " k=" + std::to_string(kl));
            record("B", std::abs(sl.B), ab.b_bound, where.str() + " k=" + std::to_string(kl));
        }
        // |c1|, |c2| for k <= 1.
        const double ks = std::min(1.0, 0.02 + unit(rng));
        const auto ss = solve_slaving(ks, p, fn);
        {
            const auto cc = c1c2_bounds(ks, eps, rt, n0);
            record("c1", std::abs(ss.c1), cc.c1_bound, where.str() + " k=" + std::to_string(ks));
            record("c2", std::abs(ss.c2), cc.c2_bound, where.str() + " k=" + std::to_string(ks));
        }
        // Exponential part in the boundary layers against p(k).
        for (const auto* s : {&sl, &ss}) {
            const double k = s->k;
            const double exact = detail::layer_integral(
                [&](double z) { return theta.value(z) * s->exponential_part(z); }, delta, k * k * k, b);
            record(k > 1.0 ? "layer_exp_large_k" : "layer_exp_small_k", exact,
                   p_of_k(k, b, rt, eps, delta) * n1 * n0, where.str() + " k=" + std::to_string(k));
        }
        // Dirichlet part in the boundary layers against the Green bound.
        {
            const double k = detail::log_uniform(rng, 0.05, 8.0);
            const auto sg = solve_slaving(k, p, fn);
            const double exact = detail::layer_integral(
                [&](double z) { return theta.value(z) * sg.h(z); }, delta, std::max(1.0, k * k * k), b);
            record("green_boundary", exact, green_boundary_coefficient(k, b, rt, delta) * n0 * n1,
                   where.str() + " k=" + std::to_string(k));
        }
    }
    return rep;
}

}  // namespace testutil
