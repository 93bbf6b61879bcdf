#include "ekbound/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace ekbound {

namespace {

GaussRule build_rule(int n) {
    GaussRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    // Newton on P_n from the Tricomi initial guess; symmetric fill.
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged root for the weight.
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        r.nodes[lo] = -x;
        r.nodes[hi] = x;
        r.weights[lo] = w;
        r.weights[hi] = w;
    }
    if (n % 2 == 1) r.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
    return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

PanelRule map_to_panels(std::span<const double> edges, int order) {
    const GaussRule& g = gauss_legendre(order);
    PanelRule r;
    r.panel_edges.assign(edges.begin(), edges.end());
    const std::size_t np = edges.size() - 1;
    r.nodes.reserve(np * g.nodes.size());
    r.weights.reserve(np * g.nodes.size());
    r.panel_of_node.reserve(np * g.nodes.size());
    for (std::size_t p = 0; p < np; ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        const double mid = 0.5 * (edges[p + 1] + edges[p]);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            r.nodes.push_back(mid + half * g.nodes[i]);
            r.weights.push_back(half * g.weights[i]);
            r.panel_of_node.push_back(p);
        }
    }
    return r;
}

std::vector<double> merge_edges(std::vector<double> edges) {
    std::sort(edges.begin(), edges.end());
    std::vector<double> out;
    out.reserve(edges.size());
    for (double e : edges) {
        if (out.empty() || e > out.back()) out.push_back(e);
    }
    return out;
}

std::vector<double> graded_edges(double a, double b, double peak, double rate, int base) {
    const double len = b - a;
    if (!(len > 0.0)) return {a, b};
    std::vector<double> e;
    for (int i = 0; i < base; ++i) e.push_back(a + len * i / base);
    if (rate > 0.0) {
        // exp(-x) is below 1e-21 past the last offset.
        static constexpr double offsets[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0};
        for (double x : offsets) {
            const double d = x / rate;
            if (d >= len) break;
            e.push_back(peak == a ? a + d : b - d);
        }
    }
    auto merged = merge_edges(std::move(e));
    std::vector<double> out;
    const double min_gap = len * 1e-13;
    for (double x : merged) {
        if (out.empty() || x - out.back() > min_gap) out.push_back(x);
    }
    if (b - out.back() <= min_gap && out.size() > 1) out.pop_back();
    out.push_back(b);
    return out;
}

}  // namespace ekbound
