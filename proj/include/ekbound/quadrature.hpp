#pragma once

#include <span>
#include <vector>

namespace ekbound {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached n-point rule (n >= 1). Thread-safe; the returned reference stays
/// valid for the life of the program.
const GaussRule& gauss_legendre(int n);

/// A rule mapped onto a collection of panels.
struct PanelRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<std::size_t> panel_of_node;
    std::vector<double> panel_edges;  // size = panels + 1
};

/// Maps an order-n Gauss rule onto each panel [edges[i], edges[i+1]].
PanelRule map_to_panels(std::span<const double> edges, int order);

/// Panel edges on [a, b] refined geometrically toward `peak` (a or b) so
/// that an integrand containing exp(-rate |s - peak|) is resolved: edges at
/// distances 1/rate, 2/rate, 4/rate, ... from the peak, plus `base` uniform
/// panels over [a, b]. Duplicate and near-duplicate edges are merged.
std::vector<double> graded_edges(double a, double b, double peak, double rate, int base);

/// Sorted union of edge sets with duplicates removed.
std::vector<double> merge_edges(std::vector<double> edges);

}  // namespace ekbound
