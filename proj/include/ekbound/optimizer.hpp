#pragma once

#include <optional>
#include <string>

#include "ekbound/core.hpp"
#include "ekbound/estimates.hpp"
#include "ekbound/spectral.hpp"

namespace ekbound {

struct BoundResult {
    BoundValue bound;
    double b = 4.0;
    PiecewiseLinearProfile profile;
    std::optional<Certificate> certificate;  // full-resolution eigenvalue sweep
    bool recipe_check = false;                // certified_verify_recipe on the returned point
    int evaluations = 0;                      // feasibility sweeps spent, including the final one
    BoundMethod method = BoundMethod::Recipe;
    bool improved = false;                    // beat the seed
    std::string note;                         // seed-only / stagnation / fallback reasons

    /// Certificate verdict is feasible or the closed-form premise check passed.
    bool certified() const;
};

struct OptimizerOptions {
    int budget = 200;  // feasibility sweeps per search
    // Screening sweeps during the search.
    int search_dim = 48;
    int search_k_points = 64;
    int search_quad_order = 16;
    // Final certificate.
    int certify_dim = 128;
    int certify_k_points = 200;
    int certify_quad_order = 16;
    int max_certify = 6;  // full certificates per search
    double tol = 1e-8;
    int threads = 1;
    // Family search.
    double b_min = 1.5;
    double b_max = 12.0;
    double delta_rel_tol = 1e-3;
    double b_rel_tol = 1e-2;
    // Profile search.
    int n_segments = 7;
};

/// Closed-form recipe, profile and premise check. Never runs an eigenvalue sweep.
BoundResult paper_recipe_bound(const FlowParameters& params);

/// Largest delta accepted by the closed-form premises for balance parameter b,
/// with d1 + d2 = b - 1 split so that both arms agree.
double admissible_delta(const FlowParameters& params, double b);

/// Two-parameter family (c = b) searched over b and delta. Seeded at the recipe.
BoundResult optimize_family(const FlowParameters& params, const OptimizerOptions& options = {});

/// Odd-symmetric piecewise-linear profile on breakpoints delta_f 2^j (and
/// mirrors), values and b searched by a trust-region method. Seeded at `seed` when
/// given, otherwise at optimize_family. Throws std::invalid_argument for
/// n_segments < 3.
BoundResult optimize_profile(const FlowParameters& params, const OptimizerOptions& options = {},
                             const BoundResult* seed = nullptr);

}  // namespace ekbound
