#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ekbound/core.hpp"
#include "ekbound/estimates.hpp"

namespace ekbound {

/// 1 + ||phi'||^2 / (4 (b - 1)). Throws std::domain_error for b <= 1.
double U_from_profile(const PiecewiseLinearProfile& profile, double b);

/// S_k restricted to the first `dim` basis functions:
///   (b-1)(k^2 ||theta||^2 + eps^2 ||theta'||^2) - int (b - phi') w[theta] theta dz.
struct QuadraticFormAssembly {
    double k = 0.0;
    int dim = 0;
    double b = 0.0;
    double eps = 0.0;
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd diffusion_part;
    Eigen::MatrixXd coupling_part;
};

/// Outer quadrature panels used by assemble_Sk: a Chebyshev-spaced mesh,
/// the profile breakpoints, geometric clustering inside the wall layers and
/// grading toward both walls on the 1/k^3 scale.
std::vector<double> assembly_edges(double k, const PiecewiseLinearProfile& profile, int dim);
std::vector<double> assembly_edges(double k, std::span<const double> breakpoints, int dim);

/// Throws std::invalid_argument for dim < 4 and std::domain_error for b <= 1.
QuadraticFormAssembly assemble_Sk(double k, const FlowParameters& params, double b,
                                  const PiecewiseLinearProfile& profile, int dim, int quad_order = 32);

/// Smallest eigenvalue of a symmetric matrix (optionally of its leading
/// size x size block).
double lambda_min(const Eigen::MatrixXd& m, int size = -1);
double lambda_min(const QuadraticFormAssembly& a);

/// Spectral norm of the diffusion part of the leading size x size block.
double diffusion_norm(const QuadraticFormAssembly& a, int size = -1);

/// 200 log-spaced wavenumbers on [1e-3 k*, 10 k*], k* = (gamma / delta)^{1/3},
/// with delta the profile's wall-layer width.
std::vector<double> default_k_grid(const PiecewiseLinearProfile& profile, int n = 200);

/// Analytic tails. Small k: Ra~ (4 s k + 3 k^3) J <= 2 (b-1) eps at k = kmin
/// (kmin <= 1), with J = int |b - phi'| sqrt(min(z, 1-z)) dz and s = sqrt(eps/2).
/// Large k: kmax^4 >= max|b - phi'| Ra~ / (b - 1).
bool tail_small_k(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile, double kmin);
bool tail_large_k(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile, double kmax);

/// Smallest wavenumber above which the large-k tail holds.
double large_k_threshold(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile);

enum class Verdict { Feasible, Infeasible, Unresolved };
const char* verdict_name(Verdict v);

struct VerifyOptions {
    int dim = 128;
    double tol = 1e-8;
    int quad_order = 32;
    int threads = 1;
    bool stabilization = true;  // false skips the dim ladder (and the extrapolation)
    int refine_minima = 3;      // lowest interior local minima refined in k; 0 disables
    bool deepen = true;         // recheck at 2 dim where the extrapolated limit is negative
};

/// Per-k arrays include the refined wavenumbers, in increasing k.
struct Certificate {
    std::vector<double> k_grid;
    std::vector<double> lambda_min;         // at dim
    std::vector<double> lambda_min_coarse;  // at dim / 2
    std::vector<double> lambda_min_limit;   // extrapolated from dim / 4, dim / 2, dim (or dim / 2, dim, 2 dim)
    std::vector<double> diffusion_norm;     // per k, at dim
    bool tail_small_k_ok = false;
    bool tail_large_k_ok = false;
    bool feasible = false;
    // Refinement pair available, no sign change between dim / 2 and dim, and
    // no extrapolated lambda_min below tolerance outside the analytic tails.
    bool resolved = false;
    Verdict verdict = Verdict::Unresolved;
    double tolerance = 0.0;  // relative to diffusion_norm
    int dim = 0;
    int coarse_dim = 0;
    int stabilization_dim = -1;  // -1: lambda_min still moving at dim
    std::size_t worst_index = 0;  // k with the smallest scaled lambda_min
    int refined = 0;              // wavenumbers added by refinement
    int deepened = 0;             // wavenumbers rechecked at 2 dim
};

Certificate verify_profile(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile,
                           std::span<const double> k_grid, const VerifyOptions& options);

Certificate verify_profile(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile,
                           std::span<const double> k_grid, int dim, double tol);

/// Sweep over a fixed k grid for profiles that share one breakpoint layout.
/// The slaved basis is computed once per k; verify() only recombines the
/// per-segment coupling blocks with the new b and slopes.
class LayoutSweep {
public:
    LayoutSweep(const FlowParameters& params, std::span<const double> breakpoints, std::span<const double> k_grid,
                const VerifyOptions& options);

    /// Same result as verify_profile on this layout. Throws
    /// std::invalid_argument if the profile's breakpoints differ.
    Certificate verify(double b, const PiecewiseLinearProfile& profile) const;

    std::span<const double> breakpoints() const { return z_; }
    std::span<const double> k_grid() const { return k_; }

private:
    struct Blocks {
        Eigen::MatrixXd mass;                  // k^2 M + eps^2 I
        std::vector<Eigen::MatrixXd> segment;  // E_s^T diag(w) W_s per profile segment
    };
    FlowParameters params_;
    VerifyOptions options_;
    std::vector<double> z_;
    std::vector<double> k_;
    std::vector<Blocks> blocks_;
};

/// Exact premise check of the closed-form recipe: d1 + d2 <= b - 1, c = b,
/// delta below both admissibility arms and 1/2, eps < 2.
bool certified_verify_recipe(const FlowParameters& params, const RecipeParameters& rp);

}  // namespace ekbound
