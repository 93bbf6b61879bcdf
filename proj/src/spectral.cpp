#include "ekbound/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "ekbound/basis.hpp"
#include "ekbound/quadrature.hpp"
#include "green_batch.hpp"

namespace ekbound {

namespace {

// Largest eigenvalue of the mass matrix, cached per size.
double mass_lambda_max(int size) {
    static std::mutex mu;
    static std::map<int, double> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(size);
    if (it != cache.end()) return it->second;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(basis_mass_matrix(size), Eigen::EigenvaluesOnly);
    const double v = es.eigenvalues().maxCoeff();
    cache.emplace(size, v);
    return v;
}

// int_0^z sqrt(min(t, 1 - t)) dt
double root_distance_integral(double z) {
    const double half = (2.0 / 3.0) * std::pow(0.5, 1.5);
    if (z <= 0.5) return (2.0 / 3.0) * std::pow(z, 1.5);
    return 2.0 * half - (2.0 / 3.0) * std::pow(1.0 - z, 1.5);
}

double max_weight(double b, const PiecewiseLinearProfile& profile) {
    double m = 0.0;
    for (std::size_t i = 0; i < profile.segments(); ++i) m = std::max(m, std::abs(b - profile.slope(i)));
    return m;
}

void check_b(double b, const char* who) {
    if (!(b > 1.0) || !std::isfinite(b)) throw std::domain_error(std::string(who) + ": b must exceed 1");
}

}  // namespace

double U_from_profile(const PiecewiseLinearProfile& profile, double b) {
    check_b(b, "U_from_profile");
    return 1.0 + phi_prime_l2sq(profile) / (4.0 * (b - 1.0));
}

std::vector<double> assembly_edges(double k, std::span<const double> bp, int dim) {
    const int nt = std::max(8, dim / 4);
    std::vector<double> e;
    e.reserve(static_cast<std::size_t>(nt) + bp.size() + 40);
    for (int j = 0; j <= nt; ++j) e.push_back(0.5 * (1.0 - std::cos(std::numbers::pi * j / nt)));
    e.front() = 0.0;
    e.back() = 1.0;
    e.insert(e.end(), bp.begin(), bp.end());
    const double delta = (bp.size() <= 2) ? 0.5 : std::min({bp[1], 1.0 - bp[bp.size() - 2], 0.5});
    if (delta < 0.5) {
        for (int j = 1; j <= 6; ++j) {
            const double d = std::ldexp(delta, -j);
            e.push_back(d);
            e.push_back(1.0 - d);
        }
    }
    const double lam = k * k * k;
    for (double x : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0}) {
        const double d = x / lam;
        if (d >= 0.5) break;
        e.push_back(d);
        e.push_back(1.0 - d);
    }
    return merge_edges(std::move(e));
}

std::vector<double> assembly_edges(double k, const PiecewiseLinearProfile& profile, int dim) {
    return assembly_edges(k, profile.breakpoints(), dim);
}

namespace {

// E_s^T diag(w) W_s for each profile segment s.
std::vector<Eigen::MatrixXd> segment_blocks(double k, const FlowParameters& params, std::span<const double> bp,
                                            int dim, int quad_order) {
    const auto edges = assembly_edges(k, bp, dim);
    const auto sb = detail::slave_basis(k, params, dim, edges, quad_order);
    const std::size_t nseg = bp.size() - 1;
    std::vector<Eigen::MatrixXd> out(nseg, Eigen::MatrixXd::Zero(dim, dim));
    const auto& r = sb.rule;
    std::size_t i = 0;
    const std::size_t n = r.nodes.size();
    while (i < n) {
        const std::size_t p = r.panel_of_node[i];
        std::size_t j = i;
        while (j < n && r.panel_of_node[j] == p) ++j;
        const double mid = 0.5 * (edges[p] + edges[p + 1]);
        const auto seg = static_cast<std::size_t>(std::upper_bound(bp.begin() + 1, bp.end() - 1, mid) - (bp.begin() + 1));
        const auto rows = static_cast<Eigen::Index>(j - i);
        const Eigen::Map<const Eigen::VectorXd> w(r.weights.data() + i, rows);
        out[seg].noalias() += sb.basis.middleRows(static_cast<Eigen::Index>(i), rows).transpose() *
                              (w.asDiagonal() * sb.velocity.middleRows(static_cast<Eigen::Index>(i), rows));
        i = j;
    }
    return out;
}

Eigen::MatrixXd mass_block(double k, double eps, int dim) {
    return k * k * basis_mass_matrix(dim) + eps * eps * Eigen::MatrixXd::Identity(dim, dim);
}

void fill_assembly(QuadraticFormAssembly& a, double b, std::span<const double> slopes, const Eigen::MatrixXd& mass,
                   const std::vector<Eigen::MatrixXd>& blocks) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.dim, a.dim);
    for (std::size_t s = 0; s < blocks.size(); ++s) c.noalias() -= (b - slopes[s]) * blocks[s];
    a.coupling_part = 0.5 * (c + c.transpose());
    a.diffusion_part = (b - 1.0) * mass;
    a.matrix = a.diffusion_part + a.coupling_part;
}

std::vector<double> slopes_of(const PiecewiseLinearProfile& profile) {
    std::vector<double> s(profile.segments());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = profile.slope(i);
    return s;
}

}  // namespace

QuadraticFormAssembly assemble_Sk(double k, const FlowParameters& params, double b,
                                  const PiecewiseLinearProfile& profile, int dim, int quad_order) {
    if (dim < 4) throw std::invalid_argument("assemble_Sk: dim must be >= 4");
    if (!(k > 0.0)) throw std::domain_error("assemble_Sk: k must be positive");
    check_b(b, "assemble_Sk");
    QuadraticFormAssembly a;
    a.k = k;
    a.dim = dim;
    a.b = b;
    a.eps = params.eps;
    const auto blocks = segment_blocks(k, params, profile.breakpoints(), dim, quad_order);
    fill_assembly(a, b, slopes_of(profile), mass_block(k, params.eps, dim), blocks);
    return a;
}

double lambda_min(const Eigen::MatrixXd& m, int size) {
    const Eigen::Index n = (size < 0) ? m.rows() : size;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.topLeftCorner(n, n), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("lambda_min: eigensolver did not converge");
    return es.eigenvalues()[0];
}

double lambda_min(const QuadraticFormAssembly& a) { return lambda_min(a.matrix); }

double diffusion_norm(const QuadraticFormAssembly& a, int size) {
    const int n = (size < 0) ? a.dim : size;
    return (a.b - 1.0) * (a.k * a.k * mass_lambda_max(n) + a.eps * a.eps);
}

std::vector<double> default_k_grid(const PiecewiseLinearProfile& profile, int n) {
    if (n < 2) throw std::invalid_argument("default_k_grid: need at least 2 points");
    const double kstar = std::cbrt(constants().gamma / boundary_layer_width(profile));
    const double lo = std::log(1e-3 * kstar), hi = std::log(10.0 * kstar);
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (n - 1));
    return g;
}

bool tail_small_k(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile, double kmin) {
    check_b(b, "tail_small_k");
    if (!(kmin > 0.0) || kmin > 1.0 || !(params.eps < 2.0)) return false;
    const auto z = profile.breakpoints();
    double j = 0.0;
    for (std::size_t i = 0; i < profile.segments(); ++i) {
        j += std::abs(b - profile.slope(i)) * (root_distance_integral(z[i + 1]) - root_distance_integral(z[i]));
    }
    const double s = std::sqrt(params.eps / 2.0);
    return params.ra_tilde * (4.0 * s * kmin + 3.0 * kmin * kmin * kmin) * j <= 2.0 * (b - 1.0) * params.eps;
}

double large_k_threshold(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile) {
    check_b(b, "large_k_threshold");
    return std::pow(max_weight(b, profile) * params.ra_tilde / (b - 1.0), 0.25);
}

bool tail_large_k(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile, double kmax) {
    check_b(b, "tail_large_k");
    const double k2 = kmax * kmax;
    return k2 * k2 * (b - 1.0) >= max_weight(b, profile) * params.ra_tilde;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Feasible: return "feasible";
        case Verdict::Infeasible: return "infeasible";
        case Verdict::Unresolved: return "unresolved";
    }
    return "unknown";
}

namespace {

void check_grid(std::span<const double> k_grid) {
    if (k_grid.empty()) throw std::invalid_argument("verify_profile: empty k grid");
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        if (!(k_grid[i] > 0.0) || (i > 0 && !(k_grid[i] > k_grid[i - 1]))) {
            throw std::invalid_argument("verify_profile: k grid must be positive and strictly increasing");
        }
    }
}

template <class Fn>
void for_each_index(std::size_t n, int threads, Fn&& fn) {
    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// Builds the certificate from per-k assemblies produced by `make(i)`.
struct PointResult {
    double lambda = 0.0, coarse = 0.0, limit = 0.0, norm = 0.0, coarse_norm = 0.0;
    int stable = -1;
};

// lambda_min at dim, dim / 2 and down the ladder; the limit assumes the
// differences of the doubling ladder shrink geometrically.
PointResult evaluate_point(const QuadraticFormAssembly& a, int coarse_dim, const std::vector<int>& ladder) {
    PointResult r;
    r.lambda = lambda_min(a.matrix);
    r.norm = diffusion_norm(a);
    const int cd = std::max(1, coarse_dim);
    r.coarse = lambda_min(a.matrix, cd);
    r.coarse_norm = diffusion_norm(a, cd);
    r.limit = r.lambda;
    std::vector<double> v{r.lambda};
    for (std::size_t l = 1; l < ladder.size(); ++l) {
        v.push_back(ladder[l] == cd ? r.coarse : lambda_min(a.matrix, ladder[l]));
    }
    for (std::size_t l = 1; l < v.size(); ++l) {
        if (std::abs(v[l] - r.lambda) <= 1e-6 * std::abs(r.lambda)) {
            r.stable = ladder[l];
        } else {
            break;
        }
    }
    if (v.size() >= 2) {
        const double d2 = v[0] - v[1];
        if (d2 < 0.0) {
            constexpr double rmax = 0.9;
            double ratio = rmax;
            if (v.size() >= 3) {
                const double d1 = v[1] - v[2];
                if (d1 < 0.0) ratio = std::min(d2 / d1, rmax);
            }
            r.limit = v[0] + d2 * ratio / (1.0 - ratio);
        }
    }
    return r;
}

// make(k, index, dim) builds the assembly at k; index is the grid position or
// npos for refined wavenumbers.
template <class Make>
Certificate sweep(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile,
                  std::span<const double> k_grid, const VerifyOptions& opt, Make&& make) {
    if (!(opt.tol >= 0.0)) throw std::invalid_argument("verify_profile: tol must be nonnegative");
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    Certificate cert;
    cert.tolerance = opt.tol;
    cert.dim = opt.dim;
    cert.coarse_dim = opt.dim / 2;

    std::vector<int> ladder;
    for (int d = opt.dim; d >= 4 && static_cast<int>(ladder.size()) < 4; d /= 2) ladder.push_back(d);
    if (!opt.stabilization) ladder.resize(1);

    std::vector<double> ks(k_grid.begin(), k_grid.end());
    std::vector<PointResult> res(ks.size());
    for_each_index(ks.size(), opt.threads,
                   [&](std::size_t i) { res[i] = evaluate_point(make(ks[i], i, opt.dim), cert.coarse_dim, ladder); });

    // Parabolic steps in log k toward the lowest interior minima.
    auto scaled = [&](std::size_t i) { return std::min(res[i].lambda, res[i].limit) / res[i].norm; };
    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < ks.size(); ++i) {
        if (scaled(i) <= scaled(i - 1) && scaled(i) <= scaled(i + 1)) minima.push_back(i);
    }
    std::sort(minima.begin(), minima.end(), [&](std::size_t x, std::size_t y) { return scaled(x) < scaled(y); });
    if (minima.size() > static_cast<std::size_t>(std::max(0, opt.refine_minima))) {
        minima.resize(static_cast<std::size_t>(std::max(0, opt.refine_minima)));
    }
    struct Probe {
        double x[3], f[3];
        double k = 0.0;
        PointResult r;
        bool active = false;
    };
    std::vector<Probe> probes;
    for (std::size_t i : minima) {
        Probe p;
        for (int j = 0; j < 3; ++j) {
            p.x[j] = std::log(ks[i + j - 1]);
            p.f[j] = scaled(i + j - 1);
        }
        probes.push_back(p);
    }
    for (int step = 0; step < 2 && !probes.empty(); ++step) {
        for (auto& p : probes) {
            const double d1 = (p.f[1] - p.f[0]) / (p.x[1] - p.x[0]);
            const double d2 = (p.f[2] - p.f[1]) / (p.x[2] - p.x[1]);
            const double curv = (d2 - d1) / (p.x[2] - p.x[0]);
            p.active = false;
            if (!(curv > 0.0)) continue;
            const double xv = 0.5 * (p.x[0] + p.x[1]) - d1 / (2.0 * curv);
            const double lo = p.x[0], hi = p.x[2], w = hi - lo;
            const double x = std::clamp(xv, lo + 1e-3 * w, hi - 1e-3 * w);
            if (std::abs(x - p.x[1]) <= 1e-3 * w) continue;
            p.k = std::exp(x);
            p.active = true;
        }
        for_each_index(probes.size(), opt.threads, [&](std::size_t j) {
            if (probes[j].active) probes[j].r = evaluate_point(make(probes[j].k, npos, opt.dim), cert.coarse_dim, ladder);
        });
        for (auto& p : probes) {
            if (!p.active) continue;
            ks.push_back(p.k);
            res.push_back(p.r);
            const double x = std::log(p.k);
            const double f = std::min(p.r.lambda, p.r.limit) / p.r.norm;
            // Keep the three points that bracket the smallest value.
            if (x < p.x[1]) {
                if (f <= p.f[1]) {
                    p.x[2] = p.x[1], p.f[2] = p.f[1];
                    p.x[1] = x, p.f[1] = f;
                } else {
                    p.x[0] = x, p.f[0] = f;
                }
            } else {
                if (f <= p.f[1]) {
                    p.x[0] = p.x[1], p.f[0] = p.f[1];
                    p.x[1] = x, p.f[1] = f;
                } else {
                    p.x[2] = x, p.f[2] = f;
                }
            }
        }
    }
    cert.refined = static_cast<int>(ks.size() - k_grid.size());

    // Wavenumbers inside either analytic tail need no convergence check.
    const double k_covered = large_k_threshold(params, b, profile);
    auto covered = [&](double k) { return k >= k_covered || tail_small_k(params, b, profile, k); };

    // Recheck at 2 dim where the limit is negative but lambda_min is not.
    if (opt.deepen && ladder.size() >= 2) {
        std::vector<std::size_t> deep;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const auto& r = res[i];
            if (r.lambda >= -opt.tol * r.norm && r.limit < -opt.tol * r.norm && !covered(ks[i])) deep.push_back(i);
        }
        const std::vector<int> ladder2{2 * opt.dim, opt.dim, opt.dim / 2};
        for_each_index(deep.size(), opt.threads, [&](std::size_t j) {
            const std::size_t i = deep[j];
            res[i].limit = evaluate_point(make(ks[i], i, 2 * opt.dim), opt.dim, ladder2).limit;
        });
        cert.deepened = static_cast<int>(deep.size());
    }

    std::vector<std::size_t> order(ks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return ks[x] < ks[y]; });
    const std::size_t nk = ks.size();
    cert.k_grid.resize(nk);
    cert.lambda_min.resize(nk);
    cert.lambda_min_coarse.resize(nk);
    cert.lambda_min_limit.resize(nk);
    cert.diffusion_norm.resize(nk);

    bool all_fine = true, robust_infeasible = false, unsettled = false;
    double worst = INFINITY;
    int stabilization = 0;
    for (std::size_t n = 0; n < nk; ++n) {
        const auto& r = res[order[n]];
        cert.k_grid[n] = ks[order[n]];
        cert.lambda_min[n] = r.lambda;
        cert.lambda_min_coarse[n] = r.coarse;
        cert.lambda_min_limit[n] = r.limit;
        cert.diffusion_norm[n] = r.norm;
        const bool fine = r.lambda >= -opt.tol * r.norm;
        const bool coarse = r.coarse >= -opt.tol * r.coarse_norm;
        const bool limit = r.limit >= -opt.tol * r.norm;
        all_fine = all_fine && fine;
        if (!fine && !coarse) robust_infeasible = true;
        if ((!fine && coarse) || (!limit && !covered(cert.k_grid[n]))) unsettled = true;
        const double s = r.lambda / r.norm;
        if (s < worst) {
            worst = s;
            cert.worst_index = n;
        }
        if (stabilization >= 0) stabilization = (r.stable < 0) ? -1 : std::max(stabilization, r.stable);
    }
    cert.stabilization_dim = opt.stabilization ? stabilization : -1;
    cert.tail_small_k_ok = tail_small_k(params, b, profile, k_grid.front());
    cert.tail_large_k_ok = tail_large_k(params, b, profile, k_grid.back());
    cert.feasible = all_fine && cert.tail_small_k_ok && cert.tail_large_k_ok;
    cert.resolved = cert.coarse_dim >= 4 && !unsettled;
    if (robust_infeasible) {
        cert.verdict = Verdict::Infeasible;
    } else if (cert.feasible && cert.resolved) {
        cert.verdict = Verdict::Feasible;
    } else {
        cert.verdict = Verdict::Unresolved;
    }
    return cert;
}

}  // namespace

Certificate verify_profile(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile,
                           std::span<const double> k_grid, const VerifyOptions& opt) {
    check_b(b, "verify_profile");
    check_grid(k_grid);
    return sweep(params, b, profile, k_grid, opt, [&](double k, std::size_t, int dim) {
        return assemble_Sk(k, params, b, profile, dim, opt.quad_order);
    });
}

LayoutSweep::LayoutSweep(const FlowParameters& params, std::span<const double> breakpoints,
                         std::span<const double> k_grid, const VerifyOptions& options)
    : params_(params), options_(options), z_(breakpoints.begin(), breakpoints.end()), k_(k_grid.begin(), k_grid.end()) {
    check_grid(k_grid);
    if (options.dim < 4) throw std::invalid_argument("LayoutSweep: dim must be >= 4");
    if (z_.size() < 2 || z_.front() != 0.0 || z_.back() != 1.0) {
        throw std::invalid_argument("LayoutSweep: breakpoints must span [0, 1]");
    }
    blocks_.resize(k_.size());
    for_each_index(k_.size(), options.threads, [&](std::size_t i) {
        blocks_[i].mass = mass_block(k_[i], params.eps, options.dim);
        blocks_[i].segment = segment_blocks(k_[i], params, z_, options.dim, options.quad_order);
    });
}

Certificate LayoutSweep::verify(double b, const PiecewiseLinearProfile& profile) const {
    check_b(b, "LayoutSweep::verify");
    const auto bp = profile.breakpoints();
    if (!std::equal(bp.begin(), bp.end(), z_.begin(), z_.end())) {
        throw std::invalid_argument("LayoutSweep::verify: profile layout differs");
    }
    const auto slopes = slopes_of(profile);
    return sweep(params_, b, profile, k_, options_, [&](double k, std::size_t i, int dim) {
        QuadraticFormAssembly a;
        a.k = k;
        a.dim = dim;
        a.b = b;
        a.eps = params_.eps;
        if (i < blocks_.size() && dim == options_.dim) {
            fill_assembly(a, b, slopes, blocks_[i].mass, blocks_[i].segment);
        } else {
            fill_assembly(a, b, slopes, mass_block(k, params_.eps, dim),
                          segment_blocks(k, params_, z_, dim, options_.quad_order));
        }
        return a;
    });
}

Certificate verify_profile(const FlowParameters& params, double b, const PiecewiseLinearProfile& profile,
                           std::span<const double> k_grid, int dim, double tol) {
    VerifyOptions opt;
    opt.dim = dim;
    opt.tol = tol;
    return verify_profile(params, b, profile, k_grid, opt);
}

bool certified_verify_recipe(const FlowParameters& p, const RecipeParameters& rp) {
    constexpr double slack = 1e-12;
    if (!(p.eps > 0.0 && p.eps < 2.0)) return false;
    if (!(rp.b > 1.0) || rp.c != rp.b) return false;
    if (!(rp.d1 > 0.0) || !(rp.d2 >= 0.0)) return false;
    if (rp.d1 + rp.d2 > (rp.b - 1.0) * (1.0 + slack)) return false;
    if (!(rp.delta > 0.0) || rp.delta > 0.5) return false;
    if (p.ra_tilde == 0.0) return true;
    const auto& c = constants();
    const double rt = p.ra_tilde;
    const double arm1 = 16.0 * rp.d1 * rp.d1 * p.eps * p.eps / (5.0 * rp.b * rp.b * rt * rt);
    const double arm2 = 8.0 * rp.d2 * std::sqrt(c.gamma) * p.eps / (rp.b * rt * std::sqrt(c.L));
    return rp.delta <= arm1 * (1.0 + slack) && rp.delta <= arm2 * (1.0 + slack);
}

}  // namespace ekbound
