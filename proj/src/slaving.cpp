#include "ekbound/slaving.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ekbound/quadrature.hpp"

namespace ekbound {

namespace {

// 1 - e^{-x} without cancellation for small x.
inline double one_minus_exp(double x) { return -std::expm1(-x); }

constexpr double kBasePanelsPerUnit = 16.0;
constexpr double kResolutionTol = 1e-8;

void check_k(double k, const char* who) {
    if (!(k > 0.0) || !std::isfinite(k)) throw std::domain_error(std::string(who) + ": k must be positive");
}

int base_panels(double len) { return std::max(1, static_cast<int>(std::ceil(kBasePanelsPerUnit * len))); }

template <class Kernel>
double integrate_graded(double a, double b, double peak, double rate, int order, const Kernel& kern) {
    if (!(b > a)) return 0.0;
    const auto edges = graded_edges(a, b, peak, rate, base_panels(b - a));
    const GaussRule& g = gauss_legendre(order);
    double sum = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        const double mid = 0.5 * (edges[p + 1] + edges[p]);
        double part = 0.0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) part += g.weights[i] * kern(mid + half * g.nodes[i]);
        sum += half * part;
    }
    return sum;
}

double check_pair(double lo, double hi, double scale, const char* who) {
    if (std::abs(lo - hi) > kResolutionTol * std::max(scale, std::abs(hi)) && std::abs(hi) > 0.0) {
        throw ResolutionError(std::string(who) + ": quadrature orders disagree beyond 1e-8");
    }
    return hi;
}

}  // namespace

double greens_kernel(double k, double z, double s) {
    check_k(k, "greens_kernel");
    if (!(z >= 0.0 && z <= 1.0 && s >= 0.0 && s <= 1.0)) {
        throw std::domain_error("greens_kernel: (z, s) must lie in the unit square");
    }
    const double lam = k * k * k;
    const double lo = std::min(z, s);
    const double hi = std::max(z, s);
    if (lo == 0.0 || hi == 1.0) return 0.0;
    return std::exp(-lam * (hi - lo)) * one_minus_exp(2.0 * lam * lo) * one_minus_exp(2.0 * lam * (1.0 - hi)) /
           (2.0 * one_minus_exp(2.0 * lam));
}

double greens_kernel_dz0(double k, double s) {
    const double lam = k * k * k;
    return lam * std::exp(-lam * s) * one_minus_exp(2.0 * lam * (1.0 - s)) / one_minus_exp(2.0 * lam);
}

double greens_kernel_dz1(double k, double s) {
    const double lam = k * k * k;
    return -lam * std::exp(-lam * (1.0 - s)) * one_minus_exp(2.0 * lam * s) / one_minus_exp(2.0 * lam);
}

double green_integral(double k, double ra_tilde, double z, const ScalarFn& f, int order) {
    check_k(k, "green_integral");
    if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("green_integral: z must lie in [0, 1]");
    if (z == 0.0 || z == 1.0) return 0.0;
    const double lam = k * k * k;
    auto kern = [&](double s) { return greens_kernel(k, z, s) * f(s); };
    const double lower = integrate_graded(0.0, z, z, lam, order, kern);
    const double upper = integrate_graded(z, 1.0, z, lam, order, kern);
    return ra_tilde * k * (lower + upper);
}

std::vector<double> green_integral_on_grid(double k, double ra_tilde, std::span<const double> grid, const ScalarFn& f,
                                           int order) {
    check_k(k, "green_integral_on_grid");
    const std::size_t n = grid.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0) || (i > 0 && grid[i] < grid[i - 1])) {
            throw std::domain_error("green_integral_on_grid: grid must be sorted inside [0, 1]");
        }
    }
    const double lam = k * k * k;
    // Knots: 0, the grid, 1. lower(t) = int_0^t e^{lam (s - t)} (1 - e^{-2 lam s}) f ds,
    // upper(t) = int_t^1 e^{lam (t - s)} (1 - e^{-2 lam (1 - s)}) f ds.
    std::vector<double> t;
    t.reserve(n + 2);
    t.push_back(0.0);
    t.insert(t.end(), grid.begin(), grid.end());
    t.push_back(1.0);
    const std::size_t m = t.size();
    std::vector<double> lower(m, 0.0), upper(m, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double a = t[i], b = t[i + 1];
        if (b == a) {
            lower[i + 1] = lower[i];
            continue;
        }
        const double piece = integrate_graded(a, b, b, lam, order, [&](double s) {
            return std::exp(lam * (s - b)) * one_minus_exp(2.0 * lam * s) * f(s);
        });
        lower[i + 1] = std::exp(-lam * (b - a)) * lower[i] + piece;
    }
    for (std::size_t i = m - 1; i-- > 0;) {
        const double a = t[i], b = t[i + 1];
        if (b == a) {
            upper[i] = upper[i + 1];
            continue;
        }
        const double piece = integrate_graded(a, b, a, lam, order, [&](double s) {
            return std::exp(lam * (a - s)) * one_minus_exp(2.0 * lam * (1.0 - s)) * f(s);
        });
        upper[i] = std::exp(-lam * (b - a)) * upper[i + 1] + piece;
    }
    const double denom = 2.0 * one_minus_exp(2.0 * lam);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = grid[i];
        if (z == 0.0 || z == 1.0) continue;
        const double lo = lower[i + 1] * one_minus_exp(2.0 * lam * (1.0 - z));
        const double hi = upper[i + 1] * one_minus_exp(2.0 * lam * z);
        out[i] = ra_tilde * k * (lo + hi) / denom;
    }
    return out;
}

double green_dz0(double k, double ra_tilde, const ScalarFn& f, int order) {
    check_k(k, "green_dz0");
    const double lam = k * k * k;
    return ra_tilde * k *
           integrate_graded(0.0, 1.0, 0.0, lam, order, [&](double s) { return greens_kernel_dz0(k, s) * f(s); });
}

double green_dz1(double k, double ra_tilde, const ScalarFn& f, int order) {
    check_k(k, "green_dz1");
    const double lam = k * k * k;
    return ra_tilde * k *
           integrate_graded(0.0, 1.0, 1.0, lam, order, [&](double s) { return greens_kernel_dz1(k, s) * f(s); });
}

std::vector<double> uniform_grid(int n) {
    if (n < 2) throw std::invalid_argument("uniform_grid: need at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
    g.back() = 1.0;
    return g;
}

HField h_field(double k, double ra_tilde, const ScalarFn& theta, int quad_order, int n_grid) {
    check_k(k, "h_field");
    if (quad_order < 8) throw std::invalid_argument("h_field: quad_order must be >= 8");
    HField out;
    out.field.grid = uniform_grid(n_grid);
    const auto coarse = green_integral_on_grid(k, ra_tilde, out.field.grid, theta, quad_order);
    out.field.values = green_integral_on_grid(k, ra_tilde, out.field.grid, theta, quad_order + 8);
    double scale = 0.0;
    for (double v : out.field.values) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < coarse.size(); ++i) check_pair(coarse[i], out.field.values[i], scale, "h_field");
    const double d0 = green_dz0(k, ra_tilde, theta, quad_order);
    const double d1 = green_dz1(k, ra_tilde, theta, quad_order);
    out.dz0 = green_dz0(k, ra_tilde, theta, quad_order + 8);
    out.dz1 = green_dz1(k, ra_tilde, theta, quad_order + 8);
    const double dscale = std::max(std::abs(out.dz0), std::abs(out.dz1));
    check_pair(d0, out.dz0, dscale, "h_field");
    check_pair(d1, out.dz1, dscale, "h_field");
    return out;
}

HField h_field(double k, double ra_tilde, const TestField& theta, int quad_order, int n_grid) {
    return h_field(k, ra_tilde, theta.as_function(), quad_order, n_grid);
}

RobinCoefficients robin_coefficients(double k, double eps, double dh0, double dh1) {
    check_k(k, "robin_coefficients");
    if (!(eps > 0.0 && eps < 2.0)) throw std::domain_error("robin_coefficients: eps must lie in (0, 2)");
    const double lam = k * k * k;
    const double s = std::sqrt(eps / 2.0);
    const double e = std::exp(-lam);
    const double alpha = 1.0 + s * k;
    const double beta = 1.0 - s * k;
    // Ekman conditions written for w = a_scaled e^{k^3 (z-1)} + b e^{-k^3 z} + h:
    //   a_scaled e beta + b alpha = s h'(0) / k^2
    //   a_scaled alpha + b e beta = -s h'(1) / k^2
    const double r0 = s * dh0 / (k * k);
    const double r1 = -s * dh1 / (k * k);
    const double det = (e * beta) * (e * beta) - alpha * alpha;
    RobinCoefficients rc;
    rc.a_scaled = (r0 * e * beta - alpha * r1) / det;
    const double b = (e * beta * r1 - alpha * r0) / det;
    const double a = rc.a_scaled * e;
    rc.c1 = a - b;
    rc.c2 = a + b;
    rc.a = (rc.c1 + rc.c2) / 2.0;
    rc.b = (rc.c2 - rc.c1) / 2.0;
    return rc;
}

double SlavingSolution::exponential_part(double z) const {
    const double lam = k * k * k;
    return A_scaled * std::exp(lam * (z - 1.0)) + B * std::exp(-lam * z);
}

double SlavingSolution::h(double z) const {
    if (z <= 0.0 || z >= 1.0 || !theta) return 0.0;
    return green_integral(k, ra_tilde, z, theta, quad_order);
}

double SlavingSolution::operator()(double z) const { return exponential_part(z) + h(z); }

std::vector<double> SlavingSolution::evaluate(std::span<const double> grid) const {
    std::vector<double> out = theta ? green_integral_on_grid(k, ra_tilde, grid, theta, quad_order)
                                    : std::vector<double>(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] += exponential_part(grid[i]);
    return out;
}

double SlavingSolution::w0() const { return A_scaled * std::exp(-k * k * k) + B; }
double SlavingSolution::w1() const { return A_scaled + B * std::exp(-k * k * k); }

double SlavingSolution::dw0() const {
    const double lam = k * k * k;
    return lam * (A_scaled * std::exp(-lam) - B) + hk_prime_0;
}

double SlavingSolution::dw1() const {
    const double lam = k * k * k;
    return lam * (A_scaled - B * std::exp(-lam)) + hk_prime_1;
}

double SlavingSolution::robin_residual_0() const {
    return std::abs(k * k * w0() - std::sqrt(eps / 2.0) * dw0());
}

double SlavingSolution::robin_residual_1() const {
    return std::abs(k * k * w1() + std::sqrt(eps / 2.0) * dw1());
}

SlavingSolution solve_slaving(double k, const FlowParameters& params, const ScalarFn& theta, int quad_order) {
    check_k(k, "solve_slaving");
    if (quad_order < 8) throw std::invalid_argument("solve_slaving: quad_order must be >= 8");
    const double rt = params.ra_tilde;
    SlavingSolution sol;
    sol.k = k;
    sol.eps = params.eps;
    const double d0c = green_dz0(k, rt, theta, quad_order);
    const double d1c = green_dz1(k, rt, theta, quad_order);
    sol.hk_prime_0 = green_dz0(k, rt, theta, quad_order + 8);
    sol.hk_prime_1 = green_dz1(k, rt, theta, quad_order + 8);
    const double scale = std::max(std::abs(sol.hk_prime_0), std::abs(sol.hk_prime_1));
    check_pair(d0c, sol.hk_prime_0, scale, "solve_slaving");
    check_pair(d1c, sol.hk_prime_1, scale, "solve_slaving");
    const auto rc = robin_coefficients(k, params.eps, sol.hk_prime_0, sol.hk_prime_1);
    sol.c1 = rc.c1;
    sol.c2 = rc.c2;
    sol.A = rc.a;
    sol.B = rc.b;
    sol.A_scaled = rc.a_scaled;
    sol.ra_tilde = rt;
    sol.quad_order = quad_order;
    sol.theta = theta;
    return sol;
}

SlavingSolution solve_slaving(double k, const FlowParameters& params, const TestField& theta, int quad_order) {
    return solve_slaving(k, params, theta.as_function(), quad_order);
}

GridField oracle_solve(double k, const FlowParameters& params, const ScalarFn& theta, int n_grid,
                       WallCondition walls) {
    check_k(k, "oracle_solve");
    if (n_grid < 201) throw std::invalid_argument("oracle_solve: n_grid must be >= 201");
    const std::size_t n = static_cast<std::size_t>(n_grid);
    GridField out;
    out.grid = uniform_grid(n_grid);
    const double h = 1.0 / (n_grid - 1);
    const double k2 = k * k;
    const double k4 = k2 * k2;
    const double k6 = k4 * k2;
    const double ih2 = 1.0 / (h * h);
    const double s = std::sqrt(params.eps / 2.0);

    std::vector<double> lower(n, -ih2), diag(n, k6 + 2.0 * ih2), upper(n, -ih2), rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = k4 * params.ra_tilde * theta(out.grid[i]);
    if (walls == WallCondition::Dirichlet) {
        diag[0] = diag[n - 1] = 1.0;
        upper[0] = lower[n - 1] = 0.0;
        rhs[0] = rhs[n - 1] = 0.0;
    } else {
        // Ghost values w_{-1} = w_1 - 2 h k^2 w_0 / s and the mirror at z = 1.
        diag[0] = diag[n - 1] = k6 + 2.0 * ih2 + 2.0 * k2 / (s * h);
        upper[0] = -2.0 * ih2;
        lower[n - 1] = -2.0 * ih2;
    }
    lower[0] = 0.0;
    upper[n - 1] = 0.0;

    // Thomas algorithm.
    std::vector<double> cp(n), dp(n);
    if (diag[0] == 0.0) throw std::runtime_error("oracle_solve: singular system");
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = diag[i] - lower[i] * cp[i - 1];
        if (m == 0.0 || !std::isfinite(m)) throw std::runtime_error("oracle_solve: singular system");
        cp[i] = upper[i] / m;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    out.values.resize(n);
    out.values[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out.values[i] = dp[i] - cp[i] * out.values[i + 1];
    return out;
}

}  // namespace ekbound
