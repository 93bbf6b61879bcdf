#include "ekbound/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ekbound {

namespace {

// nu = 1 + ||phi'||^2 / (4 (b - 1)), split as constant 1 plus the profile term.
BoundValue value_of(const PiecewiseLinearProfile& profile, double b, BoundMethod m) {
    BoundValue v;
    v.method = m;
    v.nu_upper = std::max(1.0, U_from_profile(profile, b));
    v.leading_term = phi_prime_l2sq(profile) / (4.0 * (b - 1.0));
    v.constant_term = 1.0;
    return v;
}

VerifyOptions screening(const OptimizerOptions& o) {
    VerifyOptions v;
    v.dim = o.search_dim;
    v.tol = o.tol;
    v.quad_order = o.search_quad_order;
    v.threads = o.threads;
    v.stabilization = false;
    v.refine_minima = 0;
    v.deepen = false;
    return v;
}

// min_k lambda_min (or its extrapolated limit) relative to the diffusive floor (b-1) eps^2.
double floor_margin(const Certificate& c, double b, double eps) {
    double m = *std::min_element(c.lambda_min.begin(), c.lambda_min.end());
    if (!c.lambda_min_limit.empty()) m = std::min(m, *std::min_element(c.lambda_min_limit.begin(), c.lambda_min_limit.end()));
    return m / ((b - 1.0) * eps * eps);
}

// Search margin of a screening sweep: floor_margin when the sweep is
// feasible, otherwise the smaller of it and -tiny; -1 when a tail fails.
double raw_margin(const Certificate& c, double b, double eps) {
    if (!c.tail_small_k_ok || !c.tail_large_k_ok) return -1.0;
    const double m = floor_margin(c, b, eps);
    if (c.verdict != Verdict::Feasible) return std::min(m, -std::numeric_limits<double>::min());
    return m;
}

// Eigenvalue sweeps with a shared budget.
class Oracle {
public:
    Oracle(const FlowParameters& p, const OptimizerOptions& o) : p_(p), o_(o) {}

    int used() const { return used_; }
    bool exhausted() const { return used_ >= o_.budget; }

    double raw(double b, const PiecewiseLinearProfile& prof) {
        ++used_;
        const auto grid = default_k_grid(prof, o_.search_k_points);
        return raw_margin(verify_profile(p_, b, prof, grid, screening(o_)), b, p_.eps);
    }

    double margin(double b, const PiecewiseLinearProfile& prof) { return raw(b, prof); }

    Certificate certify(double b, const PiecewiseLinearProfile& prof) {
        ++used_;
        VerifyOptions v;
        v.dim = o_.certify_dim;
        v.tol = o_.tol;
        v.quad_order = o_.certify_quad_order;
        v.threads = o_.threads;
        const auto grid = default_k_grid(prof, o_.certify_k_points);
        return verify_profile(p_, b, prof, grid, v);
    }

private:
    const FlowParameters& p_;
    const OptimizerOptions& o_;
    int used_ = 0;
};

double family_u(double b, double delta) { return U_from_profile(make_paper_profile(b, delta), b); }

// Largest feasible delta for fixed b, searched in log delta. lo is known
// feasible; guess is the first trial above it.
double delta_star(Oracle& orc, double b, double lo, double guess, const OptimizerOptions& o) {
    if (lo >= 0.5) return 0.5;
    auto g = [&](double d) { return orc.margin(b, make_paper_profile(b, d)); };
    // Bracket around the guess with geometrically growing steps.
    double x_lo = std::log(lo), x_hi = 0.0, g_lo = 0.0, g_hi = 0.0;
    bool have_lo = false;
    double x = std::log(std::clamp(guess, lo, 0.5));
    double gx = g(x == std::log(lo) ? lo : std::exp(x));
    double step = 0.05;
    if (gx >= 0.0) {
        x_lo = x;
        g_lo = gx;
        have_lo = true;
        for (;;) {
            if (x_lo >= std::log(0.5)) return 0.5;
            if (orc.exhausted()) return std::exp(x_lo);
            const double xn = std::min(std::log(0.5), x_lo + step);
            const double gn = g(std::exp(xn));
            if (gn < 0.0) {
                x_hi = xn;
                g_hi = gn;
                break;
            }
            x_lo = xn;
            g_lo = gn;
            step *= 3.0;
        }
    } else {
        x_hi = x;
        g_hi = gx;
        for (;;) {
            if (orc.exhausted()) return lo;
            const double xn = std::max(std::log(lo), x_hi - step);
            const double gn = g(std::exp(xn));
            if (gn >= 0.0) {
                x_lo = xn;
                g_lo = gn;
                have_lo = true;
                break;
            }
            if (xn <= std::log(lo)) return lo;  // screening rejects even the premise point
            x_hi = xn;
            g_hi = gn;
            step *= 3.0;
        }
    }
    (void)have_lo;
    // Illinois regula falsi on log delta.
    int side = 0;
    while (x_hi - x_lo > std::log1p(o.delta_rel_tol) && !orc.exhausted()) {
        const double w = x_hi - x_lo;
        double xm = (x_lo * g_hi - x_hi * g_lo) / (g_hi - g_lo);
        xm = std::clamp(xm, x_lo + 0.05 * w, x_hi - 0.05 * w);
        const double gm = g(std::exp(xm));
        if (gm >= 0.0) {
            x_lo = xm;
            g_lo = gm;
            if (side == 1) g_hi *= 0.5;
            side = 1;
        } else {
            x_hi = xm;
            g_hi = gm;
            if (side == -1) g_lo *= 0.5;
            side = -1;
        }
    }
    return std::exp(x_lo);
}

PiecewiseLinearProfile odd_profile(std::span<const double> z, std::span<const double> v, bool center) {
    std::vector<double> bz{0.0}, bv{0.0};
    for (std::size_t j = 0; j < z.size(); ++j) {
        bz.push_back(z[j]);
        bv.push_back(v[j]);
    }
    if (center) {
        bz.push_back(0.5);
        bv.push_back(0.0);
    }
    for (std::size_t j = z.size(); j-- > 0;) {
        bz.push_back(1.0 - z[j]);
        bv.push_back(-v[j]);
    }
    bz.push_back(1.0);
    bv.push_back(0.0);
    return PiecewiseLinearProfile(std::move(bz), std::move(bv));
}

}  // namespace

bool BoundResult::certified() const {
    return recipe_check || (certificate && certificate->verdict == Verdict::Feasible);
}

double admissible_delta(const FlowParameters& p, double b) {
    if (!(b > 1.0)) throw std::domain_error("admissible_delta: b must exceed 1");
    return recipe(p, b).delta;
}

BoundResult paper_recipe_bound(const FlowParameters& params) {
    BoundResult r;
    const auto rp = recipe(params);
    r.method = BoundMethod::Recipe;
    r.b = rp.b;
    r.profile = make_paper_profile(rp.b, rp.delta);
    r.bound = bound_recipe(params);
    r.recipe_check = certified_verify_recipe(params, rp);
    return r;
}

BoundResult optimize_family(const FlowParameters& params, const OptimizerOptions& o) {
    BoundResult seed = paper_recipe_bound(params);
    seed.method = BoundMethod::Family;
    seed.bound.method = BoundMethod::Family;
    if (params.ra_tilde == 0.0 || recipe(params).clamped) {
        seed.profile = PiecewiseLinearProfile();
        seed.note = "seed only: recipe already at the conduction value";
        return seed;
    }

    Oracle orc(params, o);
    std::map<double, double> dstar;  // b -> delta*
    auto solve = [&](double b) {
        auto it = dstar.find(b);
        if (it != dstar.end()) return family_u(b, it->second);
        const double lo = admissible_delta(params, b);
        double guess = 4.0 * lo;
        if (!dstar.empty()) {
            auto nb = dstar.lower_bound(b);
            if (nb == dstar.end()) --nb;
            guess = nb->second;
        }
        const double d = delta_star(orc, b, lo, guess, o);
        dstar[b] = d;
        return family_u(b, d);
    };

    const double u4 = solve(4.0);
    // Golden section on log b.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(o.b_min), c = std::log(o.b_max);
    double x1 = c - phi * (c - a), x2 = a + phi * (c - a);
    double f1 = solve(std::exp(x1)), f2 = solve(std::exp(x2));
    while (c - a > o.b_rel_tol && !orc.exhausted()) {
        if (f1 <= f2) {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - phi * (c - a);
            f1 = solve(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (c - a);
            f2 = solve(std::exp(x2));
        }
    }
    (void)u4;

    // Best b from the screening search, then full-resolution certificates
    // bracketing delta when screening was optimistic.
    double best_b = 4.0, best_u = INFINITY;
    for (const auto& [bb, d] : dstar) {
        const double u = family_u(bb, d);
        if (u < best_u) {
            best_u = u;
            best_b = bb;
        }
    }
    const double lo = admissible_delta(params, best_b);
    double d_bad = dstar[best_b], g_bad = 0.0, d_good = lo, g_good = 1.0;
    std::optional<Certificate> good;
    for (int i = 0; i < o.max_certify && d_bad > lo * (1.0 + o.delta_rel_tol); ++i) {
        if (family_u(best_b, d_bad) >= seed.bound.nu_upper) break;
        double d = d_bad;
        if (i > 0) {
            if (!good) {
                d = std::max(lo, d_bad * std::pow(0.7, 1 << (i - 1)));
            } else {
                if (d_bad / d_good < 1.0 + 0.02) break;
                const double xg = std::log(d_good), xb = std::log(d_bad);
                const double x = std::clamp((xg * g_bad - xb * g_good) / (g_bad - g_good), xg + 0.05 * (xb - xg),
                                            xb - 0.05 * (xb - xg));
                d = std::exp(x);
            }
        }
        auto cert = orc.certify(best_b, make_paper_profile(best_b, d));
        const double g = floor_margin(cert, best_b, params.eps);
        if (cert.verdict == Verdict::Feasible) {
            d_good = d;
            g_good = std::max(g, 1e-3);
            good = std::move(cert);
            if (i == 0) break;
        } else {
            d_bad = d;
            g_bad = std::min(g, -1e-3);
        }
    }
    if (good && family_u(best_b, d_good) < seed.bound.nu_upper) {
        BoundResult r;
        r.method = BoundMethod::Family;
        r.b = best_b;
        r.profile = make_paper_profile(best_b, d_good);
        r.bound = value_of(r.profile, best_b, BoundMethod::Family);
        r.certificate = std::move(good);
        r.evaluations = orc.used();
        r.improved = true;
        if (orc.exhausted()) r.note = "budget exhausted";
        return r;
    }
    seed.evaluations = orc.used();
    seed.note = "seed only: no certified improvement";
    return seed;
}

BoundResult optimize_profile(const FlowParameters& params, const OptimizerOptions& o, const BoundResult* seed_in) {
    if (o.n_segments < 3) throw std::invalid_argument("optimize_profile: n_segments must be >= 3");
    BoundResult seed = seed_in ? *seed_in : optimize_family(params, o);
    const int seed_evals = seed_in ? 0 : seed.evaluations;
    seed.method = BoundMethod::Profile;
    seed.bound.method = BoundMethod::Profile;
    seed.evaluations = seed_evals;
    seed.improved = false;
    if (seed.bound.nu_upper <= 1.0) {
        seed.note = "seed only: conduction value";
        return seed;
    }

    // Breakpoints df 2^j on the left half, mirrored.
    const double df = boundary_layer_width(seed.profile);
    const bool center = o.n_segments % 2 == 0;
    int m = center ? (o.n_segments - 2) / 2 : (o.n_segments - 1) / 2;
    while (m > 1 && std::ldexp(df, m - 1) >= 0.5) --m;
    const auto mu = static_cast<std::size_t>(m);
    std::vector<double> z(mu);
    for (std::size_t j = 0; j < mu; ++j) z[j] = std::ldexp(df, static_cast<int>(j));
    const bool has_center = center && z.back() < 0.5;

    // Unknowns: values at z_j, then b. Scaled by the seed magnitudes.
    std::vector<double> x0(mu + 1), scale(mu + 1);
    for (std::size_t j = 0; j < mu; ++j) x0[j] = profile_eval(seed.profile, z[j]);
    x0[mu] = seed.b;
    for (std::size_t j = 0; j < mu; ++j) scale[j] = std::max(std::abs(x0[j]), 1e-3 * std::abs(x0[0]));
    scale[mu] = seed.b - 1.0;

    auto build = [&](const std::vector<double>& x) {
        return odd_profile(z, std::span<const double>(x.data(), mu), has_center);
    };
    auto objective = [&](const std::vector<double>& x) { return U_from_profile(build(x), x[mu]); };

    const auto layout = build(x0);
    const auto grid = default_k_grid(layout, o.certify_k_points);
    const LayoutSweep screen(params, layout.breakpoints(), grid, screening(o));
    Oracle orc(params, o);
    int used = 0;
    auto raw = [&](const std::vector<double>& x) {
        ++used;
        if (!(x[mu] > 1.0)) return -1.0;
        return raw_margin(screen.verify(x[mu], build(x)), x[mu], params.eps);
    };
    auto spent = [&] { return used + orc.used(); };

    // Trust-region steps along -grad U, bent to keep the linearized margin
    // above the target. Coordinates are relative to `scale`. Infeasible
    // iterates take restoration steps until the margin recovers.
    const std::size_t nx = mu + 1;
    const double buffer = 1e-4;
    std::vector<double> x = x0;
    double fx = objective(x), rx = raw(x);
    // Calibrate against the seed's full certificate when there is one.
    double target = buffer;
    if (seed.certificate) target = std::max(target, rx - floor_margin(*seed.certificate, seed.b, params.eps) + buffer);
    std::vector<double> best;
    double best_u = seed.bound.nu_upper;
    double radius = 0.05;
    const double h = 1e-4;
    std::string note;
    for (int round = 0; round < o.max_certify; ++round) {
        while (spent() + static_cast<int>(nx) + 2 <= o.budget && radius > 1e-4) {
            const double gx = rx - target;
            Eigen::VectorXd gu(static_cast<Eigen::Index>(nx)), gg(static_cast<Eigen::Index>(nx));
            for (std::size_t i = 0; i < nx; ++i) {
                auto y = x;
                y[i] += h * scale[i];
                gu[static_cast<Eigen::Index>(i)] = (objective(y) - fx) / h;
                gg[static_cast<Eigen::Index>(i)] = (raw(y) - rx) / h;
            }
            if (gu.norm() == 0.0) break;
            const Eigen::VectorXd u = -gu.normalized();
            const double gn = gg.norm();
            Eigen::VectorXd d;
            if (gn == 0.0 || gx + gg.dot(u) * radius >= buffer) {
                d = radius * u;
            } else {
                const Eigen::VectorXd n = gg / gn;
                const double t = (buffer - gx) / gn;
                if (std::abs(t) >= radius) {
                    d = std::copysign(radius, t) * n;
                } else {
                    const Eigen::VectorXd perp = u - u.dot(n) * n;
                    const double pn = perp.norm();
                    d = t * n + (pn > 0.0 ? std::sqrt(radius * radius - t * t) / pn : 0.0) * perp;
                }
            }
            auto y = x;
            for (std::size_t i = 0; i < nx; ++i) y[i] += d[static_cast<Eigen::Index>(i)] * scale[i];
            const double fy = objective(y);
            const bool restoring = gx < 0.0;
            if (!restoring && !(fy < fx)) {
                radius *= 0.5;
                continue;
            }
            const double ry = raw(y);
            const double gy = ry - target;
            if ((restoring && gy > gx) || (!restoring && gy >= 0.0)) {
                x = std::move(y);
                fx = fy;
                rx = ry;
                if (gy >= 0.0 && fx < best_u) {
                    best = x;
                    best_u = fx;
                }
                radius = std::min(0.2, radius * 1.5);
            } else {
                radius *= 0.5;
            }
        }
        if (best.empty()) break;
        const auto prof = build(best);
        auto cert = orc.certify(best[mu], prof);
        if (cert.verdict == Verdict::Feasible) {
            BoundResult r;
            r.method = BoundMethod::Profile;
            r.b = best[mu];
            r.profile = prof;
            r.bound = value_of(prof, r.b, BoundMethod::Profile);
            r.certificate = std::move(cert);
            r.evaluations = seed_evals + spent();
            r.improved = true;
            if (spent() + static_cast<int>(nx) + 2 > o.budget) r.note = "budget exhausted";
            return r;
        }
        // Screening was optimistic here; raise the target and resume from this point.
        target = std::max(target, raw(best) - floor_margin(cert, best[mu], params.eps) + buffer);
        x = best;
        fx = best_u;
        rx = raw(x);
        best.clear();
        best_u = seed.bound.nu_upper;
        radius = 0.02;
    }
    seed.evaluations = seed_evals + spent();
    seed.note = (spent() + static_cast<int>(nx) + 2 > o.budget) ? "stagnation: budget exhausted"
                                                                 : "seed only: no certified improvement";
    return seed;
}

}  // namespace ekbound
