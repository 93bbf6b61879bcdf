#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ekbound/quadrature.hpp"
#include "ekbound/spectral.hpp"
#include "test_util.hpp"

using namespace ekbound;
using doctest::Approx;

namespace {

// Direct quadrature of the S_k integrand for one field, on panels
// independent of the assembly layout.
double direct_form(double k, const FlowParameters& p, double b, const PiecewiseLinearProfile& prof,
                   const TestField& theta) {
    const double lam = k * k * k;
    auto e = graded_edges(0.0, 0.5, 0.0, lam, 24);
    const auto right = graded_edges(0.5, 1.0, 1.0, lam, 24);
    e.insert(e.end(), right.begin(), right.end());
    for (double z : prof.breakpoints()) e.push_back(z);
    const double delta = boundary_layer_width(prof);
    for (int j = 1; j <= 30; ++j) {
        e.push_back(delta * j / 31.0);
        e.push_back(1.0 - delta * j / 31.0);
    }
    const auto rule = map_to_panels(merge_edges(std::move(e)), 40);
    const auto sol = solve_slaving(k, p, theta);
    const auto w = sol.evaluate(rule.nodes);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = rule.nodes[i];
        const double t = theta.value(z), dt = theta.derivative(z);
        const double mid = 0.5 * (rule.panel_edges[rule.panel_of_node[i]] + rule.panel_edges[rule.panel_of_node[i] + 1]);
        s += rule.weights[i] *
             ((b - 1.0) * (k * k * t * t + p.eps * p.eps * dt * dt) - (b - profile_derivative_eval(prof, mid)) * w[i] * t);
    }
    return s;
}

// Smallest eigenvalue of the 3x3 symmetric matrix t by cyclic Jacobi.
Eigen::Vector3d jacobi3_min(Eigen::Matrix3d t, double& value) {
    Eigen::Matrix3d v = Eigen::Matrix3d::Identity();
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) off += t(p, q) * t(p, q);
        if (off < 1e-300) break;
        for (int p = 0; p < 3; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (t(p, q) == 0.0) continue;
                const double th = (t(q, q) - t(p, p)) / (2.0 * t(p, q));
                const double tt = (th >= 0 ? 1.0 : -1.0) / (std::abs(th) + std::sqrt(th * th + 1.0));
                const double c = 1.0 / std::sqrt(tt * tt + 1.0), s = tt * c;
                Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
                r(p, p) = c;
                r(q, q) = c;
                r(p, q) = s;
                r(q, p) = -s;
                t = r.transpose() * t * r;
                v = v * r;
            }
        }
    }
    int imin = 0;
    for (int i = 1; i < 3; ++i)
        if (t(i, i) < t(imin, imin)) imin = i;
    value = t(imin, imin);
    return v.col(imin);
}

// Locally optimal block-free Rayleigh-quotient minimization on span{x, r, p}.
double rayleigh_min(const Eigen::MatrixXd& a, int starts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const Eigen::Index n = a.rows();
    const double scale = a.cwiseAbs().rowwise().sum().maxCoeff();
    double best = INFINITY;
    for (int s = 0; s < starts; ++s) {
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = nd(rng);
        x.normalize();
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        double rho = x.dot(a * x);
        for (int it = 0; it < 20000; ++it) {
            Eigen::VectorXd r = a * x - rho * x;
            if (r.norm() < 1e-13 * scale) break;
            Eigen::Matrix<double, Eigen::Dynamic, 3> q(n, 3);
            q.col(0) = x;
            q.col(1) = r;
            q.col(2) = (p.norm() > 0.0) ? p : Eigen::VectorXd(Eigen::VectorXd::Random(n));
            for (int c = 0; c < 3; ++c) {
                for (int pass = 0; pass < 2; ++pass)
                    for (int d = 0; d < c; ++d) q.col(c) -= q.col(d).dot(q.col(c)) * q.col(d);
                q.col(c).normalize();
            }
            const Eigen::Matrix3d t = q.transpose() * a * q;
            double v = 0.0;
            const Eigen::Vector3d y = jacobi3_min(0.5 * (t + t.transpose()), v);
            const Eigen::VectorXd xn = (q * y).normalized();
            p = q.col(1) * y[1] + q.col(2) * y[2];
            x = xn;
            rho = x.dot(a * x);
        }
        best = std::min(best, rho);
    }
    return best;
}

}  // namespace

TEST_CASE("U from profile") {
    CHECK(U_from_profile(PiecewiseLinearProfile(), 3.0) == 1.0);
    CHECK(U_from_profile(make_paper_profile(4.0, 0.1), 4.0) == Approx(1.0 + (16.0 / 12.0) * (1.0 / 0.2 - 1.0)).epsilon(1e-14));
    CHECK(U_from_profile(make_paper_profile(4.0, 0.1), 4.0) == Approx(6.33333).epsilon(1e-6));
    const PiecewiseLinearProfile tent({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
    CHECK(U_from_profile(tent, 2.0) == Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(U_from_profile(tent, 1.0), std::domain_error);
    CHECK_THROWS_AS(U_from_profile(tent, 0.5), std::domain_error);
}

TEST_CASE("assembly structure") {
    const auto prof = make_paper_profile(4.0, 0.05);
    const auto zero_ra = params_from_scaled(0.0, 0.2);
    const auto a0 = assemble_Sk(1.3, zero_ra, 4.0, prof, 24);
    CHECK(a0.coupling_part.cwiseAbs().maxCoeff() == 0.0);
    CHECK(lambda_min(a0) > 0.0);

    const auto p = params_from_scaled(30.0, 0.2);
    for (double k : {0.01, 0.7, 3.0, 40.0}) {
        const auto a = assemble_Sk(k, p, 4.0, prof, 32);
        CHECK(a.matrix == a.matrix.transpose());
        CHECK(a.coupling_part == a.coupling_part.transpose());
        CHECK(a.diffusion_part == a.diffusion_part.transpose());
        CHECK(a.matrix == a.diffusion_part + a.coupling_part);
        CHECK(lambda_min(a.diffusion_part) > 0.0);
        CHECK(diffusion_norm(a) == Approx(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.diffusion_part)
                                              .eigenvalues()
                                              .maxCoeff())
                                       .epsilon(1e-12));
    }
    CHECK_THROWS_AS(assemble_Sk(1.0, p, 4.0, prof, 3), std::invalid_argument);
    CHECK_THROWS_AS(assemble_Sk(1.0, p, 1.0, prof, 8), std::domain_error);
    CHECK_THROWS_AS(assemble_Sk(0.0, p, 4.0, prof, 8), std::domain_error);
}

TEST_CASE("edges keep breakpoints") {
    const auto prof = make_paper_profile(4.0, 1e-4);
    const auto e = assembly_edges(50.0, prof, 64);
    CHECK(e.front() == 0.0);
    CHECK(e.back() == 1.0);
    for (double z : prof.breakpoints()) CHECK(std::find(e.begin(), e.end(), z) != e.end());
    CHECK(std::is_sorted(e.begin(), e.end()));
}

TEST_CASE("sine mode sandwich matches direct quadrature") {
    const auto p = params_from_scaled(5.0, 0.3);
    const PiecewiseLinearProfile zero;
    const int dim = 40;
    const auto a = assemble_Sk(1.0, p, 2.0, zero, dim);
    // Project sin(pi z) onto the basis through the stiffness (identity) inner product.
    const auto& g = gauss_legendre(64);
    std::vector<double> c(dim, 0.0), vals(dim), ders(dim);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const double z = 0.5 * (g.nodes[i] + 1.0);
        eval_basis(z, vals, ders);
        for (int j = 0; j < dim; ++j) c[j] += 0.5 * g.weights[i] * std::numbers::pi * std::cos(std::numbers::pi * z) * ders[j];
    }
    const TestField theta(c);
    CHECK(theta.l2_norm() == Approx(std::sqrt(0.5)).epsilon(1e-12));
    const Eigen::Map<const Eigen::VectorXd> v(c.data(), dim);
    const double sandwich = v.dot(a.matrix * v);
    const double direct = direct_form(1.0, p, 2.0, zero, theta);
    CHECK(sandwich == Approx(direct).epsilon(1e-8));
    const double diff = (2.0 - 1.0) * (0.5 + p.eps * p.eps * std::numbers::pi * std::numbers::pi / 2.0);
    CHECK(v.dot(a.diffusion_part * v) == Approx(diff).epsilon(1e-10));
}

TEST_CASE("quadratic form consistency on random fields") {
    std::mt19937_64 rng(2024);
    const auto prof = make_paper_profile(4.0, 0.02);
    const auto p = params_from_scaled(40.0, 0.1);
    const int dim = 16;
    for (double k : {0.05, 0.5, 2.0, 6.0, 25.0}) {
        const auto a = assemble_Sk(k, p, 4.0, prof, dim);
        for (int t = 0; t < 3; ++t) {
            const auto theta = testutil::random_field(rng, dim);
            const Eigen::Map<const Eigen::VectorXd> v(theta.coeffs().data(), dim);
            const double sandwich = v.dot(a.matrix * v);
            const double direct = direct_form(k, p, 4.0, prof, theta);
            const double scale = std::abs(v.dot(a.diffusion_part * v)) + std::abs(v.dot(a.coupling_part * v));
            CHECK(std::abs(sandwich - direct) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("lambda_min") {
    Eigen::MatrixXd d = Eigen::Vector3d(3.0, 1.0, 2.0).asDiagonal();
    CHECK(lambda_min(d) == 1.0);
    CHECK(lambda_min(d, 1) == 3.0);
    CHECK(lambda_min(d, 2) == 1.0);

    const auto prof = make_paper_profile(4.0, 0.03);
    const auto p = params_from_scaled(60.0, 0.1);
    for (double k : {0.3, 2.5, 9.0}) {
        const auto a = assemble_Sk(k, p, 4.0, prof, 24);
        const double lm = lambda_min(a);
        const double oracle = rayleigh_min(a.matrix, 20, 99);
        CHECK(std::abs(lm - oracle) <= 1e-8 * std::max(std::abs(lm), 1e-8 * diffusion_norm(a)));
        CHECK(lambda_min(a) == lm);
    }
}

TEST_CASE("Ritz values decrease with dimension") {
    const auto prof = make_paper_profile(4.0, 0.01);
    const auto p = params_from_scaled(100.0, 0.1);
    const auto a = assemble_Sk(3.0, p, 4.0, prof, 64);
    double prev = INFINITY;
    for (int n = 4; n <= 64; n += 4) {
        const double v = lambda_min(a.matrix, n);
        CHECK(v <= prev * (1.0 + 1e-12) + 1e-14);
        prev = v;
    }
}

TEST_CASE("zero profile is feasible at small forcing") {
    const PiecewiseLinearProfile zero;
    const auto p = params_from_scaled(1.0, 0.2);
    const auto grid = default_k_grid(zero, 40);
    const auto cert = verify_profile(p, 2.0, zero, grid, 32, 1e-8);
    CHECK(cert.feasible);
    CHECK(cert.resolved);
    CHECK(cert.verdict == Verdict::Feasible);
    CHECK(cert.tail_small_k_ok);
    CHECK(cert.tail_large_k_ok);
    for (double v : cert.lambda_min) CHECK(v > 0.0);
}

TEST_CASE("stabilization dimension") {
    // Discrete eigenvalues below the diffusive floor converge quickly for a smooth profile.
    const PiecewiseLinearProfile zero;
    const auto p = params_from_scaled(60.0, 0.2);
    const std::vector<double> grid{0.3, 0.7, 1.2, 2.0};
    const auto cert = verify_profile(p, 2.0, zero, grid, 64, 1e-8);
    CHECK(cert.stabilization_dim >= 4);
    CHECK(cert.stabilization_dim <= 32);
    CHECK(cert.verdict == Verdict::Infeasible);
    // Near the floor the Ritz values creep down algebraically.
    const std::vector<double> high{12.0};
    CHECK(verify_profile(p, 2.0, zero, high, 64, 1e-8).stabilization_dim == -1);
}

TEST_CASE("default k grid") {
    const auto prof = make_paper_profile(4.0, 1e-3);
    const auto g = default_k_grid(prof);
    REQUIRE(g.size() == 200);
    const double kstar = std::cbrt(constants().gamma / 1e-3);
    CHECK(g.front() == Approx(1e-3 * kstar).epsilon(1e-12));
    CHECK(g.back() == Approx(10.0 * kstar).epsilon(1e-12));
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(g[1] / g[0] == Approx(g[199] / g[198]).epsilon(1e-10));
}

TEST_CASE("tails") {
    const auto prof = make_paper_profile(4.0, 0.01);
    const auto p = params_from_scaled(50.0, 0.1);
    CHECK(tail_small_k(p, 4.0, prof, 1e-4));
    CHECK_FALSE(tail_small_k(p, 4.0, prof, 2.0));
    const double kt = large_k_threshold(p, 4.0, prof);
    CHECK(tail_large_k(p, 4.0, prof, kt * 1.0001));
    CHECK_FALSE(tail_large_k(p, 4.0, prof, kt * 0.999));
    // max |b - phi'| = b / (2 delta) for the family with c = b.
    CHECK(std::pow(kt, 4) == Approx(200.0 * 50.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("verify_profile input checks and verdicts") {
    const PiecewiseLinearProfile zero;
    const auto p = params_from_scaled(1.0, 0.2);
    const std::vector<double> bad{1.0, 0.5};
    CHECK_THROWS_AS(verify_profile(p, 2.0, zero, bad, 16, 1e-8), std::invalid_argument);
    CHECK_THROWS_AS(verify_profile(p, 2.0, zero, std::vector<double>{}, 16, 1e-8), std::invalid_argument);
    // No refinement pair at dim 4.
    const auto g = default_k_grid(zero, 10);
    const auto c4 = verify_profile(p, 2.0, zero, g, 4, 1e-8);
    CHECK_FALSE(c4.resolved);
    CHECK(c4.verdict == Verdict::Unresolved);

    // Strong forcing against the zero profile.
    const auto strong = params_from_scaled(200.0, 0.2);
    const auto ci = verify_profile(strong, 2.0, zero, default_k_grid(zero, 30), 32, 1e-8);
    CHECK_FALSE(ci.feasible);
    CHECK(ci.verdict == Verdict::Infeasible);
    CHECK(ci.lambda_min[ci.worst_index] < 0.0);
}

TEST_CASE("threaded sweep matches serial") {
    const auto prof = make_paper_profile(4.0, 0.02);
    const auto p = params_from_scaled(20.0, 0.1);
    const auto g = default_k_grid(prof, 12);
    VerifyOptions o;
    o.dim = 24;
    const auto serial = verify_profile(p, 4.0, prof, g, o);
    o.threads = 3;
    const auto threaded = verify_profile(p, 4.0, prof, g, o);
    CHECK(serial.lambda_min == threaded.lambda_min);
    CHECK(serial.feasible == threaded.feasible);
}

TEST_CASE("recipe premise check") {
    const auto p = derive_params(1e7, 1e-5);
    const auto rp = recipe(p);
    CHECK(certified_verify_recipe(p, rp));
    auto wide = rp;
    wide.delta *= 1.001;
    CHECK_FALSE(certified_verify_recipe(p, wide));
    auto heavy = rp;
    heavy.d2 = rp.b - 1.0 + 0.01 - rp.d1;
    CHECK_FALSE(certified_verify_recipe(p, heavy));
    auto cb = rp;
    cb.c = 3.0;
    CHECK_FALSE(certified_verify_recipe(p, cb));
    for (double ra : {1e5, 1e6, 1e8, 1e9}) {
        for (double ek : {1e-4, 1e-5, 1e-7}) {
            const auto q = derive_params(ra, ek);
            CHECK(certified_verify_recipe(q, recipe(q)));
        }
    }
}

TEST_CASE("recipe parameters pass the eigenvalue sweep") {
    for (double rt : {5.0, 30.0}) {
        const auto p = params_from_scaled(rt, 0.3);
        const auto rp = recipe(p);
        REQUIRE(certified_verify_recipe(p, rp));
        const auto prof = make_paper_profile(rp.b, rp.delta);
        const auto cert = verify_profile(p, rp.b, prof, default_k_grid(prof, 40), 48, 1e-8);
        CHECK(cert.feasible);
    }
}

TEST_CASE("lambda_min observed nondecreasing in b") {
    const auto prof = make_paper_profile(4.0, 0.05);
    const auto p = params_from_scaled(10.0, 0.2);
    for (double k : {0.2, 1.5, 4.0}) {
        double prev = -INFINITY;
        for (double b : {1.5, 2.0, 3.0, 4.0, 6.0, 10.0}) {
            const double v = lambda_min(assemble_Sk(k, p, b, prof, 24));
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("layout sweep matches verify_profile") {
    const auto p = params_from_scaled(15.0, 0.15);
    const std::vector<double> z{0.0, 0.03, 0.2, 0.5, 0.8, 0.97, 1.0};
    const std::vector<double> k{0.1, 0.6, 1.7, 4.0, 11.0};
    VerifyOptions opt;
    opt.dim = 32;
    opt.quad_order = 16;
    const LayoutSweep sweep(p, z, k, opt);
    CHECK(sweep.breakpoints().size() == z.size());
    CHECK(sweep.k_grid().size() == k.size());

    const std::vector<std::vector<double>> values{{0.0, 0.05, 0.1, 0.0, -0.1, -0.05, 0.0},
                                                  {0.0, 0.02, 0.3, 0.0, -0.3, -0.02, 0.0},
                                                  {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
    for (const auto& v : values) {
        const PiecewiseLinearProfile prof(z, v);
        for (double b : {1.5, 3.0, 7.0}) {
            const auto a = sweep.verify(b, prof);
            const auto c = verify_profile(p, b, prof, k, opt);
            CHECK(a.verdict == c.verdict);
            CHECK(a.stabilization_dim == c.stabilization_dim);
            REQUIRE(a.k_grid.size() == c.k_grid.size());
            CHECK(a.refined == c.refined);
            for (std::size_t i = 0; i < c.k_grid.size(); ++i) {
                const double scale = c.diffusion_norm[i];
                CHECK(std::abs(a.k_grid[i] - c.k_grid[i]) <= 1e-12 * c.k_grid[i]);
                CHECK(std::abs(a.lambda_min[i] - c.lambda_min[i]) <= 1e-12 * scale);
                CHECK(std::abs(a.lambda_min_coarse[i] - c.lambda_min_coarse[i]) <= 1e-12 * scale);
                CHECK(std::abs(a.lambda_min_limit[i] - c.lambda_min_limit[i]) <= 1e-10 * scale);
            }
        }
    }
    const PiecewiseLinearProfile other(std::vector<double>{0.0, 0.5, 1.0}, std::vector<double>{0.0, 0.1, 0.0});
    CHECK_THROWS_AS(sweep.verify(2.0, other), std::invalid_argument);
    CHECK_THROWS_AS(sweep.verify(1.0, PiecewiseLinearProfile(z, values[0])), std::domain_error);
}

TEST_CASE("recipe premise check holds on a dense parameter grid") {
    int checked = 0, failed = 0;
    for (int i = 0; i <= 100; ++i) {
        for (int j = 0; j <= 160; ++j) {
            const auto p = derive_params(std::pow(10.0, 5.0 + 0.05 * j), std::pow(10.0, -8.0 + 0.05 * i));
            for (double b : {1.5, 4.0, 10.0}) {
                const auto rp = recipe(p, b);
                ++checked;
                if (!certified_verify_recipe(p, rp)) ++failed;
            }
        }
    }
    CHECK(checked == 101 * 161 * 3);
    CHECK(failed == 0);
}

TEST_CASE("refinement in k lowers the grid minimum") {
    const auto p = params_from_scaled(8.0 * std::pow(7.5, 2.0 / 9.0), std::cbrt(1e-7));
    const auto prof = make_paper_profile(8.388, 0.080074);
    const auto g = default_k_grid(prof, 200);
    VerifyOptions o;
    o.dim = 64;
    o.quad_order = 16;
    o.refine_minima = 0;
    const auto plain = verify_profile(p, 8.388, prof, g, o);
    CHECK(plain.refined == 0);
    CHECK(plain.k_grid.size() == g.size());
    o.refine_minima = 3;
    const auto refined = verify_profile(p, 8.388, prof, g, o);
    CHECK(refined.refined > 0);
    CHECK(refined.k_grid.size() == g.size() + static_cast<std::size_t>(refined.refined));
    CHECK(std::is_sorted(refined.k_grid.begin(), refined.k_grid.end()));
    const double lo_plain = *std::min_element(plain.lambda_min.begin(), plain.lambda_min.end());
    const double lo_refined = *std::min_element(refined.lambda_min.begin(), refined.lambda_min.end());
    CHECK(lo_refined < lo_plain);
}

TEST_CASE("unconverged ladder is not certified") {
    // Positive Ritz values at dim 128 whose doubling ladder is still falling.
    const auto p = params_from_scaled(8.0 * std::pow(7.5, 2.0 / 9.0), std::cbrt(1e-7));
    const auto prof = make_paper_profile(8.388, 0.080074);
    VerifyOptions o;
    o.dim = 128;
    o.quad_order = 16;
    const auto c = verify_profile(p, 8.388, prof, default_k_grid(prof, 200), o);
    CHECK(c.feasible);
    CHECK_FALSE(c.resolved);
    CHECK(c.verdict == Verdict::Unresolved);
    const double worst_limit = *std::min_element(c.lambda_min_limit.begin(), c.lambda_min_limit.end());
    CHECK(worst_limit < 0.0);
    for (std::size_t i = 0; i < c.k_grid.size(); ++i) CHECK(c.lambda_min_limit[i] <= c.lambda_min[i]);

    o.stabilization = false;
    const auto bare = verify_profile(p, 8.388, prof, default_k_grid(prof, 200), o);
    CHECK(bare.lambda_min_limit.size() == bare.lambda_min.size());
}

TEST_CASE("one doubling settles a pre-asymptotic ladder") {
    const auto p = params_from_scaled(8.0 * std::pow(7.5, 8.0 / 9.0), std::cbrt(1e-7));
    const double b = 3.0946;
    const auto prof = make_paper_profile(b, 1.6056e-4);
    VerifyOptions o;
    o.dim = 128;
    o.quad_order = 16;
    const auto g = default_k_grid(prof, 200);
    const auto c = verify_profile(p, b, prof, g, o);
    CHECK(c.deepened > 0);
    CHECK(c.verdict == Verdict::Feasible);
    o.deepen = false;
    const auto raw = verify_profile(p, b, prof, g, o);
    CHECK(raw.deepened == 0);
    CHECK(raw.verdict == Verdict::Unresolved);
    CHECK(raw.lambda_min == c.lambda_min);
}
