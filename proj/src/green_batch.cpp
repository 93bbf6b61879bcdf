#include "green_batch.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ekbound/basis.hpp"

namespace ekbound::detail {

namespace {

inline double one_minus_exp(double x) { return -std::expm1(-x); }

// Barycentric Lagrange interpolation on the Gauss nodes of one panel.
struct PanelInterp {
    std::vector<double> x;
    std::vector<double> beta;

    void lagrange(double s, std::vector<double>& ell) const {
        const std::size_t q = x.size();
        double sum = 0.0;
        for (std::size_t m = 0; m < q; ++m) {
            const double d = s - x[m];
            if (d == 0.0) {
                std::fill(ell.begin(), ell.end(), 0.0);
                ell[m] = 1.0;
                return;
            }
            ell[m] = beta[m] / d;
            sum += ell[m];
        }
        for (std::size_t m = 0; m < q; ++m) ell[m] /= sum;
    }
};

// Integrals of the two recursion kernels against each Lagrange basis
// polynomial over [t0, t1].
void interval_weights(double t0, double t1, double lam, const PanelInterp& P, const GaussRule& inner,
                      std::vector<double>& ell, Eigen::VectorXd& mu_l, Eigen::VectorXd& mu_r) {
    mu_l.setZero();
    mu_r.setZero();
    const std::size_t q = P.x.size();
    const auto left_edges = graded_edges(t0, t1, t1, lam, 1);
    for (std::size_t p = 0; p + 1 < left_edges.size(); ++p) {
        const double half = 0.5 * (left_edges[p + 1] - left_edges[p]);
        const double mid = 0.5 * (left_edges[p + 1] + left_edges[p]);
        for (std::size_t i = 0; i < inner.nodes.size(); ++i) {
            const double s = mid + half * inner.nodes[i];
            const double g = half * inner.weights[i] * std::exp(lam * (s - t1)) * one_minus_exp(2.0 * lam * s);
            P.lagrange(s, ell);
            for (std::size_t m = 0; m < q; ++m) mu_l[static_cast<Eigen::Index>(m)] += g * ell[m];
        }
    }
    const auto right_edges = graded_edges(t0, t1, t0, lam, 1);
    for (std::size_t p = 0; p + 1 < right_edges.size(); ++p) {
        const double half = 0.5 * (right_edges[p + 1] - right_edges[p]);
        const double mid = 0.5 * (right_edges[p + 1] + right_edges[p]);
        for (std::size_t i = 0; i < inner.nodes.size(); ++i) {
            const double s = mid + half * inner.nodes[i];
            const double g =
                half * inner.weights[i] * std::exp(lam * (t0 - s)) * one_minus_exp(2.0 * lam * (1.0 - s));
            P.lagrange(s, ell);
            for (std::size_t m = 0; m < q; ++m) mu_r[static_cast<Eigen::Index>(m)] += g * ell[m];
        }
    }
}

}  // namespace

SlavedBasis slave_basis(double k, const FlowParameters& params, int dim, std::span<const double> edges, int order) {
    if (!(k > 0.0)) throw std::domain_error("slave_basis: k must be positive");
    if (dim < 1) throw std::invalid_argument("slave_basis: dim must be positive");
    if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
        throw std::invalid_argument("slave_basis: edges must span [0, 1]");
    }
    SlavedBasis out;
    out.rule = map_to_panels(edges, order);
    const auto n_nodes = static_cast<Eigen::Index>(out.rule.nodes.size());
    const Eigen::Index q = order;
    const std::size_t n_panels = edges.size() - 1;

    out.basis.resize(n_nodes, dim);
    {
        std::vector<double> vals(static_cast<std::size_t>(dim));
        for (Eigen::Index i = 0; i < n_nodes; ++i) {
            eval_basis(out.rule.nodes[static_cast<std::size_t>(i)], vals);
            for (int j = 0; j < dim; ++j) out.basis(i, j) = vals[static_cast<std::size_t>(j)];
        }
    }

    const double lam = k * k * k;
    const GaussRule& g = gauss_legendre(order);
    const GaussRule& inner = gauss_legendre(order / 2 + 4);
    PanelInterp P;
    P.x.resize(static_cast<std::size_t>(q));
    P.beta.resize(static_cast<std::size_t>(q));
    for (Eigen::Index m = 0; m < q; ++m) {
        const auto mu = static_cast<std::size_t>(m);
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        P.beta[mu] = sign * std::sqrt((1.0 - g.nodes[mu] * g.nodes[mu]) * g.weights[mu]);
    }
    std::vector<double> ell(static_cast<std::size_t>(q));

    // Recursion weights for every sub-interval of every panel.
    const Eigen::Index n_sub = q + 1;
    RowMatrix mu_left(static_cast<Eigen::Index>(n_panels) * n_sub, q), mu_right(static_cast<Eigen::Index>(n_panels) * n_sub, q);
    Eigen::VectorXd ml(q), mr(q);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const double a = edges[p], b = edges[p + 1];
        for (Eigen::Index m = 0; m < q; ++m) {
            P.x[static_cast<std::size_t>(m)] = out.rule.nodes[p * static_cast<std::size_t>(q) + static_cast<std::size_t>(m)];
        }
        for (Eigen::Index i = 0; i < n_sub; ++i) {
            const double t0 = (i == 0) ? a : P.x[static_cast<std::size_t>(i - 1)];
            const double t1 = (i == q) ? b : P.x[static_cast<std::size_t>(i)];
            interval_weights(t0, t1, lam, P, inner, ell, ml, mr);
            const Eigen::Index row = static_cast<Eigen::Index>(p) * n_sub + i;
            mu_left.row(row) = ml.transpose();
            mu_right.row(row) = mr.transpose();
        }
    }

    // lower(t) = int_0^t e^{lam (s-t)} (1 - e^{-2 lam s}) e_j(s) ds
    // upper(t) = int_t^1 e^{lam (t-s)} (1 - e^{-2 lam (1-s)}) e_j(s) ds
    RowMatrix lower(n_nodes, dim), upper(n_nodes, dim);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(dim);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const auto block = out.basis.middleRows(static_cast<Eigen::Index>(p) * q, q);
        double t_prev = edges[p];
        for (Eigen::Index i = 0; i < n_sub; ++i) {
            const Eigen::Index node = static_cast<Eigen::Index>(p) * q + i;
            const double t_next = (i == q) ? edges[p + 1] : out.rule.nodes[static_cast<std::size_t>(node)];
            acc *= std::exp(-lam * (t_next - t_prev));
            acc.noalias() += mu_left.row(static_cast<Eigen::Index>(p) * n_sub + i) * block;
            if (i < q) lower.row(node) = acc;
            t_prev = t_next;
        }
    }
    const Eigen::RowVectorXd lower_end = acc;  // lower(1)
    acc.setZero();
    for (std::size_t pp = n_panels; pp-- > 0;) {
        const auto block = out.basis.middleRows(static_cast<Eigen::Index>(pp) * q, q);
        double t_next = edges[pp + 1];
        for (Eigen::Index i = n_sub; i-- > 0;) {
            const Eigen::Index node = static_cast<Eigen::Index>(pp) * q + i - 1;
            const double t_prev = (i == 0) ? edges[pp] : out.rule.nodes[static_cast<std::size_t>(node)];
            acc *= std::exp(-lam * (t_next - t_prev));
            acc.noalias() += mu_right.row(static_cast<Eigen::Index>(pp) * n_sub + i) * block;
            if (i > 0) upper.row(node) = acc;
            t_next = t_prev;
        }
    }
    const Eigen::RowVectorXd upper_start = acc;  // upper(0)

    const double rt = params.ra_tilde;
    const double denom = one_minus_exp(2.0 * lam);
    const double pref = rt * k / (2.0 * denom);
    const Eigen::RowVectorXd dh0 = (rt * k * lam / denom) * upper_start;
    const Eigen::RowVectorXd dh1 = (-rt * k * lam / denom) * lower_end;

    const double s = std::sqrt(params.eps / 2.0);
    const double e = std::exp(-lam);
    const double alpha = 1.0 + s * k;
    const double beta = 1.0 - s * k;
    const double det = (e * beta) * (e * beta) - alpha * alpha;
    const Eigen::RowVectorXd r0 = (s / (k * k)) * dh0;
    const Eigen::RowVectorXd r1 = (-s / (k * k)) * dh1;
    const Eigen::RowVectorXd a_scaled = (e * beta * r0 - alpha * r1) / det;
    const Eigen::RowVectorXd b_coef = (e * beta * r1 - alpha * r0) / det;

    out.velocity.resize(n_nodes, dim);
    for (Eigen::Index i = 0; i < n_nodes; ++i) {
        const double z = out.rule.nodes[static_cast<std::size_t>(i)];
        const double fl = pref * one_minus_exp(2.0 * lam * (1.0 - z));
        const double fu = pref * one_minus_exp(2.0 * lam * z);
        out.velocity.row(i) = fl * lower.row(i) + fu * upper.row(i) + std::exp(lam * (z - 1.0)) * a_scaled +
                              std::exp(-lam * z) * b_coef;
    }
    return out;
}

}  // namespace ekbound::detail
