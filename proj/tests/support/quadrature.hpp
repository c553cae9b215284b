#pragma once

// Numerical-integration oracle for the entrywise posteriors, independent of
// the closed forms in bigamp.hpp. The complex plane is integrated with a
// tensor Gauss-Hermite rule centered on the observation (the likelihood
// mean), with exponents tracked in the log domain; the point-mass component
// of the Bernoulli-Gaussian prior is added analytically.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "risce/bigamp.hpp"

namespace risce::testsupport {

struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int n) {
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = std::sqrt(static_cast<double>(i) / 2.0);
            jacobi(i, i - 1) = b;
            jacobi(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
        nodes = es.eigenvalues();
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            const double v0 = es.eigenvectors()(0, i);
            weights(i) = std::sqrt(std::numbers::pi) * v0 * v0;
        }
    }
};

/// Posterior moments of x under (1-beta) delta(x) + beta CN(0, sigma2) and
/// likelihood CN(obs; x, nu), by quadrature over the Gaussian component.
/// beta = 1 covers the plain Gaussian prior.
inline Posterior bg_posterior_quadrature(cxd obs, double nu, double beta, double sigma2,
                                         int order = 64) {
    if (beta == 0.0 || sigma2 == 0.0) return {cxd{0.0, 0.0}, 0.0};
    const GaussHermite gh(order);
    const double scale = 1.0 / std::sqrt(1.0 / sigma2 + 1.0 / nu);
    // Completing the square in the exponent puts the Gaussian-component mass
    // at obs/(1 + nu/sigma2); centering the rule there keeps the nodes on the
    // mass for any (nu, sigma2) ratio. The exponent itself is still evaluated
    // from the raw prior-times-likelihood form at every node.
    const cxd center = obs / (1.0 + nu / sigma2);

    const int n = order;
    std::vector<double> log_terms(static_cast<std::size_t>(n) * n);
    std::vector<cxd> points(static_cast<std::size_t>(n) * n);
    double log_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cxd x = center + scale * cxd{gh.nodes(i), gh.nodes(j)};
            const double expo = gh.nodes(i) * gh.nodes(i) + gh.nodes(j) * gh.nodes(j) -
                                std::norm(x) / sigma2 - std::norm(obs - x) / nu;
            const double lw = std::log(gh.weights(i)) + std::log(gh.weights(j)) + expo;
            log_terms[static_cast<std::size_t>(i) * n + j] = lw;
            points[static_cast<std::size_t>(i) * n + j] = x;
            log_max = std::max(log_max, lw);
        }
    double s0 = 0.0, s2 = 0.0;
    cxd s1{0.0, 0.0};
    for (std::size_t idx = 0; idx < log_terms.size(); ++idx) {
        const double w = std::exp(log_terms[idx] - log_max);
        s0 += w;
        s1 += w * points[idx];
        s2 += w * std::norm(points[idx]);
    }

    // Point mass at zero relative to the continuous component's scale:
    // delta weight (1-beta)/(pi nu) e^{-|obs|^2/nu} versus continuous
    // coefficient beta scale^2 / (pi^2 sigma2 nu) e^{log_max}.
    double delta_rel = 0.0;
    if (beta < 1.0) {
        const double log_delta = std::log1p(-beta) - std::log(std::numbers::pi * nu) -
                                 std::norm(obs) / nu;
        const double log_cont = std::log(beta) + 2.0 * std::log(scale) -
                                std::log(std::numbers::pi * std::numbers::pi * sigma2 * nu) +
                                log_max;
        const double diff = log_delta - log_cont;
        delta_rel = diff > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(diff);
    }
    const double total = s0 + delta_rel;
    if (!std::isfinite(total)) return {cxd{0.0, 0.0}, 0.0}; // point mass dominates completely
    const cxd mean = s1 / total;
    const double second = s2 / total;
    return {mean, second - std::norm(mean)};
}

inline Posterior gaussian_posterior_quadrature(cxd obs, double nu, double sigma2, int order = 64) {
    return bg_posterior_quadrature(obs, nu, 1.0, sigma2, order);
}

} // namespace risce::testsupport
