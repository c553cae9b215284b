#pragma once

#include <optional>
#include <vector>

#include "risce/linalg.hpp"
#include "risce/scene.hpp"
#include "risce/tensor.hpp"

namespace risce {

/// The three matricizations of a K x T x P tensor.
///
/// Row orderings (zero-based):
///   mode1(t*P + p, k) = mode2(p*K + k, t) = mode3(k*T + t, p) = Y(k, t, p).
/// For a noiseless tensor built from factors (Hr, He, Phi) these satisfy
///   mode1 = khatri_rao(He^T, Phi) * Hr^T
///   mode2 = khatri_rao(Phi, Hr) * He
///   mode3 = khatri_rao(Hr, He^T) * Phi^T.
struct UnfoldedViews {
    CMat mode1; // (T*P) x K
    CMat mode2; // (P*K) x T
    CMat mode3; // (K*T) x P
};

inline UnfoldedViews unfold(const Tensor3& samples) {
    const Eigen::Index K = samples.dim_k(), T = samples.dim_t(), P = samples.dim_p();
    UnfoldedViews v;
    v.mode1.resize(T * P, K);
    v.mode2.resize(P * K, T);
    v.mode3.resize(K * T, P);
    for (Eigen::Index p = 0; p < P; ++p)
        for (Eigen::Index t = 0; t < T; ++t)
            for (Eigen::Index k = 0; k < K; ++k) {
                const cxd y = samples(k, t, p);
                v.mode1(t * P + p, k) = y;
                v.mode2(p * K + k, t) = y;
                v.mode3(k * T + t, p) = y;
            }
    return v;
}

struct AlsOptions {
    double epsilon = 1e-5;   // relative-change threshold on the user-side estimate
    int max_iterations = 15;
    enum class Init { eigen, random } init = Init::eigen;
    std::uint64_t random_init_seed = 0; // used by Init::random only
    std::optional<CMat> initial_equivalent; // explicit N x T start, overrides init
};

struct AlsResult {
    CMat ris_to_users; // K x N estimate, columns scaled by an unknown diagonal
    CMat equivalent;   // N x T estimate carrying the inverse scaling
    int iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
    bool rank_deficient = false; // some LS step fell back to a rank-revealing pseudoinverse
    std::vector<double> residual_history; // ||mode2 - khatri_rao(Phi, Hr)*He||_F per iteration
};

/// Spectral starting point for the equivalent channel: the n dominant
/// eigenpairs of Y2^H Y2 (a T x T Gramian), returned as diag(sqrt(lambda))
/// times the conjugated eigenvectors, shape n x T. Rows span the dominant
/// row space of Y2 with energy-matched scales.
inline CMat als_init(const CMat& mode2, Eigen::Index n) {
    if (n > mode2.cols())
        throw dimension_error("als_init: more components than columns");
    const CMat gram = mode2.adjoint() * mode2;
    if (gram.cwiseAbs().maxCoeff() == 0.0) return CMat::Zero(n, mode2.cols());
    const EigPairs eig = dominant_eigvecs(gram, n);
    CMat init(n, mode2.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda = std::max(eig.values(i), 0.0);
        init.row(i) = std::sqrt(lambda) * eig.vectors.col(i).adjoint();
    }
    return init;
}

namespace detail {

struct KrLsSolution {
    CMat solution;
    bool rank_deficient = false;
};

// LS solve against a Khatri-Rao designed matrix. Its Gram matrix is the
// Hadamard product (a^H a) .* (b^H b), so the normal equations need
// O(N^3) plus the rhs product instead of factorizing the tall matrix
// itself; systems without a trustworthy Cholesky pivot fall back to a
// rank-revealing pseudo-inverse, keeping minimum-norm LS semantics for
// degenerate data.
inline KrLsSolution kr_least_squares(const CMat& a, const CMat& b, const CMat& kr,
                                     const CMat& rhs) {
    const Eigen::Index n = kr.cols();
    const CMat gram = (a.adjoint() * a).cwiseProduct(b.adjoint() * b);
    const Eigen::LDLT<CMat> ldlt(gram);
    bool deficient = ldlt.info() != Eigen::Success;
    if (!deficient) {
        const double tol =
            static_cast<double>(n) * 1e-12 * gram.diagonal().real().maxCoeff();
        const Eigen::VectorXcd d = ldlt.vectorD();
        for (Eigen::Index i = 0; i < n && !deficient; ++i)
            deficient = !(std::real(d(i)) > tol);
    }
    if (deficient) {
        const auto p = pseudo_inverse_with_rank(kr);
        return {p.pinv * rhs, p.rank < n};
    }
    return {ldlt.solve(kr.adjoint() * rhs), false};
}

} // namespace detail

/// Alternating least squares on the unfolded tensor: solve for the
/// user-side channel with the equivalent channel fixed, then vice versa,
/// until the user-side estimate moves by at most epsilon (relative squared
/// Frobenius change) or the iteration cap is hit.
inline AlsResult als_estimate(const UnfoldedViews& views, const CMat& phases,
                              const AlsOptions& opts = {}) {
    if (!(opts.epsilon > 0.0))
        throw config_error("als_estimate: epsilon must be positive");
    if (opts.max_iterations < 1)
        throw config_error("als_estimate: max_iterations must be at least 1");
    const Eigen::Index P = phases.rows(), N = phases.cols();
    const Eigen::Index K = views.mode1.cols(), T = views.mode2.cols();
    if (views.mode1.rows() != T * P || views.mode2.rows() != P * K ||
        views.mode3.rows() != K * T || views.mode3.cols() != P)
        throw dimension_error("als_estimate: inconsistent unfolded views");
    if (T * P < N || P * K < N)
        throw dimension_error("als_estimate: LS subproblems are underdetermined");

    AlsResult res;
    CMat he;
    if (opts.initial_equivalent) {
        if (opts.initial_equivalent->rows() != N || opts.initial_equivalent->cols() != T)
            throw dimension_error("als_estimate: explicit initialization has the wrong shape");
        he = *opts.initial_equivalent;
    } else if (opts.init == AlsOptions::Init::eigen) {
        he = als_init(views.mode2, N);
    } else {
        RngStream rng(opts.random_init_seed, 0);
        he = sample_complex_gaussian(N, T, 1.0, rng);
    }
    CMat hr_prev = CMat::Zero(K, N);

    for (int i = 1; i <= opts.max_iterations; ++i) {
        const CMat kr1 = khatri_rao(he.transpose(), phases);
        const auto s1 = detail::kr_least_squares(he.transpose(), phases, kr1, views.mode1);
        CMat hr = s1.solution.transpose();
        const CMat kr2 = khatri_rao(phases, hr);
        const auto s2 = detail::kr_least_squares(phases, hr, kr2, views.mode2);
        he = s2.solution;
        res.rank_deficient |= s1.rank_deficient || s2.rank_deficient;

        res.iterations = i;
        res.residual_history.push_back((views.mode2 - kr2 * he).norm());
        const double hr_energy = hr.squaredNorm();
        res.final_delta = hr_energy > 0.0 ? (hr - hr_prev).squaredNorm() / hr_energy : 0.0;
        hr_prev.swap(hr);
        if (res.final_delta <= opts.epsilon) {
            res.converged = true;
            break;
        }
    }
    res.ris_to_users = std::move(hr_prev);
    res.equivalent = std::move(he);
    return res;
}

} // namespace risce
