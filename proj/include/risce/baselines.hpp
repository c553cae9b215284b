#pragma once

#include "risce/linalg.hpp"

namespace risce {

struct LskrfResult {
    CMat ris_to_users; // K x N
    CMat equivalent;   // N x T
};

/// Khatri-Rao factorization baseline: one LS solve of the mode-3 unfolding
/// against the transposed phase schedule estimates the columnwise product
/// ris_to_users (.)kr equivalent^T; each of its columns, reshaped to a
/// K x T matrix, is then split by its leading singular pair with the
/// singular value shared evenly between the two factors.
///
/// Exact at zero noise with an orthonormal phase schedule. Fewer phase
/// configurations than RIS elements leaves the LS step underdetermined and
/// is rejected.
inline LskrfResult lskrf_estimate(const CMat& mode3, const CMat& phases, Eigen::Index num_users) {
    const Eigen::Index P = phases.rows(), N = phases.cols();
    if (mode3.cols() != P)
        throw dimension_error("lskrf_estimate: mode-3 view and phase schedule disagree");
    if (num_users < 1 || mode3.rows() % num_users != 0)
        throw dimension_error("lskrf_estimate: row count is not a multiple of the user count");
    const Eigen::Index K = num_users, T = mode3.rows() / num_users;

    const auto phi_t_pinv = pseudo_inverse_with_rank(phases.transpose());
    if (phi_t_pinv.rank < N)
        throw numerical_error("lskrf_estimate: phase schedule is rank deficient");
    LskrfResult res;
    const CMat kr_hat = mode3 * phi_t_pinv.pinv; // (K*T) x N

    res.ris_to_users.resize(K, N);
    res.equivalent.resize(N, T);
    for (Eigen::Index n = 0; n < N; ++n) {
        // Column n stacks the K x T outer product row-major (k outer, t inner).
        Eigen::Map<const Eigen::Matrix<cxd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            block(kr_hat.col(n).data(), K, T);
        Eigen::JacobiSVD<CMat> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success)
            throw numerical_error("lskrf_estimate: SVD did not converge");
        const double root = std::sqrt(svd.singularValues()(0));
        CVec u = svd.matrixU().col(0);
        CVec v = svd.matrixV().col(0);
        // Deterministic representative: rotate the pair so u's largest
        // entry is real positive (the product u * v^H is unchanged).
        Eigen::Index j = 0;
        const double umax = u.cwiseAbs().maxCoeff(&j);
        if (umax > 0.0) {
            const cxd phase = u(j) / umax;
            u /= phase;
            v /= phase;
        }
        res.ris_to_users.col(n) = root * u;
        res.equivalent.row(n) = root * v.adjoint();
    }
    return res;
}

/// Signal recovery with perfect channel knowledge, sharing the receiver's
/// side information so it stays a genuine lower bound for the blind
/// pipeline: pilot columns are known outright, and every data column is
/// solved by least squares restricted to its active support through the
/// known composite mixing matrix. Restricted to the data columns (fixed
/// support), the map is linear in the observation.
inline CMat genie_ls_recover(const CMat& mode2, const CMat& ris_to_users, const CMat& bs_to_ris,
                             const CMat& phases, const BoolArr& support,
                             Eigen::Index pilot_cols, const CMat& pilot_values) {
    const Eigen::Index N = phases.cols(), M = bs_to_ris.cols(), T = mode2.cols();
    if (ris_to_users.cols() != N || bs_to_ris.rows() != N)
        throw dimension_error("genie_ls_recover: RIS dimension mismatch");
    if (mode2.rows() != phases.rows() * ris_to_users.rows())
        throw dimension_error("genie_ls_recover: mode-2 view shape mismatch");
    if (support.rows() != M || support.cols() != T)
        throw dimension_error("genie_ls_recover: support mask shape mismatch");
    if (pilot_cols < 0 || pilot_cols > T ||
        (pilot_cols > 0 && (pilot_values.rows() != M || pilot_values.cols() < pilot_cols)))
        throw dimension_error("genie_ls_recover: pilot block shape mismatch");

    const CMat mixing = khatri_rao(phases, ris_to_users) * bs_to_ris; // (P*K) x M
    CMat x_hat = CMat::Zero(M, T);
    x_hat.leftCols(pilot_cols) = pilot_values.leftCols(pilot_cols);
    CMat active(mixing.rows(), M);
    for (Eigen::Index t = pilot_cols; t < T; ++t) {
        Eigen::Index count = 0;
        for (Eigen::Index m = 0; m < M; ++m)
            if (support(m, t)) active.col(count++) = mixing.col(m);
        if (count == 0) continue;
        const Eigen::ColPivHouseholderQR<CMat> qr(active.leftCols(count));
        if (qr.rank() < count)
            throw numerical_error("genie_ls_recover: active mixing columns are rank deficient");
        const CVec sol = qr.solve(mode2.col(t));
        Eigen::Index pos = 0;
        for (Eigen::Index m = 0; m < M; ++m)
            if (support(m, t)) x_hat(m, t) = sol(pos++);
    }
    return x_hat;
}

} // namespace risce
