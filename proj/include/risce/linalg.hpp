#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "risce/errors.hpp"
#include "risce/rng.hpp"
#include "risce/tensor.hpp"

namespace risce {

/// Column-wise Khatri-Rao product of A (I x N) and B (J x N).
///
/// Column n of the result is kron(A.col(n), B.col(n)); row i*J + j holds
/// A(i, n) * B(j, n), so row blocks follow A.
inline CMat khatri_rao(const CMat& A, const CMat& B) {
    if (A.cols() != B.cols())
        throw dimension_error("khatri_rao: column counts differ");
    const Eigen::Index I = A.rows(), J = B.rows(), N = A.cols();
    CMat out(I * J, N);
    for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index i = 0; i < I; ++i)
            out.col(n).segment(i * J, J) = A(i, n) * B.col(n);
    return out;
}

struct PinvResult {
    CMat pinv;
    Eigen::Index rank = 0;
};

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values at or below tol * sigma_max are treated as zero; a
/// negative tol selects max(rows, cols) * machine epsilon.
inline PinvResult pseudo_inverse_with_rank(const CMat& A, double tol = -1.0) {
    if (A.size() == 0)
        throw dimension_error("pseudo_inverse: empty matrix");
    Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw numerical_error("pseudo_inverse: SVD did not converge");
    const Eigen::VectorXd& sv = svd.singularValues();
    const double eps = std::numeric_limits<double>::epsilon();
    const double cutoff =
        (tol < 0.0 ? static_cast<double>(std::max(A.rows(), A.cols())) * eps : tol) *
        (sv.size() > 0 ? sv(0) : 0.0);
    PinvResult res;
    Eigen::VectorXd inv_sv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) {
            inv_sv(i) = 1.0 / sv(i);
            ++res.rank;
        }
    }
    res.pinv = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().adjoint();
    return res;
}

inline CMat pseudo_inverse(const CMat& A, double tol = -1.0) {
    return pseudo_inverse_with_rank(A, tol).pinv;
}

struct EigPairs {
    CMat vectors;           // one eigenvector per column
    Eigen::VectorXd values; // matching eigenvalues, descending
};

namespace detail {

// Rotate v so its largest-magnitude entry is real and nonnegative. Ties on
// magnitude go to the lowest index.
inline void fix_eigvec_phase(Eigen::Ref<CVec> v) {
    Eigen::Index best = 0;
    double best_mag = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::abs(v(i));
        if (m > best_mag + 1e-15 * std::max(1.0, best_mag)) {
            best_mag = m;
            best = i;
        }
    }
    if (best_mag == 0.0) return;
    v *= std::conj(v(best)) / best_mag;
    v(best) = cxd{std::abs(v(best)), 0.0}; // kill rounding residue in Im
}

inline bool lex_greater(const CVec& a, const CVec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real()) return a(i).real() > b(i).real();
        if (a(i).imag() != b(i).imag()) return a(i).imag() > b(i).imag();
    }
    return false;
}

} // namespace detail

/// n dominant eigenpairs of a Hermitian matrix G, eigenvalues descending.
///
/// Deterministic across runs: each eigenvector's phase is fixed so its
/// largest-magnitude entry is real nonnegative, and eigenvectors whose
/// eigenvalues coincide are ordered lexicographically (descending).
inline EigPairs dominant_eigvecs(const CMat& G, Eigen::Index n) {
    if (G.rows() != G.cols())
        throw dimension_error("dominant_eigvecs: matrix must be square");
    if (n < 1 || n > G.rows())
        throw dimension_error("dominant_eigvecs: invalid eigenpair count");
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if ((G - G.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw numerical_error("dominant_eigvecs: matrix is not Hermitian");

    Eigen::SelfAdjointEigenSolver<CMat> es(G);
    if (es.info() != Eigen::Success)
        throw numerical_error("dominant_eigvecs: eigensolver did not converge");

    const Eigen::Index dim = G.rows();
    std::vector<CVec> vecs(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
        vecs[static_cast<std::size_t>(i)] = es.eigenvectors().col(i);
        detail::fix_eigvec_phase(vecs[static_cast<std::size_t>(i)]);
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return es.eigenvalues()(a) > es.eigenvalues()(b);
    });
    // Within groups of (numerically) equal eigenvalues the eigenbasis is
    // arbitrary; order those columns lexicographically so repeated runs and
    // symmetric inputs give one canonical answer.
    const double tie_tol = 1e-12 * std::max(1.0, std::abs(es.eigenvalues()(order[0])));
    std::size_t lo = 0;
    while (lo < order.size()) {
        std::size_t hi = lo + 1;
        while (hi < order.size() &&
               std::abs(es.eigenvalues()(order[hi]) - es.eigenvalues()(order[lo])) <= tie_tol)
            ++hi;
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo),
                         order.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](Eigen::Index a, Eigen::Index b) {
                             return detail::lex_greater(vecs[static_cast<std::size_t>(a)],
                                                        vecs[static_cast<std::size_t>(b)]);
                         });
        lo = hi;
    }

    EigPairs out;
    out.vectors.resize(dim, n);
    out.values.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.vectors.col(j) = vecs[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
        out.values(j) = es.eigenvalues()(order[static_cast<std::size_t>(j)]);
    }
    return out;
}

/// First num_cols columns of the num_rows-point DFT matrix, scaled by
/// 1 / sqrt(num_rows); the columns are orthonormal. Requires
/// num_rows >= num_cols.
inline CMat dft_phase_matrix(Eigen::Index num_rows, Eigen::Index num_cols) {
    if (num_rows < 1 || num_cols < 1)
        throw dimension_error("dft_phase_matrix: dimensions must be positive");
    if (num_rows < num_cols)
        throw dimension_error("dft_phase_matrix: need at least as many rows as columns");
    CMat out(num_rows, num_cols);
    const double step = -2.0 * std::numbers::pi / static_cast<double>(num_rows);
    const double scale = 1.0 / std::sqrt(static_cast<double>(num_rows));
    for (Eigen::Index r = 0; r < num_rows; ++r)
        for (Eigen::Index c = 0; c < num_cols; ++c)
            out(r, c) = std::polar(scale, step * static_cast<double>(r) * static_cast<double>(c));
    return out;
}

/// Matrix of i.i.d. CN(0, variance) entries, drawn row by row.
inline CMat sample_complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance,
                                    RngStream& rng) {
    if (rows < 0 || cols < 0)
        throw dimension_error("sample_complex_gaussian: negative dimension");
    CMat out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            out(r, c) = rng.complex_gaussian(variance);
    return out;
}

/// NMSE of an estimate against a nonzero reference, in linear scale.
inline double nmse(const CMat& estimate, const CMat& reference) {
    if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
        throw dimension_error("nmse: shape mismatch");
    const double ref_energy = reference.squaredNorm();
    if (ref_energy == 0.0)
        throw numerical_error("nmse: reference has zero energy");
    return (estimate - reference).squaredNorm() / ref_energy;
}

/// 10 log10 of a linear NMSE, clamped below at floor_db.
inline double nmse_db(double linear, double floor_db = -120.0) {
    if (!(linear > 0.0)) return floor_db;
    return std::max(10.0 * std::log10(linear), floor_db);
}

} // namespace risce
