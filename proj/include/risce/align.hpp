#pragma once

#include <vector>

#include "risce/linalg.hpp"

namespace risce {

// CP factorizations are recovered only up to a diagonal scaling: any
// invertible diagonal can migrate between the user-side channel's columns
// and the equivalent channel's rows. The bilinear stage then leaves one
// global complex scalar between its two factors. These helpers pick the
// representative that matches a reference (or the pilots) and report the
// scale factors they removed.

enum class AlignMode { diagonal_ls, first_row_normalization, pilot_ls };

struct AlignmentReport {
    AlignMode mode = AlignMode::diagonal_ls;
    CVec scale_factors;   // one per column (stage one) or a single scalar (stage two)
    double residual = 0.0;
    std::vector<Eigen::Index> failed_columns; // left at scale 1
};

struct AlignedParafac {
    CMat ris_to_users;
    CMat equivalent;
    AlignmentReport report;
};

/// Removes the diagonal ambiguity of the tensor factorization.
///
/// diagonal_ls scales each column of the user-side estimate onto the
/// reference by a per-column least-squares complex factor; the inverse
/// factor is applied to the matching row of the equivalent channel, so the
/// product they represent is unchanged. first_row_normalization instead
/// divides each column by its first entry (no reference needed beyond a
/// convention); callers comparing against ground truth must normalize the
/// reference the same way.
///
/// Columns that cannot be scaled (zero column, zero first entry) keep
/// factor 1 and are listed in the report.
inline AlignedParafac align_parafac(const CMat& ris_to_users_hat, const CMat& equivalent_hat,
                                    const CMat& ris_to_users_ref,
                                    AlignMode mode = AlignMode::diagonal_ls) {
    if (mode == AlignMode::pilot_ls)
        throw config_error("align_parafac: pilot_ls is a bilinear-stage mode");
    const Eigen::Index N = ris_to_users_hat.cols();
    if (equivalent_hat.rows() != N)
        throw dimension_error("align_parafac: factor column/row counts differ");
    if (mode == AlignMode::diagonal_ls &&
        (ris_to_users_ref.rows() != ris_to_users_hat.rows() || ris_to_users_ref.cols() != N))
        throw dimension_error("align_parafac: reference shape mismatch");

    AlignedParafac out;
    out.report.mode = mode;
    out.report.scale_factors = CVec::Ones(N);
    out.ris_to_users = ris_to_users_hat;
    out.equivalent = equivalent_hat;
    for (Eigen::Index n = 0; n < N; ++n) {
        cxd lambda{1.0, 0.0};
        bool ok = true;
        if (mode == AlignMode::diagonal_ls) {
            const double energy = ris_to_users_hat.col(n).squaredNorm();
            if (energy > 0.0)
                lambda = ris_to_users_hat.col(n).dot(ris_to_users_ref.col(n)) / energy;
            else
                ok = false;
        } else {
            const cxd head = ris_to_users_hat(0, n);
            if (head != cxd{0.0, 0.0})
                lambda = 1.0 / head;
            else
                ok = false;
        }
        if (!ok || lambda == cxd{0.0, 0.0}) {
            out.report.failed_columns.push_back(n);
            continue;
        }
        out.report.scale_factors(n) = lambda;
        out.ris_to_users.col(n) *= lambda;
        out.equivalent.row(n) /= lambda;
    }
    if (mode == AlignMode::diagonal_ls)
        out.report.residual = (out.ris_to_users - ris_to_users_ref).norm();
    return out;
}

struct AlignedBilinear {
    CMat bs_to_ris;
    CMat symbols;
    AlignmentReport report;
};

/// Removes the global complex scale between the bilinear factors by
/// matching the estimated pilot block against its known values: the single
/// scalar c minimizing ||c * X_hat[:, pilots] - pilots||_F is applied to
/// the symbol estimate and divided out of the channel estimate.
inline AlignedBilinear align_bilinear(const CMat& bs_to_ris_hat, const CMat& symbols_hat,
                                      Eigen::Index pilot_cols, const CMat& pilot_values) {
    if (pilot_cols < 1) throw alignment_error("align_bilinear: no pilot columns");
    if (pilot_cols > symbols_hat.cols() || pilot_values.rows() != symbols_hat.rows() ||
        pilot_values.cols() != pilot_cols)
        throw dimension_error("align_bilinear: pilot block shape mismatch");
    if (bs_to_ris_hat.cols() != symbols_hat.rows())
        throw dimension_error("align_bilinear: factor inner dimensions differ");

    const auto est_block = symbols_hat.leftCols(pilot_cols);
    const double energy = est_block.squaredNorm();
    if (energy == 0.0 || pilot_values.squaredNorm() == 0.0)
        throw alignment_error("align_bilinear: degenerate pilot block");
    const cxd c = (est_block.conjugate().cwiseProduct(pilot_values)).sum() / energy;
    if (c == cxd{0.0, 0.0})
        throw alignment_error("align_bilinear: pilot blocks are orthogonal");

    AlignedBilinear out;
    out.bs_to_ris = bs_to_ris_hat / c;
    out.symbols = symbols_hat * c;
    out.report.mode = AlignMode::pilot_ls;
    out.report.scale_factors = CVec::Constant(1, c);
    out.report.residual = (est_block * c - pilot_values).norm();
    return out;
}

} // namespace risce
