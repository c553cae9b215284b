#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "risce/linalg.hpp"
#include "risce/rng.hpp"
#include "risce/tensor.hpp"

namespace risce {

/// Dimensions and statistics of one simulated downlink scene.
struct SceneConfig {
    Eigen::Index users = 1;         // K single-antenna receivers
    Eigen::Index bs_antennas = 1;   // M
    Eigen::Index ris_elements = 1;  // N
    Eigen::Index slots = 1;         // T symbol periods per frame
    Eigen::Index phase_configs = 1; // P reflection patterns per frame
    double sparsity = 1.0;          // fraction of active entries per data column
    Eigen::Index pilot_len = 0;     // leading dense pilot columns
    double snr_db = std::numeric_limits<double>::infinity();
    double signal_var = 1.0;
    double channel_var = 1.0;

    // T >= M keeps the transmit frame tall enough to be full row rank, which
    // the recovery stage relies on. P >= N (orthonormal phases, unique
    // tensor factorization) is the comfortable regime but not enforced:
    // part of the experiment space deliberately runs undersampled phase
    // schedules.
    void validate() const {
        if (users < 1 || bs_antennas < 1 || ris_elements < 1 || slots < 1 || phase_configs < 1)
            throw config_error("SceneConfig: all dimensions must be at least 1");
        if (slots < bs_antennas)
            throw config_error("SceneConfig: slots must be >= bs_antennas");
        if (sparsity < 0.0 || sparsity > 1.0)
            throw config_error("SceneConfig: sparsity must lie in [0, 1]");
        if (pilot_len < 0 || pilot_len > slots)
            throw config_error("SceneConfig: pilot_len must lie in [0, slots]");
        if (!(signal_var >= 0.0) || !(channel_var >= 0.0) || std::isinf(signal_var) ||
            std::isinf(channel_var))
            throw config_error("SceneConfig: variances must be finite and nonnegative");
        if (std::isnan(snr_db))
            throw config_error("SceneConfig: snr_db is NaN");
    }
};

struct ChannelPair {
    CMat bs_to_ris;   // N x M
    CMat ris_to_users; // K x N
};

struct SignalFrame {
    CMat symbols;            // M x T, zero outside support
    BoolArr support;         // true where an entry may be nonzero
    Eigen::Index pilot_cols = 0; // leading fully known columns

    Eigen::Ref<const CMat> pilot_block() const { return symbols.leftCols(pilot_cols); }
};

struct PhaseSchedule {
    CMat phases; // P x N, one reflection pattern per row
};

struct ReceivedTensor {
    Tensor3 samples; // K x T x P
    double noise_var = 0.0;
};

/// Entry (m, t) of the deterministic pilot pattern: row m of the M-point
/// DFT sampled at column t mod M. Unit modulus, and any M consecutive
/// columns form an invertible block.
inline cxd pilot_symbol(Eigen::Index bs_antennas, Eigen::Index m, Eigen::Index t) {
    const double step = -2.0 * std::numbers::pi / static_cast<double>(bs_antennas);
    return std::polar(1.0, step * static_cast<double>(m) * static_cast<double>(t % bs_antennas));
}

/// RIS reflection schedule: rows of the P-point DFT scaled by 1/sqrt(P),
/// so the columns are orthonormal when P >= N. With fewer configurations
/// than elements (P < N) the columns come from the N-point DFT instead;
/// they stay distinct and unit-modulus but can no longer be orthonormal.
inline PhaseSchedule dft_phase_schedule(Eigen::Index phase_configs, Eigen::Index ris_elements) {
    if (phase_configs >= ris_elements)
        return {dft_phase_matrix(phase_configs, ris_elements)};
    CMat phi(phase_configs, ris_elements);
    const double step = -2.0 * std::numbers::pi / static_cast<double>(ris_elements);
    const double scale = 1.0 / std::sqrt(static_cast<double>(phase_configs));
    for (Eigen::Index p = 0; p < phase_configs; ++p)
        for (Eigen::Index n = 0; n < ris_elements; ++n)
            phi(p, n) = std::polar(scale, step * static_cast<double>(p) * static_cast<double>(n));
    return {phi};
}

/// Draws the BS-to-RIS and RIS-to-users channels, i.i.d. CN(0, channel_var).
/// BS-to-RIS is drawn first; the order is part of the reproducibility
/// contract.
inline ChannelPair gen_channels(const SceneConfig& cfg, RngStream& rng) {
    cfg.validate();
    ChannelPair ch;
    ch.bs_to_ris = sample_complex_gaussian(cfg.ris_elements, cfg.bs_antennas, cfg.channel_var, rng);
    ch.ris_to_users = sample_complex_gaussian(cfg.users, cfg.ris_elements, cfg.channel_var, rng);
    return ch;
}

namespace detail {

// Distinct row indices for one sparse column: partial Fisher-Yates over
// 0..M-1, result sorted ascending.
inline std::vector<Eigen::Index> draw_support_rows(Eigen::Index rows, Eigen::Index count,
                                                   RngStream& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (Eigen::Index j = 0; j < count; ++j) {
        const auto pick = j + static_cast<Eigen::Index>(
                                  rng.uniform_index(static_cast<std::uint64_t>(rows - j)));
        std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

/// Builds the transmit frame: pilot_len leading deterministic pilot columns
/// followed by sparse data columns with round(sparsity * M) active entries
/// each, active values i.i.d. CN(0, signal_var).
///
/// The frame is regenerated (fresh support and values) while it is rank
/// deficient, since downstream recovery assumes a full-rank frame; scenes
/// whose deterministic part cannot reach full rank are returned as-is.
inline SignalFrame gen_signal(const SceneConfig& cfg, RngStream& rng) {
    cfg.validate();
    const Eigen::Index M = cfg.bs_antennas, T = cfg.slots;
    SignalFrame frame;
    frame.pilot_cols = cfg.pilot_len;
    frame.symbols = CMat::Zero(M, T);
    frame.support = BoolArr::Constant(M, T, false);
    for (Eigen::Index t = 0; t < frame.pilot_cols; ++t)
        for (Eigen::Index m = 0; m < M; ++m) {
            frame.symbols(m, t) = pilot_symbol(M, m, t);
            frame.support(m, t) = true;
        }

    const auto active_per_col = static_cast<Eigen::Index>(std::llround(cfg.sparsity * static_cast<double>(M)));
    if (active_per_col == 0 || frame.pilot_cols == T) return frame;

    for (int attempt = 0; attempt < 64; ++attempt) {
        for (Eigen::Index t = frame.pilot_cols; t < T; ++t) {
            frame.symbols.col(t).setZero();
            frame.support.col(t).fill(false);
            for (Eigen::Index m : detail::draw_support_rows(M, active_per_col, rng)) {
                frame.symbols(m, t) = rng.complex_gaussian(cfg.signal_var);
                frame.support(m, t) = true;
            }
        }
        if (frame.symbols.colPivHouseholderQr().rank() == std::min(M, T)) return frame;
        if (cfg.signal_var == 0.0) return frame; // redrawing zeros cannot help
    }
    throw numerical_error("gen_signal: could not draw a full-rank frame");
}

/// Scalar entry of the noiseless received tensor, summed element by
/// element. Deliberately naive; this is the reference every vectorized
/// path is checked against.
inline cxd noiseless_entry(const ChannelPair& ch, const CMat& equivalent, const PhaseSchedule& ps,
                           Eigen::Index k, Eigen::Index t, Eigen::Index p) {
    const Eigen::Index N = ch.bs_to_ris.rows();
    if (ch.ris_to_users.cols() != N || equivalent.rows() != N || ps.phases.cols() != N)
        throw dimension_error("noiseless_entry: RIS dimension mismatch");
    if (k < 0 || k >= ch.ris_to_users.rows() || t < 0 || t >= equivalent.cols() || p < 0 ||
        p >= ps.phases.rows())
        throw index_error("noiseless_entry: index out of range");
    cxd acc{0.0, 0.0};
    for (Eigen::Index n = 0; n < N; ++n)
        acc += ch.ris_to_users(k, n) * equivalent(n, t) * ps.phases(p, n);
    return acc;
}

/// Propagates the frame through both channels under each reflection
/// pattern and adds white complex Gaussian noise.
///
/// The noise variance is chosen against the realized noiseless tensor:
/// snr_db = 10 log10(mean |Z|^2 per entry / noise_var). An infinite snr_db
/// yields the noiseless tensor. Noise slices are drawn for p = 0, 1, ...
/// in order.
inline ReceivedTensor synthesize_received(const ChannelPair& ch, const SignalFrame& sig,
                                          const PhaseSchedule& ps, double snr_db, RngStream& rng) {
    const Eigen::Index N = ch.bs_to_ris.rows();
    const Eigen::Index M = ch.bs_to_ris.cols();
    const Eigen::Index K = ch.ris_to_users.rows();
    const Eigen::Index T = sig.symbols.cols();
    const Eigen::Index P = ps.phases.rows();
    if (ch.ris_to_users.cols() != N || ps.phases.cols() != N || sig.symbols.rows() != M)
        throw dimension_error("synthesize_received: dimension mismatch");

    const CMat equivalent = ch.bs_to_ris * sig.symbols; // N x T
    ReceivedTensor out;
    out.samples = Tensor3(K, T, P);
    double signal_energy = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
        const CVec d = ps.phases.row(p).transpose();
        out.samples.slice(p) = ch.ris_to_users * (d.asDiagonal() * equivalent);
        signal_energy += out.samples.slice(p).squaredNorm();
    }

    if (std::isinf(snr_db) && snr_db > 0.0) {
        out.noise_var = 0.0;
        return out;
    }
    const double mean_power = signal_energy / static_cast<double>(K * T * P);
    const double ref_power = mean_power > 0.0 ? mean_power : 1.0;
    out.noise_var = ref_power / std::pow(10.0, snr_db / 10.0);
    for (Eigen::Index p = 0; p < P; ++p)
        out.samples.slice(p) += sample_complex_gaussian(K, T, out.noise_var, rng);
    return out;
}

} // namespace risce
