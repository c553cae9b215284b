#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "risce/align.hpp"
#include "risce/als.hpp"
#include "risce/baselines.hpp"
#include "risce/bigamp.hpp"
#include "risce/scene.hpp"

namespace risce {

enum class Method { proposed, lskrf, genie_ls };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::lskrf: return "lskrf";
        case Method::genie_ls: return "genie_ls";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    if (name == "proposed") return Method::proposed;
    if (name == "lskrf") return Method::lskrf;
    if (name == "genie_ls") return Method::genie_ls;
    throw config_error("unknown method: " + name);
}

struct ExperimentConfig {
    SceneConfig scene;
    std::vector<double> snr_grid_db = {0, 5, 10, 15, 20, 25, 30};
    int trials = 500;
    std::vector<Method> methods = {Method::proposed, Method::lskrf, Method::genie_ls};
    AlsOptions als;
    BigAmpOptions bigamp;
    AlignMode alignment = AlignMode::diagonal_ls;
    std::uint64_t master_seed = 1;
    std::string output_path = "results";
    bool collect_timings = false; // wall_time column stays 0 (and byte-stable) when off

    void validate() const {
        scene.validate();
        if (trials < 1) throw config_error("ExperimentConfig: trials must be at least 1");
        if (snr_grid_db.empty()) throw config_error("ExperimentConfig: empty SNR grid");
        if (methods.empty()) throw config_error("ExperimentConfig: no methods selected");
        for (double s : snr_grid_db)
            if (std::isnan(s)) throw config_error("ExperimentConfig: NaN in SNR grid");
        if (alignment == AlignMode::pilot_ls)
            throw config_error("ExperimentConfig: pilot_ls applies to the bilinear stage only");
    }
};

struct ResultRow {
    Method method = Method::proposed;
    double snr_db = 0.0;
    double nmse_hr_db = 0.0;
    double nmse_hs_db = 0.0;
    double nmse_x_db = 0.0;
    double mean_als_iters = 0.0;
    double mean_bigamp_iters = 0.0;
    int trials_used = 0;
    int failures = 0;
    double wall_time = 0.0; // accumulated seconds over trials; 0 unless timings were collected
};

struct ResultTable {
    std::vector<ResultRow> rows;

    const ResultRow& at(Method m, double snr_db) const {
        for (const ResultRow& r : rows)
            if (r.method == m && r.snr_db == snr_db) return r;
        throw index_error("ResultTable: no such (method, snr) row");
    }
};

/// One (trial, snr, method) outcome, exposed through the per-trial dump.
struct TrialRecord {
    int trial = 0;
    Method method = Method::proposed;
    double snr_db = 0.0;
    bool ok = false;
    bool diverged = false;
    double nmse_hr = std::numeric_limits<double>::quiet_NaN(); // linear
    double nmse_hs = std::numeric_limits<double>::quiet_NaN();
    double nmse_x = std::numeric_limits<double>::quiet_NaN();
    int als_iters = -1;
    int bigamp_iters = -1;
    double seconds = 0.0;
};

namespace detail {

struct TrialContext {
    const ExperimentConfig& cfg;
    ChannelPair channels;
    SignalFrame frame;
    PhaseSchedule schedule;
    CMat equivalent_true; // bs_to_ris * symbols

    // Ground truth in the metric convention: under first-row normalization
    // the reference itself is canonicalized the same way as the estimates.
    CMat hr_ref, hs_ref;
};

inline PriorDescriptor signal_prior(const TrialContext& ctx) {
    const SceneConfig& sc = ctx.cfg.scene;
    PriorDescriptor prior = PriorDescriptor::make_bernoulli_gaussian(sc.signal_var, sc.sparsity);
    prior.with_support(ctx.frame.support);
    if (ctx.frame.pilot_cols > 0) {
        BoolArr pin = BoolArr::Constant(sc.bs_antennas, sc.slots, false);
        pin.leftCols(ctx.frame.pilot_cols).setConstant(true);
        prior.with_pinned(ctx.frame.symbols, pin);
    }
    return prior;
}

// The bilinear stage observes a first-stage *estimate*, so its effective
// measurement error is the estimation error of that stage, not the channel
// noise floor. Estimate the tensor noise from the fit residual and push it
// through the normal matrix of the equivalent-channel solve to get a
// per-entry error power; a degenerate normal matrix (nothing trustworthy to
// report) falls back to the estimate's own per-entry power.
inline double equivalent_error_power(const CMat& phases, const CMat& hr_hat, const CMat& he_hat,
                                     const CMat& mode2) {
    const Eigen::Index n = he_hat.rows();
    const double entries = static_cast<double>(mode2.size());
    const double fitted = static_cast<double>(n * (hr_hat.rows() + he_hat.cols()));
    const double dof = std::max(entries - fitted, 0.5 * entries);
    const double resid2 = (mode2 - khatri_rao(phases, hr_hat) * he_hat).squaredNorm();
    const double noise_var = resid2 / dof;

    const double cap = he_hat.squaredNorm() / static_cast<double>(he_hat.size());
    const CMat gram =
        (phases.adjoint() * phases).cwiseProduct(hr_hat.adjoint() * hr_hat);
    const Eigen::LDLT<CMat> ldlt(gram);
    if (ldlt.info() != Eigen::Success) return cap;
    const double tol = static_cast<double>(n) * 1e-12 * gram.diagonal().real().maxCoeff();
    if (!(ldlt.vectorD().real().array() > tol).all()) return cap;
    const double trace_inv =
        ldlt.solve(CMat::Identity(n, n)).trace().real() / static_cast<double>(n);
    return std::min(noise_var * trace_inv, cap);
}

// Second stage shared by the proposed pipeline and the LSKRF baseline:
// factor the (still ambiguously scaled) equivalent-channel estimate, carry
// the first-stage per-column scales over to the left factor, then anchor
// the global scalar on the pilots.
inline void run_recovery_stage(const TrialContext& ctx, const CMat& hr_raw, const CMat& he_raw,
                               const CMat& mode2, RngStream& rng, TrialRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;

    // The first stage parks an arbitrary share of each component's power in
    // the equivalent matrix (diagonal ambiguity). Move the split to the
    // user-side channel's prior scale so the bilinear stage sees an
    // observation whose left factor actually looks like its prior.
    CMat hr_hat = hr_raw;
    CMat he_hat = he_raw;
    const double target =
        std::sqrt(static_cast<double>(hr_hat.rows()) * cfg.scene.channel_var);
    for (Eigen::Index c = 0; c < hr_hat.cols(); ++c) {
        const double norm = hr_hat.col(c).norm();
        if (norm > 0.0 && target > 0.0) {
            hr_hat.col(c) *= target / norm;
            he_hat.row(c) *= norm / target;
        }
    }

    BigAmpOptions amp_opts = cfg.bigamp;
    amp_opts.assumed_noise_var =
        std::max(amp_opts.assumed_noise_var,
                 equivalent_error_power(ctx.schedule.phases, hr_hat, he_hat, mode2));
    // Whether a run leaves its starting basin hinges on the random factor
    // draw, so a failed run gets a bounded number of fresh starts from the
    // same per-trial stream before the trial is counted as a failure.
    // Failed means diverged, or a returned factorization that misses the
    // observation by far more than the assumed error level: a run stalled
    // short of any fixed point drifts downhill the whole way, so the
    // relative divergence test cannot see it.
    const double fit_budget =
        30.0 * static_cast<double>(he_hat.size()) * amp_opts.assumed_noise_var;
    BigAmpResult amp;
    bool failed = true;
    for (int attempt = 0; attempt < 3 && failed; ++attempt) {
        amp = bigamp_run(he_hat, signal_prior(ctx),
                         PriorDescriptor::make_gaussian(cfg.scene.channel_var),
                         cfg.scene.bs_antennas, amp_opts, rng);
        failed = amp.diagnostics.diverged ||
                 (he_hat - amp.bs_to_ris * amp.symbols).squaredNorm() > fit_budget;
    }
    rec.bigamp_iters = amp.diagnostics.iterations;
    rec.diverged = failed;

    const AlignedParafac stage1 =
        align_parafac(hr_hat, he_hat, ctx.hr_ref, cfg.alignment);
    const CMat hs_carried =
        stage1.report.scale_factors.cwiseInverse().asDiagonal() * amp.bs_to_ris;
    const AlignedBilinear stage2 = align_bilinear(hs_carried, amp.symbols, ctx.frame.pilot_cols,
                                                  ctx.frame.pilot_block());

    rec.nmse_hr = nmse(stage1.ris_to_users, ctx.hr_ref);
    rec.nmse_hs = nmse(stage2.bs_to_ris, ctx.hs_ref);
    rec.nmse_x = nmse(stage2.symbols, ctx.frame.symbols);
}

inline TrialRecord run_cell(const TrialContext& ctx, const UnfoldedViews& views, Method method,
                            RngStream& rng) {
    const ExperimentConfig& cfg = ctx.cfg;
    TrialRecord rec;
    rec.method = method;
    switch (method) {
        case Method::proposed: {
            const AlsResult als = als_estimate(views, ctx.schedule.phases, cfg.als);
            rec.als_iters = als.iterations;
            run_recovery_stage(ctx, als.ris_to_users, als.equivalent, views.mode2, rng, rec);
            break;
        }
        case Method::lskrf: {
            const LskrfResult lskrf =
                lskrf_estimate(views.mode3, ctx.schedule.phases, cfg.scene.users);
            run_recovery_stage(ctx, lskrf.ris_to_users, lskrf.equivalent, views.mode2, rng, rec);
            break;
        }
        case Method::genie_ls: {
            const CMat x_hat =
                genie_ls_recover(views.mode2, ctx.channels.ris_to_users, ctx.channels.bs_to_ris,
                                 ctx.schedule.phases, ctx.frame.support, ctx.frame.pilot_cols,
                                 ctx.frame.pilot_block());
            rec.nmse_x = nmse(x_hat, ctx.frame.symbols);
            break;
        }
    }
    rec.ok = true;
    return rec;
}

inline std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, int trial) {
    RngStream rng(cfg.master_seed, static_cast<std::uint64_t>(trial));
    TrialContext ctx{cfg,
                     gen_channels(cfg.scene, rng),
                     gen_signal(cfg.scene, rng),
                     dft_phase_schedule(cfg.scene.phase_configs, cfg.scene.ris_elements),
                     {},
                     {},
                     {}};
    ctx.equivalent_true = ctx.channels.bs_to_ris * ctx.frame.symbols;
    if (cfg.alignment == AlignMode::first_row_normalization) {
        // Canonicalize the truth with its own first row so estimate and
        // reference live in the same representative.
        ctx.hr_ref = ctx.channels.ris_to_users;
        ctx.hs_ref = ctx.channels.bs_to_ris;
        for (Eigen::Index n = 0; n < ctx.hr_ref.cols(); ++n) {
            const cxd head = ctx.hr_ref(0, n);
            if (head != cxd{0.0, 0.0}) {
                ctx.hr_ref.col(n) /= head;
                ctx.hs_ref.row(n) *= head;
            }
        }
    } else {
        ctx.hr_ref = ctx.channels.ris_to_users;
        ctx.hs_ref = ctx.channels.bs_to_ris;
    }

    std::vector<TrialRecord> records;
    records.reserve(cfg.snr_grid_db.size() * cfg.methods.size());
    for (double snr : cfg.snr_grid_db) {
        const ReceivedTensor received =
            synthesize_received(ctx.channels, ctx.frame, ctx.schedule, snr, rng);
        const UnfoldedViews views = unfold(received.samples);
        for (Method method : cfg.methods) {
            const auto t0 = std::chrono::steady_clock::now();
            TrialRecord rec;
            try {
                rec = run_cell(ctx, views, method, rng);
            } catch (const std::exception&) {
                rec = TrialRecord{};
                rec.method = method;
                rec.ok = false;
            }
            rec.trial = trial;
            rec.snr_db = snr;
            if (cfg.collect_timings) {
                const auto t1 = std::chrono::steady_clock::now();
                rec.seconds = std::chrono::duration<double>(t1 - t0).count();
            }
            records.push_back(rec);
        }
    }
    return records;
}

} // namespace detail

/// Seeded Monte Carlo sweep over the SNR grid and method set.
///
/// Trial t draws everything it needs from RngStream(master_seed, t), so
/// the result is a pure function of the config: trials can run on any
/// number of workers and aggregate in trial order to byte-identical
/// tables. Mean NMSE is averaged in linear scale and converted to dB at
/// the end, with a -120 dB floor. A method/SNR cell whose hard failures
/// exceed half the trials aborts the experiment.
inline ResultTable run_experiment(const ExperimentConfig& cfg, int workers = 1,
                                  std::vector<TrialRecord>* per_trial = nullptr) {
    cfg.validate();
    const int trials = cfg.trials;
    std::vector<std::vector<TrialRecord>> outcomes(static_cast<std::size_t>(trials));

    const int pool_size = std::max(1, std::min(workers, trials));
    if (pool_size == 1) {
        for (int t = 0; t < trials; ++t)
            outcomes[static_cast<std::size_t>(t)] = detail::run_trial(cfg, t);
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int t = next.fetch_add(1);
                if (t >= trials) return;
                outcomes[static_cast<std::size_t>(t)] = detail::run_trial(cfg, t);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(pool_size));
        for (int w = 0; w < pool_size; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    ResultTable table;
    const std::size_t cells_per_trial = cfg.snr_grid_db.size() * cfg.methods.size();
    std::size_t cell = 0;
    for (double snr : cfg.snr_grid_db) {
        for (Method method : cfg.methods) {
            ResultRow row;
            row.method = method;
            row.snr_db = snr;
            double sum_hr = 0.0, sum_hs = 0.0, sum_x = 0.0;
            int cnt_hr = 0, cnt_hs = 0, cnt_x = 0;
            double sum_als = 0.0, sum_amp = 0.0;
            int cnt_als = 0, cnt_amp = 0;
            for (int t = 0; t < trials; ++t) {
                const TrialRecord& rec = outcomes[static_cast<std::size_t>(t)][cell];
                row.wall_time += rec.seconds;
                if (!rec.ok) {
                    ++row.failures;
                    continue;
                }
                if (rec.diverged) ++row.failures;
                ++row.trials_used;
                if (std::isfinite(rec.nmse_hr)) { sum_hr += rec.nmse_hr; ++cnt_hr; }
                if (std::isfinite(rec.nmse_hs)) { sum_hs += rec.nmse_hs; ++cnt_hs; }
                if (std::isfinite(rec.nmse_x)) { sum_x += rec.nmse_x; ++cnt_x; }
                if (rec.als_iters >= 0) { sum_als += rec.als_iters; ++cnt_als; }
                if (rec.bigamp_iters >= 0) { sum_amp += rec.bigamp_iters; ++cnt_amp; }
            }
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.nmse_hr_db = cnt_hr > 0 ? nmse_db(sum_hr / cnt_hr) : nan;
            row.nmse_hs_db = cnt_hs > 0 ? nmse_db(sum_hs / cnt_hs) : nan;
            row.nmse_x_db = cnt_x > 0 ? nmse_db(sum_x / cnt_x) : nan;
            row.mean_als_iters = cnt_als > 0 ? sum_als / cnt_als : nan;
            row.mean_bigamp_iters = cnt_amp > 0 ? sum_amp / cnt_amp : nan;
            if (row.failures > trials / 2)
                throw experiment_abort(std::string("over half the trials failed for method ") +
                                       method_name(method));
            table.rows.push_back(row);
            ++cell;
        }
    }

    if (per_trial) {
        per_trial->clear();
        per_trial->reserve(static_cast<std::size_t>(trials) * cells_per_trial);
        for (const auto& trial_records : outcomes)
            per_trial->insert(per_trial->end(), trial_records.begin(), trial_records.end());
    }
    return table;
}

struct PresetEntry {
    std::string label;
    ExperimentConfig config;
};

/// Experiment bundles reproducing the reference study's four figures at
/// their published dimensions. Sweep figures (fig5 over the antenna count,
/// fig6 over the sparsity) expand to one labeled entry per swept value.
inline std::vector<PresetEntry> preset(const std::string& name) {
    auto base = [](Eigen::Index K, Eigen::Index N, Eigen::Index M, double beta) {
        ExperimentConfig cfg;
        cfg.scene.users = K;
        cfg.scene.ris_elements = N;
        cfg.scene.bs_antennas = M;
        cfg.scene.slots = 100;
        cfg.scene.phase_configs = 16;
        cfg.scene.sparsity = beta;
        cfg.scene.pilot_len = M;
        cfg.als.epsilon = 1e-5;
        cfg.als.max_iterations = 15;
        // Fixed-damping bilinear AMP needs the brake at these dimensions;
        // undamped runs leave the fixed point on a sizable share of seeds.
        cfg.bigamp.damping = 0.7;
        cfg.trials = 500;
        return cfg;
    };
    std::vector<PresetEntry> out;
    if (name == "fig3") {
        out.push_back({"fig3", base(32, 16, 12, 0.2)});
    } else if (name == "fig4") {
        // The source figure states both N=20 and N=16; the first value wins.
        // With 16 phase configurations against 20 elements the Khatri-Rao
        // baseline is underdetermined and would reject every trial, so the
        // bundle keeps the methods that remain feasible.
        PresetEntry e{"fig4", base(32, 20, 12, 0.2)};
        e.config.methods = {Method::proposed, Method::genie_ls};
        out.push_back(std::move(e));
    } else if (name == "fig5") {
        for (Eigen::Index m : {8, 12, 16}) {
            PresetEntry e{"fig5_m" + std::to_string(m), base(16, 32, m, 0.2)};
            e.config.methods = {Method::proposed};
            // Fewer users than elements: the spectral start lands on plateau
            // fixed points at these shapes, a random start does not.
            e.config.als.init = AlsOptions::Init::random;
            out.push_back(std::move(e));
        }
    } else if (name == "fig6") {
        const std::pair<const char*, double> betas[] = {
            {"fig6_beta01", 0.1}, {"fig6_beta02", 0.2}, {"fig6_beta03", 0.3}, {"fig6_beta05", 0.5}};
        for (const auto& [label, beta] : betas) {
            PresetEntry e{label, base(20, 32, 16, beta)};
            e.config.methods = {Method::proposed};
            e.config.als.init = AlsOptions::Init::random;
            out.push_back(std::move(e));
        }
    } else {
        throw config_error("unknown preset: " + name);
    }
    return out;
}

inline std::vector<std::string> preset_names() { return {"fig3", "fig4", "fig5", "fig6"}; }

} // namespace risce
