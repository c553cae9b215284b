// Single-scene walkthrough of the full estimation pipeline, with every
// stage spelled out: synthesize one downlink frame, factor the received
// tensor, factor the equivalent channel, resolve both ambiguities, and
// print the resulting errors. A compact starting point for poking at the
// library interactively.

#include <cstdio>

#include "risce/risce.hpp"

using namespace risce;

int main() {
    SceneConfig scene;
    scene.users = 16;
    scene.bs_antennas = 8;
    scene.ris_elements = 16;
    scene.slots = 64;
    scene.phase_configs = 16;
    scene.sparsity = 0.25;
    scene.pilot_len = 8;
    scene.snr_db = 20.0;

    RngStream rng(42, 0);
    const ChannelPair channels = gen_channels(scene, rng);
    const SignalFrame frame = gen_signal(scene, rng);
    const PhaseSchedule schedule = dft_phase_schedule(scene.phase_configs, scene.ris_elements);
    const ReceivedTensor received =
        synthesize_received(channels, frame, schedule, scene.snr_db, rng);
    std::printf("scene: %td users, %td BS antennas, %td RIS elements, %td slots, %td phases\n",
                scene.users, scene.bs_antennas, scene.ris_elements, scene.slots,
                scene.phase_configs);
    std::printf("received tensor: %td x %td x %td, noise variance %.3g\n",
                received.samples.dim_k(), received.samples.dim_t(), received.samples.dim_p(),
                received.noise_var);

    // Stage one: tensor factorization splits user-side channel from the
    // equivalent channel (BS channel times signal), up to column scales.
    const UnfoldedViews views = unfold(received.samples);
    const AlsResult als = als_estimate(views, schedule.phases);
    std::printf("als: %d iterations, converged=%d, final residual %.3g\n", als.iterations,
                als.converged, als.residual_history.back());

    // Stage two: bilinear factorization of the equivalent channel under a
    // sparse prior with pinned pilot columns.
    PriorDescriptor signal =
        PriorDescriptor::make_bernoulli_gaussian(scene.signal_var, scene.sparsity);
    signal.with_support(frame.support);
    BoolArr pinned = BoolArr::Constant(scene.bs_antennas, scene.slots, false);
    pinned.leftCols(frame.pilot_cols).setConstant(true);
    signal.with_pinned(frame.symbols, pinned);
    BigAmpOptions opts;
    RngStream amp_rng(42, 1);
    const BigAmpResult amp =
        bigamp_run(als.equivalent, signal, PriorDescriptor::make_gaussian(scene.channel_var),
                   scene.bs_antennas, opts, amp_rng);
    std::printf("bigamp: %d iterations, diverged=%d\n", amp.diagnostics.iterations,
                amp.diagnostics.diverged);

    // Resolve the diagonal ambiguity of stage one against the true
    // user-side channel, carry those scales into the left factor of stage
    // two, and anchor the remaining scalar on the pilots.
    const AlignedParafac stage1 =
        align_parafac(als.ris_to_users, als.equivalent, channels.ris_to_users);
    const CMat carried =
        stage1.report.scale_factors.cwiseInverse().asDiagonal() * amp.bs_to_ris;
    const AlignedBilinear stage2 =
        align_bilinear(carried, amp.symbols, frame.pilot_cols, frame.pilot_block());

    const CMat equivalent_true = channels.bs_to_ris * frame.symbols;
    std::printf("nmse, user-side channel: %.2f dB\n",
                nmse_db(nmse(stage1.ris_to_users, channels.ris_to_users)));
    std::printf("nmse, equivalent channel: %.2f dB\n",
                nmse_db(nmse(stage1.equivalent, equivalent_true)));
    std::printf("nmse, BS-side channel: %.2f dB\n",
                nmse_db(nmse(stage2.bs_to_ris, channels.bs_to_ris)));
    std::printf("nmse, transmit signal: %.2f dB\n",
                nmse_db(nmse(stage2.symbols, frame.symbols)));
    return 0;
}
