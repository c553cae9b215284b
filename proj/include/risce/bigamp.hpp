#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "risce/linalg.hpp"
#include "risce/rng.hpp"
#include "risce/tensor.hpp"

namespace risce {

/// Posterior mean and variance of one matrix entry.
struct Posterior {
    cxd mean{0.0, 0.0};
    double variance = 0.0;
};

/// Posterior of h under prior CN(0, sigma2) and observation h + noise with
/// variance nu_q centered at q_hat.
inline Posterior gaussian_denoise(cxd q_hat, double nu_q, double sigma2) {
    if (!(nu_q > 0.0))
        throw numerical_error("gaussian_denoise: observation variance must be positive");
    if (sigma2 < 0.0)
        throw numerical_error("gaussian_denoise: negative prior variance");
    const double denom = sigma2 + nu_q;
    return {sigma2 / denom * q_hat, sigma2 * nu_q / denom};
}

/// Posterior of x under the Bernoulli-Gaussian prior
/// (1 - beta) * delta(x) + beta * CN(0, sigma2) and observation x + noise
/// with variance nu_r centered at r_hat.
///
/// The activation probability is evaluated in the log domain; the direct
/// density ratio overflows once |r_hat|^2 / nu_r is large.
inline Posterior bg_denoise(cxd r_hat, double nu_r, double beta, double sigma2) {
    if (!(nu_r > 0.0))
        throw numerical_error("bg_denoise: observation variance must be positive");
    if (beta < 0.0 || beta > 1.0)
        throw numerical_error("bg_denoise: beta outside [0, 1]");
    if (beta == 0.0) return {cxd{0.0, 0.0}, 0.0};
    const Posterior active = gaussian_denoise(r_hat, nu_r, sigma2);
    if (beta == 1.0) return active;

    const double r2 = std::norm(r_hat);
    const double logit = std::log(beta) - std::log1p(-beta) + std::log(nu_r) -
                         std::log(sigma2 + nu_r) + r2 * sigma2 / (nu_r * (sigma2 + nu_r));
    double pi;
    if (logit > 40.0)
        pi = 1.0;
    else if (logit < -40.0)
        pi = std::exp(logit);
    else
        pi = 1.0 / (1.0 + std::exp(-logit));

    const cxd mean = pi * active.mean;
    const double second_moment = pi * (active.variance + std::norm(active.mean));
    return {mean, second_moment - std::norm(mean)};
}

/// Posterior of the noiseless product entry z given the plug-in estimate
/// (p_hat, nu_p) and the observed entry with assumed noise variance nu_w.
/// nu_w = 0 collapses the posterior onto the observation.
inline Posterior posterior_z(cxd p_hat, double nu_p, cxd observed, double nu_w) {
    if (!(nu_p > 0.0))
        throw numerical_error("posterior_z: plug-in variance must be positive");
    if (nu_w < 0.0)
        throw numerical_error("posterior_z: negative noise variance");
    const double denom = nu_p + nu_w;
    return {(nu_p * observed + nu_w * p_hat) / denom, nu_p * nu_w / denom};
}

/// Entrywise prior on a complex matrix factor.
///
/// Three layers, strongest first: pinned entries are clamped to known
/// values (pilots); a support mask turns masked-out entries into point
/// masses at zero; the remaining entries follow the declared kind.
struct PriorDescriptor {
    enum class Kind { gaussian, bernoulli_gaussian, pinned };

    Kind kind = Kind::gaussian;
    double variance = 1.0;
    double beta = 1.0; // active fraction, bernoulli_gaussian only
    std::optional<BoolArr> support_mask;
    std::optional<CMat> pinned_values;
    std::optional<BoolArr> pinned_mask; // defaults to everything when pinned_values is set

    static PriorDescriptor make_gaussian(double variance) {
        PriorDescriptor d;
        d.kind = Kind::gaussian;
        d.variance = variance;
        return d;
    }
    static PriorDescriptor make_bernoulli_gaussian(double variance, double beta) {
        PriorDescriptor d;
        d.kind = Kind::bernoulli_gaussian;
        d.variance = variance;
        d.beta = beta;
        return d;
    }
    static PriorDescriptor make_pinned(CMat values) {
        PriorDescriptor d;
        d.kind = Kind::pinned;
        d.pinned_values = std::move(values);
        return d;
    }

    PriorDescriptor& with_support(BoolArr mask) {
        support_mask = std::move(mask);
        return *this;
    }
    PriorDescriptor& with_pinned(CMat values, BoolArr mask) {
        pinned_values = std::move(values);
        pinned_mask = std::move(mask);
        return *this;
    }

    void validate(Eigen::Index rows, Eigen::Index cols) const {
        if (variance < 0.0) throw config_error("PriorDescriptor: negative variance");
        if (beta < 0.0 || beta > 1.0) throw config_error("PriorDescriptor: beta outside [0, 1]");
        auto check_shape = [&](Eigen::Index r, Eigen::Index c, const char* what) {
            if (r != rows || c != cols)
                throw dimension_error(std::string("PriorDescriptor: ") + what + " shape mismatch");
        };
        if (support_mask) check_shape(support_mask->rows(), support_mask->cols(), "support mask");
        if (pinned_values) check_shape(pinned_values->rows(), pinned_values->cols(), "pinned values");
        if (pinned_mask) check_shape(pinned_mask->rows(), pinned_mask->cols(), "pinned mask");
        if (pinned_mask && !pinned_values)
            throw config_error("PriorDescriptor: pinned mask without pinned values");
        if (kind == Kind::pinned && !pinned_values)
            throw config_error("PriorDescriptor: pinned prior needs pinned values");
    }

    bool is_pinned(Eigen::Index i, Eigen::Index j) const {
        if (!pinned_values) return false;
        return pinned_mask ? (*pinned_mask)(i, j) : true;
    }
    bool is_masked_out(Eigen::Index i, Eigen::Index j) const {
        return support_mask && !(*support_mask)(i, j);
    }

    /// Prior mean and variance of entry (i, j), used for initialization.
    Posterior prior_moments(Eigen::Index i, Eigen::Index j) const {
        if (is_pinned(i, j)) return {(*pinned_values)(i, j), 0.0};
        if (is_masked_out(i, j) || kind == Kind::pinned) return {cxd{0.0, 0.0}, 0.0};
        if (kind == Kind::gaussian) return {cxd{0.0, 0.0}, variance};
        return {cxd{0.0, 0.0}, support_mask ? variance : beta * variance};
    }

    /// Posterior of entry (i, j) given a pseudo-observation (obs, obs_var).
    Posterior denoise(Eigen::Index i, Eigen::Index j, cxd obs, double obs_var) const {
        if (is_pinned(i, j)) return {(*pinned_values)(i, j), 0.0};
        if (is_masked_out(i, j) || kind == Kind::pinned) return {cxd{0.0, 0.0}, 0.0};
        if (kind == Kind::gaussian || support_mask)
            return gaussian_denoise(obs, obs_var, variance);
        return bg_denoise(obs, obs_var, beta, variance);
    }
};

struct BigAmpOptions {
    int max_iterations = 50;
    double epsilon = 1e-8;   // relative squared change of the plug-in mean
    double damping = 1.0;    // 1 = undamped
    double assumed_noise_var = 1e-12;
    double variance_floor = 1e-14;
    // Warm-start overrides (pinned/masked entries still win). Useful for
    // continuation runs and for probing fixed points.
    std::optional<CMat> initial_left;
    std::optional<CMat> initial_right;
    std::optional<double> initial_variance; // applied to both factors when set

    void validate() const {
        if (max_iterations < 1) throw config_error("BigAmpOptions: max_iterations < 1");
        if (!(epsilon > 0.0)) throw config_error("BigAmpOptions: epsilon must be positive");
        if (!(damping > 0.0) || damping > 1.0)
            throw config_error("BigAmpOptions: damping outside (0, 1]");
        if (assumed_noise_var < 0.0) throw config_error("BigAmpOptions: negative noise variance");
        if (!(variance_floor > 0.0)) throw config_error("BigAmpOptions: variance floor must be positive");
        if (initial_variance && *initial_variance < 0.0)
            throw config_error("BigAmpOptions: negative initial variance");
    }
};

struct BigAmpDiagnostics {
    enum class Stop { converged, max_iterations, diverged };
    int iterations = 0;
    Stop stop = Stop::max_iterations;
    bool diverged = false;
    std::vector<double> residual_history; // ||observed - left*right||_F per iteration
};

struct BigAmpResult {
    CMat bs_to_ris; // N x M left factor
    CMat symbols;   // M x T right factor
    BigAmpDiagnostics diagnostics;
};

/// Bilinear generalized AMP: factors the observed N x T matrix into an
/// N x M left factor and an M x T right factor under entrywise priors.
///
/// Each iteration forms the plug-in product estimate with an Onsager
/// correction, fuses it with the observation (assumed noise
/// opts.assumed_noise_var), back-projects scaled residuals into
/// pseudo-observations for every entry of both factors, and applies the
/// prior denoisers. Pinned entries are re-clamped after every iteration,
/// so they survive in the output bit-exactly.
///
/// The left factor starts at i.i.d. CN(0, prior variance) drawn from rng
/// (a deterministic function of the stream state); the right factor starts
/// at its prior mean. A run that ends with its product residual more than
/// 10x the running minimum is flagged divergent and the best iterate is
/// returned in place of the final one.
inline BigAmpResult bigamp_run(const CMat& observed, const PriorDescriptor& prior_right,
                               const PriorDescriptor& prior_left, Eigen::Index inner_dim,
                               const BigAmpOptions& opts, RngStream& rng) {
    opts.validate();
    const Eigen::Index N = observed.rows(), T = observed.cols(), M = inner_dim;
    if (M < 1) throw dimension_error("bigamp_run: inner dimension must be positive");
    prior_left.validate(N, M);
    prior_right.validate(M, T);
    const double floor = opts.variance_floor;

    // Factor moments.
    CMat x_hat(M, T), h_hat(N, M);
    RMat nu_x(M, T), nu_h(N, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index j = 0; j < T; ++j) {
            const Posterior m = prior_right.prior_moments(i, j);
            x_hat(i, j) = m.mean;
            nu_x(i, j) = m.variance;
        }
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < M; ++j) {
            const Posterior m = prior_left.prior_moments(i, j);
            h_hat(i, j) = m.mean == cxd{0.0, 0.0} && !prior_left.is_pinned(i, j) &&
                                  !prior_left.is_masked_out(i, j)
                              ? rng.complex_gaussian(m.variance)
                              : m.mean;
            nu_h(i, j) = m.variance;
        }
    if (opts.initial_left) {
        if (opts.initial_left->rows() != N || opts.initial_left->cols() != M)
            throw dimension_error("bigamp_run: initial_left shape mismatch");
        h_hat = *opts.initial_left;
    }
    if (opts.initial_right) {
        if (opts.initial_right->rows() != M || opts.initial_right->cols() != T)
            throw dimension_error("bigamp_run: initial_right shape mismatch");
        x_hat = *opts.initial_right;
    }
    if (opts.initial_variance) {
        nu_h.setConstant(*opts.initial_variance);
        nu_x.setConstant(*opts.initial_variance);
    }
    if (opts.initial_left || opts.initial_right || opts.initial_variance) {
        for (Eigen::Index i = 0; i < M; ++i)
            for (Eigen::Index j = 0; j < T; ++j)
                if (prior_right.is_pinned(i, j)) {
                    x_hat(i, j) = (*prior_right.pinned_values)(i, j);
                    nu_x(i, j) = 0.0;
                } else if (prior_right.is_masked_out(i, j)) {
                    x_hat(i, j) = cxd{0.0, 0.0};
                    nu_x(i, j) = 0.0;
                }
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < M; ++j)
                if (prior_left.is_pinned(i, j)) {
                    h_hat(i, j) = (*prior_left.pinned_values)(i, j);
                    nu_h(i, j) = 0.0;
                } else if (prior_left.is_masked_out(i, j)) {
                    h_hat(i, j) = cxd{0.0, 0.0};
                    nu_h(i, j) = 0.0;
                }
    }

    CMat s_hat = CMat::Zero(N, T);
    CMat p_bar_prev = CMat::Zero(N, T);
    bool have_prev_p = false;

    BigAmpResult res;
    res.bs_to_ris = h_hat;
    res.symbols = x_hat;
    double best_residual = std::numeric_limits<double>::infinity();
    const double theta = opts.damping;

    RMat nu_p_bar_prev;

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        const RMat h_abs2 = h_hat.cwiseAbs2();
        const RMat x_abs2 = x_hat.cwiseAbs2();

        // Plug-in estimate of the product, with and without the
        // small-variance cross term. Damping blends the plug-in moments
        // with the previous iteration's.
        RMat nu_p_bar = (h_abs2 * nu_x + nu_h * x_abs2).cwiseMax(floor);
        CMat p_bar = h_hat * x_hat;
        if (theta < 1.0 && have_prev_p) {
            nu_p_bar = theta * nu_p_bar + (1.0 - theta) * nu_p_bar_prev;
            p_bar = theta * p_bar + (1.0 - theta) * p_bar_prev;
        }
        RMat nu_p = (nu_p_bar + nu_h * nu_x).cwiseMax(floor);
        CMat p_hat = p_bar - s_hat.cwiseProduct(nu_p_bar.cast<cxd>()); // Onsager correction

        // Fuse with the observation, then form scaled residual messages.
        CMat z_hat(N, T);
        RMat nu_z(N, T);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < T; ++j) {
                const Posterior pz =
                    posterior_z(p_hat(i, j), nu_p(i, j), observed(i, j), opts.assumed_noise_var);
                z_hat(i, j) = pz.mean;
                nu_z(i, j) = pz.variance;
            }
        RMat nu_s = ((1.0 - (nu_z.array() / nu_p.array())) / nu_p.array()).cwiseMax(0.0).matrix();
        CMat s_new = (z_hat - p_hat).cwiseQuotient(nu_p.cast<cxd>());
        s_hat = theta * s_new + (1.0 - theta) * s_hat;

        // Pseudo-observations of the right factor.
        RMat r_denom = h_abs2.transpose() * nu_s;              // M x T
        RMat r_gain = nu_h.transpose() * nu_s;                 // M x T
        CMat r_lin = h_hat.adjoint() * s_hat;                  // M x T
        CMat r_hat(M, T);
        RMat nu_r(M, T);
        for (Eigen::Index i = 0; i < M; ++i)
            for (Eigen::Index j = 0; j < T; ++j) {
                if (r_denom(i, j) <= floor) {
                    // Message starved (zero factor or zero residual
                    // precision): fall back to an uninformative observation
                    // at the current estimate.
                    nu_r(i, j) = 1.0 / floor;
                    r_hat(i, j) = x_hat(i, j);
                } else {
                    nu_r(i, j) = 1.0 / r_denom(i, j);
                    r_hat(i, j) = x_hat(i, j) * (1.0 - nu_r(i, j) * r_gain(i, j)) +
                                  nu_r(i, j) * r_lin(i, j);
                }
            }

        // Pseudo-observations of the left factor.
        RMat q_denom = nu_s * x_abs2.transpose();              // N x M
        RMat q_gain = nu_s * nu_x.transpose();                 // N x M
        CMat q_lin = s_hat * x_hat.adjoint();                  // N x M
        CMat q_hat(N, M);
        RMat nu_q(N, M);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < M; ++j) {
                if (q_denom(i, j) <= floor) {
                    nu_q(i, j) = 1.0 / floor;
                    q_hat(i, j) = h_hat(i, j);
                } else {
                    nu_q(i, j) = 1.0 / q_denom(i, j);
                    q_hat(i, j) = h_hat(i, j) * (1.0 - nu_q(i, j) * q_gain(i, j)) +
                                  nu_q(i, j) * q_lin(i, j);
                }
            }

        // Denoise both factors against their priors.
        CMat x_new(M, T);
        RMat nu_x_new(M, T);
        for (Eigen::Index i = 0; i < M; ++i)
            for (Eigen::Index j = 0; j < T; ++j) {
                const Posterior post = prior_right.denoise(i, j, r_hat(i, j), nu_r(i, j));
                x_new(i, j) = post.mean;
                nu_x_new(i, j) = post.variance;
            }
        CMat h_new(N, M);
        RMat nu_h_new(N, M);
        for (Eigen::Index i = 0; i < N; ++i)
            for (Eigen::Index j = 0; j < M; ++j) {
                const Posterior post = prior_left.denoise(i, j, q_hat(i, j), nu_q(i, j));
                h_new(i, j) = post.mean;
                nu_h_new(i, j) = post.variance;
            }
        x_hat = theta * x_new + (1.0 - theta) * x_hat;
        nu_x = nu_x_new.cwiseMax(0.0);
        h_hat = theta * h_new + (1.0 - theta) * h_hat;
        nu_h = nu_h_new.cwiseMax(0.0);
        // Keep pinned entries exact even under damping.
        if (prior_right.pinned_values)
            for (Eigen::Index i = 0; i < M; ++i)
                for (Eigen::Index j = 0; j < T; ++j)
                    if (prior_right.is_pinned(i, j)) {
                        x_hat(i, j) = (*prior_right.pinned_values)(i, j);
                        nu_x(i, j) = 0.0;
                    }
        if (prior_left.pinned_values)
            for (Eigen::Index i = 0; i < N; ++i)
                for (Eigen::Index j = 0; j < M; ++j)
                    if (prior_left.is_pinned(i, j)) {
                        h_hat(i, j) = (*prior_left.pinned_values)(i, j);
                        nu_h(i, j) = 0.0;
                    }

        res.diagnostics.iterations = iter;
        const double residual = (observed - h_hat * x_hat).norm();
        res.diagnostics.residual_history.push_back(residual);
        if (residual <= best_residual) {
            best_residual = residual;
            res.bs_to_ris = h_hat;
            res.symbols = x_hat;
        }

        if (have_prev_p) {
            const double change = (p_bar - p_bar_prev).squaredNorm();
            if (change <= opts.epsilon * p_bar.squaredNorm()) {
                res.diagnostics.stop = BigAmpDiagnostics::Stop::converged;
                break;
            }
        }
        p_bar_prev = std::move(p_bar);
        nu_p_bar_prev = std::move(nu_p_bar);
        have_prev_p = true;
    }

    // Ending far above the best fit seen means the run left a fixed point
    // rather than reached one: flag it and keep the best iterate. Otherwise
    // the final iterate wins, transient wobbles notwithstanding.
    if (res.diagnostics.residual_history.back() > 10.0 * best_residual) {
        res.diagnostics.diverged = true;
        res.diagnostics.stop = BigAmpDiagnostics::Stop::diverged;
    } else {
        res.bs_to_ris = h_hat;
        res.symbols = x_hat;
    }
    return res;
}

} // namespace risce
