#pragma once
// Training objective: per-point reconstruction likelihood, a KL regularizer
// anchoring the propagated latent to a standard normal, and a consistency
// term tying the encoder posterior to the dynamics prior. Each term comes
// as a value/tape twin with identical arithmetic; window assemblies build
// the full objective for one observation window in either form.

#include <cmath>
#include <vector>

#include "snode/model.hpp"

namespace snode {

struct LossWeights {
    double recon = 3.0;
    double kl = 1e-3;
    double cons = 0.15;
    double kappa = 0.001;  // distributional share of the consistency term
};

/// Negative log-likelihood of one observed point under the predictive
/// distribution: circularly-symmetric complex Gaussian with total variance
/// v for complex observables, real Gaussian on the real part otherwise.
inline double nll_point_value(Complex pred, Complex target, double v, bool complex_point) {
    require(v > 0, "nll_point_value: variance must be positive");
    static const double log2pi = std::log(2.0 * M_PI);
    const double rr = pred.real() - target.real();
    const double ri = pred.imag() - target.imag();
    if (complex_point) return std::log(v / 2) + log2pi + (rr * rr + ri * ri) / v;
    return 0.5 * (std::log(v) + rr * rr / v + log2pi);
}

/// Mean point NLL over the sensors of one snapshot, accumulated in the
/// canonical order the tape uses.
inline double recon_nll_value(const FieldPrediction& pred, const VectorXcd& target,
                              const std::vector<int>& order, bool complex_point) {
    require(pred.mean.size() == target.size() &&
                static_cast<Eigen::Index>(order.size()) == target.size(),
            "recon_nll_value: size mismatch");
    double s = 0;
    for (int j : order) s += nll_point_value(pred.mean[j], target[j], pred.var[j], complex_point);
    return s / static_cast<double>(order.size());
}

/// KL(N(mu, diag v) || N(0, I)) on the lift: -1/2 sum(1 + log v - mu^2 - v).
inline double latent_kl_value(const VectorXd& mu, const VectorXd& v) {
    require(mu.size() == v.size(), "latent_kl_value: size mismatch");
    require(v.minCoeff() > 0, "latent_kl_value: variances must be positive");
    const VectorXd lv = v.array().log().matrix();
    const VectorXd t1 = (lv.array() + 1.0).matrix();
    const VectorXd t2 = t1 - (mu.array() * mu.array()).matrix();
    const VectorXd t3 = t2 - v;
    return -0.5 * t3.sum();
}

inline int latent_kl_tape(ad::Tape& t, int mu, int v) {
    int t1 = t.addc(t.log_(v), 1.0);
    int t2 = t.sub(t1, t.hadamard(mu, mu));
    int t3 = t.sub(t2, v);
    return t.scale(t.sum(t3), -0.5);
}

/// Agreement between the encoder posterior (mu_e, v_e) and the propagated
/// prior (mu_p, v_p), both diagonal on the lift: the mean squared gap of
/// the means plus kappa times the coordinatewise Gaussian KL of posterior
/// from prior, summed over coordinates.
inline double consistency_value(const VectorXd& mu_e, const VectorXd& v_e, const VectorXd& mu_p,
                                const VectorXd& v_p, double kappa) {
    require(mu_e.size() == v_e.size() && mu_p.size() == v_p.size() && mu_e.size() == mu_p.size(),
            "consistency_value: size mismatch");
    require(v_e.minCoeff() > 0 && v_p.minCoeff() > 0,
            "consistency_value: variances must be positive");
    const VectorXd dm = mu_e - mu_p;
    const VectorXd dm2 = (dm.array() * dm.array()).matrix();
    const double msq = dm2.sum() / static_cast<double>(dm2.size());
    const VectorXd half_lr = 0.5 * VectorXd((v_p.array() / v_e.array()).log().matrix());
    const VectorXd frac = ((v_e + dm2).array() / (2.0 * v_p).array()).matrix();
    const VectorXd term = ((half_lr + frac).array() - 0.5).matrix();
    return msq + kappa * term.sum();
}

inline int consistency_tape(ad::Tape& t, int mu_e, int v_e, int mu_p, int v_p, double kappa) {
    int dm = t.sub(mu_e, mu_p);
    int dm2 = t.hadamard(dm, dm);
    int msq = t.mean_all(dm2);
    int half_lr = t.scale(t.log_(t.div(v_p, v_e)), 0.5);
    int frac = t.div(t.add(v_e, dm2), t.scale(v_p, 2.0));
    int term = t.addc(t.add(half_lr, frac), -0.5);
    return t.add(msq, t.scale(t.sum(term), kappa));
}

// ---- window assemblies ----

struct LossBreakdown {
    double total = 0, recon = 0, kl = 0, cons = 0;
};

/// Shared per-batch tape nodes: sensor mode columns, the constant posenc
/// block, sigma_obs^2 and the dynamics context. Build once per tape, reuse
/// across every window on it.
struct SharedTapeCtx {
    std::vector<int> modes;
    int pe_block = -1;
    int so2 = -1;
    SdeTapeCtx sde;
};

inline SharedTapeCtx make_shared_ctx(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg,
                                     const SensorLayout& layout) {
    SharedTapeCtx ctx;
    ctx.modes = mode_nodes(t, lm, cfg, layout);
    ctx.pe_block = t.constant(layout.pe);
    ctx.so2 = sigma_obs_sq_node(t, lm);
    ctx.sde = make_sde_tape_ctx(t, lm, cfg);
    return ctx;
}

struct WindowNodes {
    int total = -1, recon = -1, kl = -1, cons = -1;
};

/// Full objective for one window of H = obs.size() - 1 transitions. Per
/// transition: propagate the carried state one data step, score the next
/// snapshot under the decoded prediction, regularize the prior, and pull
/// it toward the encoding of the actual data. Under teacher forcing the
/// next carried state is that data encoding; otherwise the predicted means
/// are fed back through the encoder, so gradients flow through the whole
/// recursion.
inline WindowNodes window_loss_tape(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg,
                                    const SharedTapeCtx& ctx, const SensorLayout& layout,
                                    const std::vector<Field>& obs, double t0, double dt, int P,
                                    bool complex_point, bool teacher_forced,
                                    const LossWeights& w) {
    require(obs.size() >= 2, "window_loss_tape: need at least two snapshots");
    const std::size_t H = obs.size() - 1;
    const double delta_t = dt / P;
    const int m = static_cast<int>(layout.order.size());

    std::vector<EncTapeOut> enc_data(H + 1);
    for (std::size_t k = 0; k <= H; ++k) {
        int y2m = t.constant(layout.lift_values(obs[k].values));
        enc_data[k] = encode_tape(t, lm, cfg, y2m, ctx.pe_block);
    }

    std::vector<int> recon_nodes, kl_nodes, cons_nodes;
    recon_nodes.reserve(H);
    kl_nodes.reserve(H);
    cons_nodes.reserve(H);

    LatentTapeState state = encoded_state_tape(t, enc_data[0]);
    for (std::size_t k = 0; k < H; ++k) {
        const double tk = t0 + static_cast<double>(k) * dt;
        LatentTapeState prior = propagate_tape(t, lm, cfg, ctx.sde, state, tk, P, delta_t);
        int vp = t.diagvec(prior.cov);

        std::vector<int> nll(static_cast<std::size_t>(m));
        std::vector<int> preds;
        preds.reserve(static_cast<std::size_t>(m));
        for (int c = 0; c < m; ++c) {
            DecodeTape d = decode_tape(t, ctx.modes[static_cast<std::size_t>(c)], prior, ctx.so2);
            const Complex y = obs[k + 1].values[layout.order[static_cast<std::size_t>(c)]];
            MatrixXd target(2, 1);
            target << y.real(), y.imag();
            nll[static_cast<std::size_t>(c)] =
                t.nll_point(d.pred, t.constant(target), d.var, complex_point);
            preds.push_back(d.pred);
        }
        recon_nodes.push_back(t.mean_scalars(nll));
        kl_nodes.push_back(latent_kl_tape(t, prior.mean, vp));
        int ve1 = t.exp_(enc_data[k + 1].logvar);
        cons_nodes.push_back(
            consistency_tape(t, enc_data[k + 1].mu, ve1, prior.mean, vp, w.kappa));

        if (k + 1 < H) {
            if (teacher_forced) {
                state.mean = enc_data[k + 1].mu;
                state.cov = t.diagmat(ve1);
            } else {
                EncTapeOut ep = encode_tape(t, lm, cfg, t.hstack(preds), ctx.pe_block);
                state = encoded_state_tape(t, ep);
            }
        }
    }

    WindowNodes out;
    out.recon = t.mean_scalars(recon_nodes);
    out.kl = t.mean_scalars(kl_nodes);
    out.cons = t.mean_scalars(cons_nodes);
    out.total = t.add(t.add(t.scale(out.recon, w.recon), t.scale(out.kl, w.kl)),
                      t.scale(out.cons, w.cons));
    return out;
}

/// Value twin of window_loss_tape, computed through the value rollout.
/// Produces bitwise the same numbers as evaluating the tape assembly.
inline LossBreakdown window_loss_value(const ParamStore& p, const ModelConfig& cfg,
                                       const SensorLayout& layout, const CoordSet& sensors,
                                       const std::vector<Field>& obs, double t0, double dt,
                                       int P, bool complex_point, bool teacher_forced,
                                       const LossWeights& w) {
    const SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), P, dt);
    const RolloutResult ro =
        rollout(p, cfg, sensors, obs, t0, dt, sde,
                teacher_forced ? RolloutMode::teacher_forced : RolloutMode::autoregressive);
    const std::size_t H = obs.size() - 1;

    double sr = 0, sk = 0, sc = 0;
    for (std::size_t k = 0; k < H; ++k) {
        sr += recon_nll_value(ro.predictions[k], obs[k + 1].values, layout.order, complex_point);
        const VectorXd vp = ro.propagated[k].cov.diagonal();
        sk += latent_kl_value(ro.propagated[k].mean, vp);
        const VectorXd ve = ro.encoded[k + 1].cov.diagonal();
        sc += consistency_value(ro.encoded[k + 1].mean, ve, ro.propagated[k].mean, vp, w.kappa);
    }
    LossBreakdown out;
    const double n = static_cast<double>(H);
    out.recon = sr / n;
    out.kl = sk / n;
    out.cons = sc / n;
    out.total = (w.recon * out.recon + w.kl * out.kl) + w.cons * out.cons;
    return out;
}

}  // namespace snode
