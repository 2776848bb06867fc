#pragma once
// Full model assembly: encode sparse observations into a latent Gaussian,
// evolve it through the stochastic latent dynamics, and decode predictive
// field distributions at arbitrary coordinates. Every value-path routine
// here mirrors its tape twin operation for operation, so the rollouts used
// for evaluation compute exactly what training differentiates.

#include <cmath>
#include <utility>
#include <vector>

#include "snode/nets.hpp"
#include "snode/sde.hpp"

namespace snode {

/// Predictive distribution of the observable at a set of points: complex
/// mean plus the total circular variance (decoded latent variance plus
/// observation noise sigma_obs^2).
struct FieldPrediction {
    VectorXcd mean;
    VectorXd var;
    double time = 0.0;
};

/// Lifted mode rows at a fixed set of points, one column per point:
/// column j = (Re W_1(s_j), Im W_1(s_j), ..., Re W_r(s_j), Im W_r(s_j)).
inline MatrixXd mode_lift_block(const ParamStore& p, const ModelConfig& cfg,
                                const CoordSet& set) {
    MatrixXd out(2 * cfg.r, set.size());
    for (Eigen::Index j = 0; j < set.size(); ++j)
        out.col(j) = mode_point_lift(p, cfg, set.point(j));
    return out;
}

/// Decode a latent Gaussian through precomputed mode columns. Per point:
/// mean is the complex product w . phi, variance the quadratic form of the
/// lift covariance under the 2 x 2r real representation of w, plus
/// sigma_obs^2. Identical arithmetic to the tape decode ops.
inline FieldPrediction decode_points(const MatrixXd& w_lift, const LatentGaussian& g,
                                     double sigma_obs, double time) {
    const Eigen::Index n2 = w_lift.rows();
    require(n2 == g.mean.size() && n2 % 2 == 0, "decode_points: mode/latent size mismatch");
    const Eigen::Index r = n2 / 2;
    const double so2 = sigma_obs * sigma_obs;
    FieldPrediction out;
    out.mean.resize(w_lift.cols());
    out.var.resize(w_lift.cols());
    out.time = time;
    VectorXd a(n2), b(n2);
    for (Eigen::Index j = 0; j < w_lift.cols(); ++j) {
        double re = 0, im = 0;
        for (Eigen::Index k = 0; k < r; ++k) {
            const double wr = w_lift(2 * k, j), wi = w_lift(2 * k + 1, j);
            const double pr = g.mean[2 * k], pi = g.mean[2 * k + 1];
            re += wr * pr - wi * pi;
            im += wr * pi + wi * pr;
        }
        for (Eigen::Index k = 0; k < r; ++k) {
            a(2 * k) = w_lift(2 * k, j);
            a(2 * k + 1) = -w_lift(2 * k + 1, j);
            b(2 * k) = w_lift(2 * k + 1, j);
            b(2 * k + 1) = w_lift(2 * k, j);
        }
        const VectorXd Sa = g.cov * a, Sb = g.cov * b;
        out.mean[j] = Complex(re, im);
        out.var[j] = (a.dot(Sa) + b.dot(Sb)) + so2;
    }
    return out;
}

/// Decode one sampled latent trajectory point (a point mass, so the only
/// variance left is observation noise).
inline FieldPrediction decode_sample(const MatrixXd& w_lift, const VectorXd& x_lift,
                                     double sigma_obs, double time) {
    LatentGaussian g;
    g.mean = x_lift;
    g.cov = MatrixXd::Zero(x_lift.size(), x_lift.size());
    return decode_points(w_lift, g, sigma_obs, time);
}

/// Encoder head output as a latent Gaussian with diagonal lift covariance.
inline LatentGaussian encoded_to_gaussian(const EncodedGaussian& e) {
    LatentGaussian g;
    g.mean = e.mu_lift;
    const VectorXd v = e.logvar_lift.array().exp().matrix();
    g.cov = MatrixXd(v.asDiagonal());
    return g;
}

inline LatentGaussian encode_latent(const ParamStore& p, const ModelConfig& cfg,
                                    const CoordSet& sensors, const Field& y) {
    return encoded_to_gaussian(encode_field(p, cfg, sensors, y));
}

/// Grid-free reconstruction: decode a latent Gaussian at arbitrary points.
inline FieldPrediction reconstruct_at(const ParamStore& p, const ModelConfig& cfg,
                                      const CoordSet& points, const LatentGaussian& g,
                                      double time) {
    return decode_points(mode_lift_block(p, cfg, points), g,
                         std::exp(p.scalar("log_sigma_obs")), time);
}

enum class RolloutMode {
    teacher_forced,  // next encoder input is the observed data
    autoregressive,  // next encoder input is the model's own predicted mean
};

/// One window rollout. Indexing: encoded[k] and carried[k] live at t_k for
/// k = 0..H; propagated[k] and predictions[k] live at t_{k+1} for
/// k = 0..H-1. carried[k] is the state actually advanced: the encoding of
/// the data under teacher forcing, of the fed-back prediction otherwise
/// (they coincide at k = 0).
struct RolloutResult {
    std::vector<FieldPrediction> predictions;
    std::vector<LatentGaussian> encoded;
    std::vector<LatentGaussian> carried;
    std::vector<LatentGaussian> propagated;
};

inline RolloutResult rollout(const ParamStore& p, const ModelConfig& cfg,
                             const CoordSet& sensors, const std::vector<Field>& obs, double t0,
                             double dt, const SdeConfig& sde, RolloutMode mode) {
    require(obs.size() >= 2, "rollout: need at least two snapshots");
    sde.check_spacing(dt);
    const LatentDynamics dyn = model_dynamics(p, cfg);
    const MatrixXd w = mode_lift_block(p, cfg, sensors);
    const double so = std::exp(p.scalar("log_sigma_obs"));
    const std::size_t H = obs.size() - 1;

    RolloutResult out;
    out.encoded.reserve(H + 1);
    out.carried.reserve(H + 1);
    out.propagated.reserve(H);
    out.predictions.reserve(H);
    for (std::size_t k = 0; k <= H; ++k)
        out.encoded.push_back(encode_latent(p, cfg, sensors, obs[k]));
    out.carried.push_back(out.encoded[0]);
    for (std::size_t k = 0; k < H; ++k) {
        const double tk = t0 + static_cast<double>(k) * dt;
        LatentGaussian prior = propagate(out.carried[k], dyn, tk, sde);
        FieldPrediction pred =
            decode_points(w, prior, so, t0 + static_cast<double>(k + 1) * dt);
        if (mode == RolloutMode::teacher_forced) {
            out.carried.push_back(out.encoded[k + 1]);
        } else {
            out.carried.push_back(
                encoded_to_gaussian(encode_raw(p, cfg, sensors.coords(), pred.mean)));
        }
        out.propagated.push_back(std::move(prior));
        out.predictions.push_back(std::move(pred));
    }
    return out;
}

/// Open-loop forecast from a single observation: encode once, then
/// alternate propagate / decode / re-encode, using only the model's own
/// predictions after t_0. Returns the priors at t_1..t_n; reconstruct_at
/// maps them onto any evaluation grid.
inline std::vector<LatentGaussian> forecast(const ParamStore& p, const ModelConfig& cfg,
                                            const CoordSet& sensors, const Field& y0, double t0,
                                            double dt, const SdeConfig& sde, int n_steps) {
    require(n_steps >= 1, "forecast: need at least one step");
    sde.check_spacing(dt);
    const LatentDynamics dyn = model_dynamics(p, cfg);
    const MatrixXd w = mode_lift_block(p, cfg, sensors);
    const double so = std::exp(p.scalar("log_sigma_obs"));

    std::vector<LatentGaussian> priors;
    priors.reserve(static_cast<std::size_t>(n_steps));
    LatentGaussian state = encode_latent(p, cfg, sensors, y0);
    for (int k = 0; k < n_steps; ++k) {
        const double tk = t0 + static_cast<double>(k) * dt;
        LatentGaussian prior = propagate(state, dyn, tk, sde);
        if (k + 1 < n_steps) {
            const FieldPrediction pred =
                decode_points(w, prior, so, t0 + static_cast<double>(k + 1) * dt);
            state = encoded_to_gaussian(encode_raw(p, cfg, sensors.coords(), pred.mean));
        }
        priors.push_back(std::move(prior));
    }
    return priors;
}

// ---- tape-path building blocks ----

/// sigma_obs^2 as a tape node, built so its value is bitwise equal to the
/// value path's std::exp(log_sigma_obs) squared.
inline int sigma_obs_sq_node(ad::Tape& t, const LeafMap& lm) {
    int so = t.exp_(lm["log_sigma_obs"]);
    return t.hadamard(so, so);
}

/// Encoder heads as a latent state with diagonal covariance exp(logvar).
inline LatentTapeState encoded_state_tape(ad::Tape& t, const EncTapeOut& enc) {
    LatentTapeState st;
    st.mean = enc.mu;
    st.cov = t.diagmat(t.exp_(enc.logvar));
    return st;
}

/// Mode nodes for every sensor, canonical column order, built once per
/// window (they do not depend on time).
inline std::vector<int> mode_nodes(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg,
                                   const SensorLayout& layout) {
    std::vector<int> out;
    out.reserve(layout.order.size());
    for (Eigen::Index c = 0; c < layout.pe.cols(); ++c)
        out.push_back(mode_point_tape(t, lm, cfg, t.constant(layout.pe.col(c))));
    return out;
}

struct DecodeTape {
    int pred = -1;  // 2 x 1 lifted complex mean
    int var = -1;   // 1 x 1 total variance
};

inline DecodeTape decode_tape(ad::Tape& t, int w, const LatentTapeState& st, int so2) {
    DecodeTape d;
    d.pred = t.cplx_matvec(w, st.mean);
    d.var = t.add(t.decode_var(w, st.cov), so2);
    return d;
}

}  // namespace snode
