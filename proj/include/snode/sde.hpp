#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "snode/linalg.hpp"
#include "snode/nets.hpp"
#include "snode/rng.hpp"

namespace snode {

/// Gaussian latent state stored on the real lift: mean in R^{2r} (interleaved
/// re/im) and a symmetric PSD covariance on the lift. The lift is the ground
/// truth representation; complex views are derived from it. Keeping the full
/// 2r x 2r matrix (rather than a circular complex covariance) preserves the
/// encoder's independent re/im variances.
struct LatentGaussian {
    VectorXd mean;  // 2r
    MatrixXd cov;   // 2r x 2r

    int r() const { return static_cast<int>(mean.size()) / 2; }

    VectorXcd mean_complex() const { return lift_to_complex(mean); }

    /// Complex second moment E[(z - mu)(z - mu)^H]; Hermitian PSD whenever
    /// the lift covariance is symmetric PSD.
    MatrixXcd cov_complex() const {
        const int n = r();
        MatrixXcd C(n, n);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                C(j, k) = Complex(cov(2 * j, 2 * k) + cov(2 * j + 1, 2 * k + 1),
                                  cov(2 * j + 1, 2 * k) - cov(2 * j, 2 * k + 1));
        return C;
    }

    static LatentGaussian from_diag(const VectorXd& mean_lift, const VectorXd& var_lift) {
        require(mean_lift.size() == var_lift.size() && mean_lift.size() % 2 == 0,
                "LatentGaussian::from_diag: need matching even-length vectors");
        require(var_lift.minCoeff() >= 0.0, "LatentGaussian::from_diag: negative variance");
        LatentGaussian g;
        g.mean = mean_lift;
        g.cov = MatrixXd(var_lift.asDiagonal());
        return g;
    }

    void validate() const {
        require(mean.size() >= 2 && mean.size() % 2 == 0, "LatentGaussian: bad mean size");
        require(cov.rows() == mean.size() && cov.cols() == mean.size(),
                "LatentGaussian: cov shape mismatch");
        require(mean.allFinite() && cov.allFinite(), "LatentGaussian: non-finite entries");
        const double scale = std::max(1.0, cov.norm());
        require((cov - cov.transpose()).norm() <= 1e-9 * scale,
                "LatentGaussian: covariance is not symmetric");
    }
};

/// Integration controls for one data spacing Delta_t = P * delta_t.
struct SdeConfig {
    double tau = 0.05;      // process noise scale (complex variance tau^2 per unit time)
    int P = 5;              // substeps per data step
    double delta_t = 0.02;  // substep size

    void validate() const {
        require(P >= 1, "SdeConfig: P must be >= 1");
        require(delta_t > 0, "SdeConfig: delta_t must be positive");
        require(tau >= 0, "SdeConfig: tau must be non-negative");
    }

    /// Substep size resolved from a data spacing: delta_t = Dt / P.
    static SdeConfig for_spacing(double tau, int P, double Dt) {
        require(Dt > 0, "SdeConfig: data spacing must be positive");
        SdeConfig cfg;
        cfg.tau = tau;
        cfg.P = P;
        cfg.delta_t = Dt / P;
        cfg.validate();
        return cfg;
    }

    void check_spacing(double Dt) const {
        require(std::abs(P * delta_t - Dt) <= 1e-9 * std::max(1.0, std::abs(Dt)),
                "SdeConfig: P * delta_t does not match the data spacing");
    }
};

/// Drift and exact state-Jacobian of the full latent dynamics on the lift.
struct LatentDynamics {
    std::function<VectorXd(const VectorXd&, double)> drift;
    std::function<MatrixXd(const VectorXd&, double)> jacobian;
};

/// The model's dynamics Lambda phi + f_theta. The ParamStore must outlive the
/// returned object.
inline LatentDynamics model_dynamics(const ParamStore& p, const ModelConfig& cfg) {
    const ParamStore* pp = &p;
    LatentDynamics dyn;
    dyn.drift = [pp, cfg](const VectorXd& x, double t) { return full_drift_value(*pp, cfg, x, t); };
    dyn.jacobian = [pp, cfg](const VectorXd& x, double t) {
        return jacobian_real_lift(*pp, cfg, x, t);
    };
    return dyn;
}

/// Linear dynamics from an explicit lift generator (tests, frozen-drift runs).
inline LatentDynamics linear_dynamics(const MatrixXd& generator) {
    require(generator.rows() == generator.cols(), "linear_dynamics: square generator required");
    LatentDynamics dyn;
    dyn.drift = [generator](const VectorXd& x, double) -> VectorXd { return generator * x; };
    dyn.jacobian = [generator](const VectorXd&, double) { return generator; };
    return dyn;
}

/// Moment propagation over one data step: P explicit substeps, each updating
/// the mean with the drift and the covariance with the linearized flow
/// A = I + dt J plus process noise dt tau^2 / 2 per lift coordinate (the lift
/// of complex noise dt tau^2). The covariance is re-symmetrized and projected
/// to PSD after every substep; already-PSD matrices pass through bit-exact.
inline LatentGaussian propagate(const LatentGaussian& g, const LatentDynamics& dyn, double t0,
                                const SdeConfig& cfg) {
    cfg.validate();
    g.validate();
    const Eigen::Index n = g.mean.size();
    const MatrixXd eye = MatrixXd::Identity(n, n);
    VectorXd mu = g.mean;
    MatrixXd S = g.cov;
    for (int p = 0; p < cfg.P; ++p) {
        const double tp = t0 + p * cfg.delta_t;
        const VectorXd f = dyn.drift(mu, tp);
        const MatrixXd J = dyn.jacobian(mu, tp);
        if (!f.allFinite() || !J.allFinite())
            throw NumericalError("propagate: non-finite drift or Jacobian");
        const MatrixXd A = eye + cfg.delta_t * J;
        mu = mu + cfg.delta_t * f;
        const MatrixXd T1 = A * S;
        const MatrixXd At = A.transpose();
        const MatrixXd T2 = T1 * At;
        const MatrixXd n1 = (cfg.tau * cfg.tau) * eye;
        const MatrixXd n2 = (0.5 * cfg.delta_t) * n1;
        const MatrixXd Sn = T2 + n2;
        S = symmetric_psd_project(Sn);
        if (!mu.allFinite() || !S.allFinite())
            throw NumericalError("propagate: state diverged");
    }
    LatentGaussian out;
    out.mean = mu;
    out.cov = S;
    return out;
}

// ---- tape-path propagation ----

struct LatentTapeState {
    int mean = -1;  // 2r x 1
    int cov = -1;   // 2r x 2r
};

/// Constant/shared nodes reused by every propagate_tape call on one tape.
struct SdeTapeCtx {
    int lambda_node = -1;  // assemble_lambda(alpha, omega)
    int selector = -1;     // drift input selector (constant)
    int eye = -1;          // identity on the lift (constant)
    int tau2 = -1;         // exp(log_tau) * exp(log_tau), 1x1
};

inline SdeTapeCtx make_sde_tape_ctx(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg) {
    SdeTapeCtx ctx;
    ctx.lambda_node = t.assemble_lambda(lm["eig.alpha"], lm["eig.omega"]);
    ctx.selector = t.constant(drift_selector(cfg));
    ctx.eye = t.constant(MatrixXd::Identity(2 * cfg.r, 2 * cfg.r));
    int tau = t.exp_(lm["log_tau"]);
    ctx.tau2 = t.hadamard(tau, tau);
    return ctx;
}

/// Differentiable twin of propagate(): identical arithmetic, with the drift
/// Jacobian built from the same tanh activations so that gradients flow
/// through the covariance path as well as the mean path.
inline LatentTapeState propagate_tape(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg,
                                      const SdeTapeCtx& ctx, LatentTapeState g, double t0, int P,
                                      double delta_t) {
    require(P >= 1 && delta_t > 0, "propagate_tape: bad substep configuration");
    for (int p = 0; p < P; ++p) {
        const double tp = t0 + p * delta_t;
        DriftTapeOut d = drift_tape(t, lm, cfg, ctx.lambda_node, ctx.selector, g.mean, tp, true);
        int A = t.add_scaled(ctx.eye, d.jac, delta_t);
        g.mean = t.add_scaled(g.mean, d.f, delta_t);
        int T2 = t.matmul(t.matmul(A, g.cov), t.transpose(A));
        int noise = t.scale(t.scalemat(ctx.eye, ctx.tau2), 0.5 * delta_t);
        g.cov = t.sym(t.add(T2, noise));
    }
    return g;
}

// ---- pathwise sampling ----

/// One sampled trajectory of the latent SDE: a draw from the initial Gaussian
/// followed by Euler-Maruyama substeps with complex noise of variance
/// tau^2 delta_t per substep (tau^2 delta_t / 2 per lift coordinate). Returns
/// the state at every data-step boundary, initial state included
/// (n_steps + 1 entries). Fully determined by (seed, path_key).
inline std::vector<VectorXd> sample_path(const LatentGaussian& g0, const LatentDynamics& dyn,
                                         double t0, const SdeConfig& cfg, int n_steps,
                                         std::uint64_t seed, std::uint64_t path_key = 0) {
    cfg.validate();
    g0.validate();
    require(n_steps >= 0, "sample_path: n_steps must be >= 0");
    rng::Stream s(seed, rng::sites::kSamplePath, path_key);
    const Eigen::Index n = g0.mean.size();

    VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps[i] = s.normal();
    VectorXd x = g0.mean + symmetric_sqrt(g0.cov) * eps;

    std::vector<VectorXd> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(x);
    const double noise_scale = cfg.tau * std::sqrt(cfg.delta_t) * M_SQRT1_2;
    for (int k = 0; k < n_steps; ++k) {
        for (int p = 0; p < cfg.P; ++p) {
            const double tp = t0 + (static_cast<double>(k) * cfg.P + p) * cfg.delta_t;
            const VectorXd f = dyn.drift(x, tp);
            x = x + cfg.delta_t * f;
            if (noise_scale > 0) {
                for (Eigen::Index i = 0; i < n; ++i) x[i] += noise_scale * s.normal();
            }
            if (!x.allFinite()) throw NumericalError("sample_path: state diverged");
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace snode
