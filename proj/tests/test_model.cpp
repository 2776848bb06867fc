#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "snode/gradcheck.hpp"
#include "snode/linalg.hpp"
#include "snode/losses.hpp"
#include "snode/model.hpp"
#include "snode/sim_synthetic.hpp"

using namespace snode;

namespace {

ModelConfig tiny_config(int r = 2) {
    ModelConfig cfg;
    cfg.r = r;
    cfg.posenc_L = 2;
    cfg.mode_width = 8;
    cfg.mode_hidden = 2;
    cfg.enc_width = 8;
    cfg.drift_width = 8;
    return cfg;
}

ParamStore lively_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamStore p = make_model_params(cfg, seed);
    rng::Stream s(seed, 999);
    auto w2 = p.matrix("drift.W2");
    for (Eigen::Index j = 0; j < w2.cols(); ++j)
        for (Eigen::Index i = 0; i < w2.rows(); ++i) w2(i, j) = 0.3 * s.normal();
    return p;
}

Dataset tiny_dataset(std::uint64_t seed = 3) {
    SyntheticConfig c;
    c.nx = 4;
    c.ny = 4;
    c.n_snapshots = 6;
    c.sensor_frac = 0.5;
    c.noise_sigma = 0.05;
    c.seed = seed;
    return simulate_synthetic(c);
}

MatrixXd lift_columns(const MatrixXcd& W) {
    MatrixXd out(2 * W.rows(), W.cols());
    for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index k = 0; k < W.rows(); ++k) {
            out(2 * k, j) = W(k, j).real();
            out(2 * k + 1, j) = W(k, j).imag();
        }
    return out;
}

bool same_gaussian(const LatentGaussian& a, const LatentGaussian& b) {
    return a.mean == b.mean && a.cov == b.cov;
}

}  // namespace

TEST_CASE("decode mean is the complex mode superposition", "[fast][model]") {
    rng::Stream s(11);
    const int r = 3, n = 5;
    MatrixXcd W(r, n);
    VectorXcd phi(r);
    for (int k = 0; k < r; ++k) {
        phi[k] = Complex(s.normal(), s.normal());
        for (int j = 0; j < n; ++j) W(k, j) = Complex(s.normal(), s.normal());
    }
    LatentGaussian g;
    g.mean = complex_to_lift(phi);
    g.cov = MatrixXd::Zero(2 * r, 2 * r);
    const FieldPrediction out = decode_points(lift_columns(W), g, 0.1, 2.5);
    CHECK(out.time == 2.5);
    for (int j = 0; j < n; ++j) {
        Complex want(0, 0);
        for (int k = 0; k < r; ++k) want += W(k, j) * phi[k];
        CHECK(std::abs(out.mean[j] - want) < 1e-14);
        CHECK(out.var[j] == Catch::Approx(0.01).margin(1e-15));
    }
}

TEST_CASE("decode variance matches Monte Carlo over the latent Gaussian", "[slow][model]") {
    rng::Stream s(12);
    const int r = 2;
    MatrixXcd W(r, 1);
    W << Complex(0.8, -0.3), Complex(-0.2, 0.5);
    LatentGaussian g;
    g.mean = (VectorXd(4) << 0.4, -0.1, 0.2, 0.3).finished();
    MatrixXd B(4, 4);
    for (int i = 0; i < 16; ++i) B(i / 4, i % 4) = 0.4 * s.normal();
    g.cov = B * B.transpose();
    const double so = 0.05;
    const FieldPrediction out = decode_points(lift_columns(W), g, so, 0.0);

    const MatrixXd L = symmetric_sqrt(g.cov);
    const int n_mc = 200000;
    double m_re = 0, m_im = 0, s_re = 0, s_im = 0;
    for (int i = 0; i < n_mc; ++i) {
        VectorXd z(4);
        for (int k = 0; k < 4; ++k) z[k] = s.normal();
        const VectorXd x = g.mean + L * z;
        const VectorXcd phi = lift_to_complex(x);
        const Complex y = W(0, 0) * phi[0] + W(1, 0) * phi[1];
        m_re += y.real();
        m_im += y.imag();
        s_re += y.real() * y.real();
        s_im += y.imag() * y.imag();
    }
    m_re /= n_mc;
    m_im /= n_mc;
    const double var_mc = (s_re / n_mc - m_re * m_re) + (s_im / n_mc - m_im * m_im);
    const double var_model = out.var[0] - so * so;
    CHECK(var_model > 0);
    CHECK(std::abs(var_mc - var_model) / var_model < 0.03);
}

TEST_CASE("sample decode carries only observation variance", "[fast][model]") {
    rng::Stream s(13);
    MatrixXcd W(2, 3);
    for (int j = 0; j < 3; ++j) {
        W(0, j) = Complex(s.normal(), s.normal());
        W(1, j) = Complex(s.normal(), s.normal());
    }
    VectorXd x(4);
    x << 0.3, -0.2, 0.8, 0.1;
    const FieldPrediction out = decode_sample(lift_columns(W), x, 0.2, 1.0);
    for (int j = 0; j < 3; ++j) CHECK(out.var[j] == Catch::Approx(0.04).margin(1e-16));
}

TEST_CASE("encoder output maps to a diagonal exponential covariance", "[fast][model]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = make_model_params(cfg, 5);
    const Dataset ds = tiny_dataset();
    const EncodedGaussian e = encode_field(p, cfg, ds.sensor_set, ds.observations[0]);
    const LatentGaussian g = encoded_to_gaussian(e);
    CHECK(g.mean == e.mu_lift);
    for (Eigen::Index i = 0; i < g.cov.rows(); ++i) {
        CHECK(g.cov(i, i) == std::exp(e.logvar_lift[i]));
        for (Eigen::Index j = 0; j < g.cov.cols(); ++j)
            if (i != j) CHECK(g.cov(i, j) == 0.0);
    }
    CHECK(same_gaussian(g, encode_latent(p, cfg, ds.sensor_set, ds.observations[0])));
}

TEST_CASE("grid-free reconstruction decodes the latent at arbitrary points", "[fast][model]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = make_model_params(cfg, 6);
    const Dataset ds = tiny_dataset();
    const LatentGaussian g = encode_latent(p, cfg, ds.sensor_set, ds.observations[0]);
    const FieldPrediction a = reconstruct_at(p, cfg, ds.full_grid, g, 0.7);
    const FieldPrediction b = decode_points(mode_lift_block(p, cfg, ds.full_grid), g,
                                            std::exp(p.scalar("log_sigma_obs")), 0.7);
    CHECK(a.mean == b.mean);
    CHECK(a.var == b.var);
    CHECK(a.time == 0.7);
    CHECK(a.mean.size() == ds.full_grid.size());
}

TEST_CASE("teacher-forced rollout carries the data encodings", "[fast][model]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = lively_params(cfg, 7);
    const Dataset ds = tiny_dataset();
    const SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), 3, ds.dt);
    const RolloutResult ro = rollout(p, cfg, ds.sensor_set, ds.observations, ds.times[0], ds.dt,
                                     sde, RolloutMode::teacher_forced);
    const std::size_t H = ds.observations.size() - 1;
    REQUIRE(ro.encoded.size() == H + 1);
    REQUIRE(ro.carried.size() == H + 1);
    REQUIRE(ro.propagated.size() == H);
    REQUIRE(ro.predictions.size() == H);
    const LatentDynamics dyn = model_dynamics(p, cfg);
    for (std::size_t k = 0; k <= H; ++k) CHECK(same_gaussian(ro.carried[k], ro.encoded[k]));
    for (std::size_t k = 0; k < H; ++k) {
        const LatentGaussian prior =
            propagate(ro.encoded[k], dyn, ds.times[k], sde);
        CHECK(same_gaussian(ro.propagated[k], prior));
        CHECK(ro.predictions[k].time == ds.times[0] + static_cast<double>(k + 1) * ds.dt);
    }
}

TEST_CASE("autoregressive rollout feeds predictions back through the encoder",
          "[fast][model]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = lively_params(cfg, 8);
    const Dataset ds = tiny_dataset();
    const SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), 3, ds.dt);
    const RolloutResult ro = rollout(p, cfg, ds.sensor_set, ds.observations, ds.times[0], ds.dt,
                                     sde, RolloutMode::autoregressive);
    const std::size_t H = ds.observations.size() - 1;
    CHECK(same_gaussian(ro.carried[0], ro.encoded[0]));
    bool any_diff = false;
    for (std::size_t k = 0; k < H; ++k) {
        const LatentGaussian refed = encoded_to_gaussian(
            encode_raw(p, cfg, ds.sensor_set.coords(), ro.predictions[k].mean));
        CHECK(same_gaussian(ro.carried[k + 1], refed));
        if (ro.carried[k + 1].mean != ro.encoded[k + 1].mean) any_diff = true;
    }
    CHECK(any_diff);  // feeding back predictions is not the same as encoding data
}

TEST_CASE("forecast equals the autoregressive rollout priors", "[fast][model]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = lively_params(cfg, 9);
    const Dataset ds = tiny_dataset();
    const SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), 4, ds.dt);
    const int n_steps = static_cast<int>(ds.observations.size()) - 1;
    const std::vector<LatentGaussian> priors = forecast(
        p, cfg, ds.sensor_set, ds.observations[0], ds.times[0], ds.dt, sde, n_steps);
    const RolloutResult ro = rollout(p, cfg, ds.sensor_set, ds.observations, ds.times[0], ds.dt,
                                     sde, RolloutMode::autoregressive);
    REQUIRE(priors.size() == static_cast<std::size_t>(n_steps));
    for (int k = 0; k < n_steps; ++k)
        CHECK(same_gaussian(priors[static_cast<std::size_t>(k)],
                            ro.propagated[static_cast<std::size_t>(k)]));
}

TEST_CASE("tape decode of a propagated encoding matches the value rollout bitwise",
          "[fast][model][tape]") {
    const ModelConfig cfg = tiny_config();
    const ParamStore p = lively_params(cfg, 10);
    const Dataset ds = tiny_dataset();
    const SensorLayout layout = SensorLayout::build(ds.sensor_set, cfg);
    const int P = 3;
    const SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), P, ds.dt);
    const std::vector<Field> obs(ds.observations.begin(), ds.observations.begin() + 2);
    const RolloutResult ro = rollout(p, cfg, ds.sensor_set, obs, ds.times[0], ds.dt, sde,
                                     RolloutMode::teacher_forced);

    ad::Tape t;
    const std::vector<int> leaves = make_leaves(t, p);
    const LeafMap lm(p, leaves);
    const SharedTapeCtx ctx = make_shared_ctx(t, lm, cfg, layout);
    const int y2m = t.constant(layout.lift_values(obs[0].values));
    const LatentTapeState st0 = encoded_state_tape(t, encode_tape(t, lm, cfg, y2m, ctx.pe_block));
    const LatentTapeState prior =
        propagate_tape(t, lm, cfg, ctx.sde, st0, ds.times[0], P, ds.dt / P);

    CHECK(t.val(prior.mean).col(0) == ro.propagated[0].mean);
    CHECK(t.val(prior.cov) == ro.propagated[0].cov);
    for (std::size_t c = 0; c < layout.order.size(); ++c) {
        const DecodeTape d = decode_tape(t, ctx.modes[c], prior, ctx.so2);
        const int j = layout.order[c];
        CHECK(t.val(d.pred)(0, 0) == ro.predictions[0].mean[j].real());
        CHECK(t.val(d.pred)(1, 0) == ro.predictions[0].mean[j].imag());
        CHECK(t.val(d.var)(0, 0) == ro.predictions[0].var[j]);
    }
}
