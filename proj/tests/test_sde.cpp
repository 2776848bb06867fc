#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "snode/gradcheck.hpp"
#include "snode/sde.hpp"

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

MatrixXd lift_of(Complex lambda) {
    MatrixXd L(2, 2);
    L << lambda.real(), -lambda.imag(), lambda.imag(), lambda.real();
    return L;
}

}  // namespace

TEST_CASE("zero dynamics with zero noise is the identity", "[fast][sde]") {
    LatentGaussian g;
    g.mean = VectorXd::Zero(4);
    g.mean << 0.3, -0.7, 1.1, 0.2;
    MatrixXd B = MatrixXd::Random(4, 4);
    g.cov = B * B.transpose();
    SdeConfig cfg;
    cfg.tau = 0.0;
    cfg.P = 7;
    cfg.delta_t = 0.05;
    LatentGaussian out = propagate(g, linear_dynamics(MatrixXd::Zero(4, 4)), 0.0, cfg);
    CHECK(out.mean == g.mean);
    CHECK((out.cov - 0.5 * (g.cov + g.cov.transpose())).norm() == 0.0);
}

TEST_CASE("single substep matches the closed-form update", "[fast][sde]") {
    const double alpha = -0.4, dt = 0.02, tau = 0.3;
    LatentGaussian g = LatentGaussian::from_diag((VectorXd(2) << 1.5, -0.5).finished(),
                                                 (VectorXd(2) << 0.2, 0.1).finished());
    SdeConfig cfg;
    cfg.tau = tau;
    cfg.P = 1;
    cfg.delta_t = dt;
    MatrixXd gen = alpha * MatrixXd::Identity(2, 2);
    LatentGaussian out = propagate(g, linear_dynamics(gen), 0.0, cfg);
    const double a = 1.0 + dt * alpha;
    CHECK(out.mean[0] == Catch::Approx(a * 1.5).margin(1e-15));
    CHECK(out.mean[1] == Catch::Approx(a * -0.5).margin(1e-15));
    CHECK(out.cov(0, 0) == Catch::Approx(a * a * 0.2 + 0.5 * dt * tau * tau).margin(1e-15));
    CHECK(out.cov(1, 1) == Catch::Approx(a * a * 0.1 + 0.5 * dt * tau * tau).margin(1e-15));
    CHECK(out.cov(0, 1) == 0.0);
}

TEST_CASE("multi-substep linear propagation equals the explicit recursion", "[fast][sde]") {
    rng::Stream s(5);
    const int n = 4;
    MatrixXd gen(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gen(i, j) = 0.5 * s.normal();
    LatentGaussian g;
    g.mean = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) g.mean[i] = s.normal();
    MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = s.normal();
    g.cov = B * B.transpose();

    SdeConfig cfg;
    cfg.tau = 0.25;
    cfg.P = 6;
    cfg.delta_t = 0.01;
    LatentGaussian out = propagate(g, linear_dynamics(gen), 0.0, cfg);

    VectorXd mu = g.mean;
    MatrixXd S = g.cov;
    const MatrixXd eye = MatrixXd::Identity(n, n);
    const MatrixXd A = eye + cfg.delta_t * gen;
    for (int p = 0; p < cfg.P; ++p) {
        mu = A * mu;
        S = A * S * A.transpose() + (0.5 * cfg.delta_t * cfg.tau * cfg.tau) * eye;
    }
    CHECK((out.mean - mu).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK((out.cov - S).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("euler-maruyama moments converge to the analytic linear solution",
          "[fast][sde]") {
    // d phi = lambda phi dt + tau dB with lambda = -0.3 + 1.5i: exact mean is
    // exp(lambda t) phi0. Halving delta_t must shrink the error at first order.
    const Complex lambda(-0.3, 1.5);
    const Complex phi0(1.0, 0.5);
    const double T = 0.5;
    LatentGaussian g = LatentGaussian::from_diag(complex_to_lift(VectorXcd::Constant(1, phi0)),
                                                 VectorXd::Zero(2));
    const VectorXcd exact = VectorXcd::Constant(1, std::exp(lambda * T) * phi0);
    auto run_error = [&](int P) {
        SdeConfig cfg;
        cfg.tau = 0.0;
        cfg.P = P;
        cfg.delta_t = T / P;
        LatentGaussian out = propagate(g, linear_dynamics(lift_of(lambda)), 0.0, cfg);
        return (out.mean_complex() - exact).norm();
    };
    const double e1 = run_error(64), e2 = run_error(128);
    const double order = std::log2(e1 / e2);
    INFO("errors " << e1 << " -> " << e2 << ", order " << order);
    CHECK(order > 0.9);
}

TEST_CASE("model dynamics with zero drift net reduce to the eigenvalue flow", "[fast][sde]") {
    ModelConfig cfg = tiny_config(1);
    ParamStore p = make_model_params(cfg, 43);
    p.matrix("eig.alpha")(0, 0) = -0.05;
    p.matrix("eig.omega")(0, 0) = 4.0;
    LatentDynamics dyn = model_dynamics(p, cfg);
    VectorXd phi(2);
    phi << 0.7, -0.2;
    CHECK(dyn.drift(phi, 0.0) == lambda_lift(p) * phi);
    CHECK(dyn.jacobian(phi, 0.0) == lambda_lift(p));
}

TEST_CASE("propagated covariance stays symmetric psd under random dynamics", "[fast][sde]") {
    ModelConfig cfg = tiny_config();
    ParamStore p = lively_params(cfg, 47);
    LatentDynamics dyn = model_dynamics(p, cfg);
    LatentGaussian g = LatentGaussian::from_diag(VectorXd::Ones(2 * cfg.r) * 0.3,
                                                 VectorXd::Ones(2 * cfg.r) * 0.5);
    SdeConfig sde;
    sde.tau = 0.2;
    sde.P = 5;
    sde.delta_t = 0.02;
    for (int step = 0; step < 20; ++step) {
        g = propagate(g, dyn, 0.1 * step, sde);
        CHECK((g.cov - g.cov.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.cov);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
    // The complex view of a lift-symmetric PSD covariance is Hermitian PSD.
    MatrixXcd C = g.cov_complex();
    CHECK(is_hermitian(C, 1e-12));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> esc(C);
    CHECK(esc.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("monte carlo paths reproduce the propagated covariance", "[sde][mc]") {
    // One complex mode, pure rotation/decay plus noise; moment propagation
    // must match the sample covariance of simulated paths.
    const Complex lambda(-0.05, 4.0);
    LatentGaussian g0 = LatentGaussian::from_diag(
        complex_to_lift(VectorXcd::Constant(1, Complex(1.0, 0.0))), VectorXd::Zero(2));
    SdeConfig cfg;
    cfg.tau = 0.1;
    cfg.P = 10;
    cfg.delta_t = 0.01;
    LatentDynamics dyn = linear_dynamics(lift_of(lambda));
    LatentGaussian prop = propagate(g0, dyn, 0.0, cfg);

    const int n_paths = 20000;
    MatrixXd sum = MatrixXd::Zero(2, 2);
    VectorXd mean_acc = VectorXd::Zero(2);
    std::vector<VectorXd> finals(n_paths);
    for (int i = 0; i < n_paths; ++i) {
        finals[i] = sample_path(g0, dyn, 0.0, cfg, 1, 77, i).back();
        mean_acc += finals[i];
    }
    mean_acc /= n_paths;
    for (int i = 0; i < n_paths; ++i) {
        const VectorXd d = finals[i] - mean_acc;
        sum += d * d.transpose();
    }
    const MatrixXd mc_cov = sum / (n_paths - 1);
    const double rel = (mc_cov - prop.cov).norm() / prop.cov.norm();
    INFO("relative Frobenius error " << rel);
    CHECK(rel < 0.08);
    CHECK((mean_acc - prop.mean).norm() < 0.01);
}

TEST_CASE("sample paths are keyed-deterministic and degenerate cleanly", "[fast][sde]") {
    const Complex lambda(-0.2, 1.0);
    LatentGaussian g0 = LatentGaussian::from_diag(
        complex_to_lift(VectorXcd::Constant(1, Complex(0.5, -0.5))),
        (VectorXd(2) << 0.1, 0.2).finished());
    SdeConfig cfg;
    cfg.tau = 0.15;
    cfg.P = 4;
    cfg.delta_t = 0.025;
    LatentDynamics dyn = linear_dynamics(lift_of(lambda));

    auto a = sample_path(g0, dyn, 0.0, cfg, 5, 7, 1);
    auto b = sample_path(g0, dyn, 0.0, cfg, 5, 7, 1);
    auto c = sample_path(g0, dyn, 0.0, cfg, 5, 7, 2);
    REQUIRE(a.size() == 6);
    CHECK(a.back() == b.back());
    CHECK(a.back() != c.back());

    // tau = 0 and a point mass initial state: the path is the Euler orbit.
    LatentGaussian point = LatentGaussian::from_diag(g0.mean, VectorXd::Zero(2));
    SdeConfig det = cfg;
    det.tau = 0.0;
    auto path = sample_path(point, dyn, 0.0, det, 3, 11, 0);
    VectorXd x = g0.mean;
    const MatrixXd A = MatrixXd::Identity(2, 2) + det.delta_t * lift_of(lambda);
    CHECK(path[0] == x);
    for (int k = 1; k <= 3; ++k) {
        for (int p = 0; p < det.P; ++p) x = x + det.delta_t * (lift_of(lambda) * x);
        CHECK((path[k] - x).lpNorm<Eigen::Infinity>() < 1e-15);
    }
}

TEST_CASE("tape propagation reproduces value propagation bit for bit", "[fast][sde]") {
    ModelConfig cfg = tiny_config();
    ParamStore p = lively_params(cfg, 53);
    const double Dt = 0.1;
    const int P = 5;
    SdeConfig sde = SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), P, Dt);
    LatentGaussian g0 = LatentGaussian::from_diag(
        (VectorXd(4) << 0.4, -0.3, 0.8, 0.1).finished(),
        (VectorXd(4) << 0.5, 0.25, 0.3, 0.6).finished());
    LatentGaussian value_out = propagate(g0, model_dynamics(p, cfg), 0.3, sde);

    ad::Tape t;
    std::vector<int> leaves = make_leaves(t, p);
    LeafMap lm(p, leaves);
    SdeTapeCtx ctx = make_sde_tape_ctx(t, lm, cfg);
    LatentTapeState st;
    st.mean = t.constant(g0.mean);
    st.cov = t.constant(g0.cov);
    st = propagate_tape(t, lm, cfg, ctx, st, 0.3, P, sde.delta_t);
    CHECK(t.val(st.mean).col(0) == value_out.mean);
    CHECK(t.val(st.cov) == value_out.cov);
}

TEST_CASE("gradients flow through both the mean and covariance paths", "[fast][sde]") {
    ModelConfig cfg = tiny_config();
    ParamStore p = lively_params(cfg, 59);
    const VectorXd mean0 = (VectorXd(4) << 0.4, -0.3, 0.8, 0.1).finished();
    const VectorXd var0 = (VectorXd(4) << 0.5, 0.25, 0.3, 0.6).finished();

    TapeProgram prog = [&, cfg](ad::Tape& t, const std::vector<int>& leaves) {
        LeafMap lm(p, leaves);
        SdeTapeCtx ctx = make_sde_tape_ctx(t, lm, cfg);
        LatentTapeState st;
        st.mean = t.constant(mean0);
        st.cov = t.constant(MatrixXd(var0.asDiagonal()));
        st = propagate_tape(t, lm, cfg, ctx, st, 0.0, 3, 0.02);
        return t.add(t.sum(t.hadamard(st.mean, st.mean)), t.sum(st.cov));
    };
    FdReport rep = finite_difference_check(prog, p, 1e-5, 1e-4);
    INFO("max rel err " << rep.max_rel_err);
    CHECK(rep.pass);

    // The covariance term must reach log_tau: its gradient cannot vanish.
    GradResult g = evaluate_with_gradients(prog, p);
    const int lt = p.segment("log_tau").offset;
    CHECK(std::abs(g.grads[lt]) > 1e-8);
}
