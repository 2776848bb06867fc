#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "snode/sim_synthetic.hpp"
#include "snode/train.hpp"

using namespace snode;
namespace fs = std::filesystem;

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

Dataset train_dataset(std::uint64_t seed = 3) {
    SyntheticConfig c;
    c.nx = 4;
    c.ny = 4;
    c.n_snapshots = 20;  // validation tail of 2 snapshots at the default split
    c.sensor_frac = 0.5;
    c.noise_sigma = 0.05;
    c.seed = seed;
    return simulate_synthetic(c);
}

TrainConfig fast_tc(std::uint64_t seed, int epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.window = 3;
    tc.batch = 4;
    tc.substeps = 2;
    tc.seed = seed;
    return tc;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("snode_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("optimizer first step follows the bias-corrected closed form", "[fast][train]") {
    AdamConfig ac;
    ac.lr = 0.1;
    ac.clip = 0.0;  // disabled
    Adam adam(2, ac);
    VectorXd theta = (VectorXd(2) << 1.0, -2.0).finished();
    const VectorXd g = (VectorXd(2) << 0.5, -1.5).finished();
    adam.step(theta, g);
    // After one step m_hat = g and v_hat = g^2, so the update is
    // lr * g / (|g| + eps) = lr * sign(g) up to eps.
    CHECK(theta[0] == Catch::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).margin(1e-15));
    CHECK(theta[1] == Catch::Approx(-2.0 + 0.1 * 1.5 / (1.5 + 1e-8)).margin(1e-15));
    CHECK(adam.steps() == 1);

    // Second step against an explicit recursion.
    const VectorXd g2 = (VectorXd(2) << -0.25, 0.75).finished();
    VectorXd m = 0.1 * g, v = 0.001 * g.cwiseProduct(g);
    m = 0.9 * m + 0.1 * g2;
    v = 0.999 * v + 0.001 * g2.cwiseProduct(g2);
    const VectorXd m_hat = m / (1 - std::pow(0.9, 2)), v_hat = v / (1 - std::pow(0.999, 2));
    VectorXd expect = theta;
    for (int i = 0; i < 2; ++i) expect[i] -= 0.1 * m_hat[i] / (std::sqrt(v_hat[i]) + 1e-8);
    adam.step(theta, g2);
    CHECK((theta - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("optimizer rescales gradients above the norm ceiling", "[fast][train]") {
    AdamConfig ac;
    ac.lr = 0.01;
    ac.clip = 10.0;
    Adam clipped(2, ac);
    ac.clip = 0.0;
    Adam raw(2, ac);
    VectorXd ta = VectorXd::Zero(2), tb = VectorXd::Zero(2);
    const VectorXd g = (VectorXd(2) << 12.0, 16.0).finished();  // norm 20
    clipped.step(ta, g);
    raw.step(tb, g * (10.0 / 20.0));
    CHECK(ta == tb);

    // Below the ceiling the gradient passes through untouched.
    Adam c2(2, AdamConfig{});
    Adam r2(2, AdamConfig{.clip = 0.0});
    VectorXd tc = VectorXd::Zero(2), td = VectorXd::Zero(2);
    const VectorXd small = (VectorXd(2) << 3.0, 4.0).finished();
    c2.step(tc, small);
    r2.step(td, small);
    CHECK(tc == td);
}

TEST_CASE("optimizer rejects non-finite gradients", "[fast][train]") {
    Adam adam(2, AdamConfig{});
    VectorXd theta = VectorXd::Zero(2);
    VectorXd g = VectorXd::Zero(2);
    g[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam.step(theta, g), NumericalError);
}

TEST_CASE("curriculum decays linearly from full teacher forcing to none", "[fast][train]") {
    TrainConfig tc;
    tc.epochs = 5;
    CHECK(tc.curriculum_eps(0) == 1.0);
    CHECK(tc.curriculum_eps(2) == 0.5);
    CHECK(tc.curriculum_eps(4) == 0.0);
    tc.epochs = 1;
    CHECK(tc.curriculum_eps(0) == 1.0);
}

TEST_CASE("validation tail is a floor fraction of the snapshots", "[fast][train]") {
    CHECK(validation_count(50, 0.1) == 5);
    CHECK(validation_count(20, 0.1) == 2);
    CHECK(validation_count(9, 0.1) == 0);
    CHECK(validation_count(100, 0.0) == 0);
}

TEST_CASE("training is deterministic in the seed", "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset ds = train_dataset();
    const TrainResult a = train(ds, cfg, fast_tc(17, 3));
    const TrainResult b = train(ds, cfg, fast_tc(17, 3));
    CHECK(a.params.flat() == b.params.flat());
    CHECK(a.best.flat() == b.best.flat());
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].total == b.history[i].total);
        CHECK(a.history[i].val_nll == b.history[i].val_nll);
    }
    const TrainResult c = train(ds, cfg, fast_tc(18, 3));
    CHECK(a.params.flat() != c.params.flat());
}

TEST_CASE("training drives the objective down on a small benchmark", "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset ds = train_dataset(11);
    TrainConfig tc = fast_tc(19, 10);
    tc.adam.lr = 3e-3;
    const TrainResult out = train(ds, cfg, tc);
    REQUIRE(out.history.size() == 10);
    CHECK_FALSE(out.aborted);
    double best_seen = std::numeric_limits<double>::infinity();
    for (const EpochStats& st : out.history) best_seen = std::min(best_seen, st.total);
    CHECK(best_seen < out.history.front().total);
    CHECK(out.best_epoch >= 0);
    CHECK(std::isfinite(out.best_val));
}

TEST_CASE("checkpointed training resumes bit-exactly", "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset ds = train_dataset(13);
    const std::uint64_t seed = 23;

    // Reference: six epochs in one go, no checkpointing.
    const TrainResult full = train(ds, cfg, fast_tc(seed, 6));

    // Interrupted run: same six-epoch schedule, stopped after three epochs.
    // The curriculum is a function of the schedule length, so the interrupted
    // leg must declare the full horizon rather than a shorter one.
    TempDir dir("resume");
    const std::string csv = (dir.path / "log.csv").string();
    TrainConfig tc1 = fast_tc(seed, 6);
    tc1.max_epochs_per_run = 3;
    tc1.checkpoint_dir = (dir.path / "ckpt").string();
    tc1.log_csv = csv;
    train(ds, cfg, tc1);

    TrainConfig tc2 = fast_tc(seed, 6);
    tc2.checkpoint_dir = tc1.checkpoint_dir;
    tc2.log_csv = csv;
    tc2.resume = true;
    const TrainResult resumed = train(ds, cfg, tc2);

    CHECK(resumed.params.flat() == full.params.flat());
    CHECK(resumed.best.flat() == full.best.flat());
    CHECK(resumed.best_epoch == full.best_epoch);
    CHECK(resumed.best_val == full.best_val);

    // CSV: one header plus one line per epoch, written across both runs.
    std::ifstream in(csv);
    REQUIRE(in.good());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] == "epoch,eps,loss_total,loss_recon,loss_kl,loss_cons,wall_ms");
    CHECK(lines[1].rfind("0,", 0) == 0);
    CHECK(lines[4].rfind("3,", 0) == 0);  // resumed run continues the epoch count
}

TEST_CASE("checkpoint files carry the advertised layout", "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset ds = train_dataset(13);
    TempDir dir("ckpt_layout");
    TrainConfig tc = fast_tc(29, 2);
    tc.checkpoint_dir = dir.path.string();
    const TrainResult out = train(ds, cfg, tc);

    const auto flat = io::read_doubles(dir.path / "params.bin",
                                       static_cast<std::size_t>(out.params.size()));
    CHECK(Eigen::Map<const VectorXd>(flat.data(), out.params.size()) == out.params.flat());

    std::ifstream mf(dir.path / "manifest.json");
    REQUIRE(mf.good());
    const nlohmann::json j = nlohmann::json::parse(mf);
    CHECK(j.at("version") == 1);
    CHECK(j.at("next_epoch") == 2);
    CHECK(j.at("n_params").get<Eigen::Index>() == out.params.size());
    CHECK(j.at("seed") == 29);
    REQUIRE(fs::exists(dir.path / "opt.bin"));
    REQUIRE(fs::exists(dir.path / "best_params.bin"));
    const auto bflat = io::read_doubles(dir.path / "best_params.bin",
                                        static_cast<std::size_t>(out.params.size()));
    CHECK(Eigen::Map<const VectorXd>(bflat.data(), out.params.size()) == out.best.flat());
}

TEST_CASE("a diverging step aborts the epoch and restores the last good parameters",
          "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset ds = train_dataset(13);
    TrainConfig tc = fast_tc(31, 4);
    tc.adam.lr = 1e200;  // one step puts products past the overflow threshold
    tc.adam.clip = 0.0;
    const TrainResult out = train(ds, cfg, tc);
    CHECK(out.aborted);
    CHECK(out.params.flat().allFinite());
    // The aborted epoch leaves no partial update behind: parameters match a
    // run truncated to the completed epochs.
    if (out.history.empty()) {
        CHECK(out.params.flat() == make_model_params(cfg, tc.seed).flat());
    } else {
        TrainConfig shorter = tc;
        shorter.epochs = static_cast<int>(out.history.size());
        const TrainResult ref = train(ds, cfg, shorter);
        CHECK(out.params.flat() == ref.params.flat());
    }
}

TEST_CASE("multiple realizations train through one shuffled pool", "[slow][train]") {
    const ModelConfig cfg = tiny_config();
    const Dataset a = train_dataset(41), b = train_dataset(42);
    const TrainResult out = train({&a, &b}, cfg, fast_tc(43, 2));
    CHECK(out.history.size() == 2);
    CHECK_FALSE(out.aborted);
    CHECK(std::isfinite(out.best_val));
}
