#pragma once
// End-to-end training loop: Adam on the window objective with a scheduled
// transition from teacher forcing to autoregressive feedback, a temporal
// train/validation split, keyed RNG at every stochastic site (so a run is
// a pure function of its seed), and checkpoints that resume bit-exactly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "snode/dataset_io.hpp"
#include "snode/gradcheck.hpp"
#include "snode/losses.hpp"

namespace snode {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip = 10.0;  // global gradient norm ceiling; <= 0 disables
};

/// Adam with bias correction and global-norm gradient clipping. The state
/// (step count and both moment vectors) serializes exactly, which is what
/// makes checkpoint resumption reproduce an uninterrupted run bit for bit.
class Adam {
public:
    Adam(Eigen::Index n, AdamConfig cfg)
        : cfg_(cfg), m_(VectorXd::Zero(n)), v_(VectorXd::Zero(n)) {}

    void step(VectorXd& theta, VectorXd g) {
        require(g.size() == theta.size() && g.size() == m_.size(), "Adam: size mismatch");
        if (!g.allFinite()) throw NumericalError("Adam: non-finite gradient");
        if (cfg_.clip > 0) {
            const double n = g.norm();
            if (n > cfg_.clip) g *= cfg_.clip / n;
        }
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseProduct(g).eval();
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        const VectorXd mhat = m_ / bc1;
        const VectorXd vhat = v_ / bc2;
        theta -= cfg_.lr * (mhat.array() / (vhat.array().sqrt() + cfg_.eps)).matrix();
    }

    std::int64_t steps() const { return t_; }
    const VectorXd& m() const { return m_; }
    const VectorXd& v() const { return v_; }

    /// Replace the step size; moments and step count are untouched.
    void set_lr(double lr) { cfg_.lr = lr; }

    void restore(std::int64_t t, VectorXd m, VectorXd v) {
        require(m.size() == m_.size() && v.size() == v_.size(), "Adam::restore: size mismatch");
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    VectorXd m_, v_;
};

struct TrainConfig {
    int epochs = 300;
    int window = 8;        // transitions per window (window + 1 snapshots)
    int batch = 16;        // windows per optimizer step
    int substeps = 5;      // integrator substeps per data step
    double val_frac = 0.1; // temporal tail held out for validation
    std::uint64_t seed = 0;
    AdamConfig adam;
    LossWeights weights;
    std::string checkpoint_dir;  // empty disables checkpointing
    std::string log_csv;         // empty disables the CSV log
    bool resume = false;         // continue from checkpoint_dir
    int max_epochs_per_run = 0;  // > 0 caps epochs this invocation; the
                                 // curriculum still spans `epochs`, so a
                                 // capped run plus a resume reproduces an
                                 // uninterrupted run bit for bit
    double lr_final = -1.0;      // >= 0 decays the step size linearly from
                                 // adam.lr to this value across the schedule
    double tf_warmup_frac = 0.0;  // leading fraction of the schedule held at
                                  // pure teacher forcing before the decay

    /// Teacher-forcing probability at a given epoch: held at 1 through the
    /// warmup fraction of the schedule, then linear decay from 1 (pure
    /// teacher forcing) to 0 (fully autoregressive).
    double curriculum_eps(int epoch) const {
        if (epochs <= 1) return 1.0;
        const double last = static_cast<double>(epochs) - 1.0;
        const double start = std::floor(tf_warmup_frac * last);
        if (static_cast<double>(epoch) <= start) return 1.0;
        if (last == start) return 1.0;
        return 1.0 - (static_cast<double>(epoch) - start) / (last - start);
    }

    /// Step size at a given epoch; a function of the epoch index alone so
    /// interrupted runs resume on the same schedule. The decay occupies the
    /// final third of the schedule, leaving the earlier optimization path
    /// untouched by the choice of lr_final.
    double epoch_lr(int epoch) const {
        if (lr_final < 0 || epochs <= 1) return adam.lr;
        const int start = (2 * epochs) / 3;
        if (epoch < start || epochs - 1 == start) return adam.lr;
        const double f = static_cast<double>(epoch - start) /
                         static_cast<double>(epochs - 1 - start);
        return adam.lr + (lr_final - adam.lr) * f;
    }
};

struct EpochStats {
    int epoch = 0;
    double eps = 1.0;
    double total = 0, recon = 0, kl = 0, cons = 0;
    double val_nll = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = 0;
};

struct TrainResult {
    ParamStore params;  // final parameters (last good state on abort)
    ParamStore best;    // best-by-validation parameters
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    std::vector<EpochStats> history;
    bool aborted = false;
};

namespace detail {

struct WindowRef {
    int ds = 0;
    int start = 0;
};

inline VectorXd collect_gradients(ad::Tape& t, const ParamStore& p,
                                  const std::vector<int>& leaves) {
    VectorXd g(p.size());
    for (int i = 0; i < p.n_segments(); ++i) {
        const ParamStore::Segment& s = p.segment(i);
        const MatrixXd gi = t.grad_of(leaves[static_cast<std::size_t>(i)]);
        Eigen::Map<VectorXd>(g.data() + s.offset, s.size()) =
            Eigen::Map<const VectorXd>(gi.data(), s.size());
    }
    return g;
}

inline std::vector<Field> window_slice(const Dataset& ds, int start, int len) {
    return {ds.observations.begin() + start, ds.observations.begin() + start + len};
}

}  // namespace detail

/// Snapshot count held out at the end of the series.
inline int validation_count(int n_snapshots, double val_frac) {
    return static_cast<int>(std::floor(val_frac * static_cast<double>(n_snapshots)));
}

/// Teacher-forced reconstruction NLL on a dataset's held-out tail; the
/// model-selection metric. NaN when the tail is shorter than two snapshots.
inline double validation_nll(const ParamStore& p, const ModelConfig& cfg,
                             const SensorLayout& layout, const Dataset& ds, int substeps,
                             double val_frac, const LossWeights& w) {
    const int n = static_cast<int>(ds.n_snapshots());
    const int n_val = validation_count(n, val_frac);
    if (n_val < 2) return std::numeric_limits<double>::quiet_NaN();
    const int start = n - n_val;
    const std::vector<Field> obs = detail::window_slice(ds, start, n_val);
    return window_loss_value(p, cfg, layout, ds.sensor_set, obs, ds.times[start], ds.dt,
                             substeps, ds.complex_valued(), true, w)
        .recon;
}

/// Trains on one or more realizations of the same system (identical dt and
/// spatial dimensionality; sensor sets may differ). Windows are drawn from
/// every dataset's training segment and shuffled together each epoch.
inline TrainResult train(const std::vector<const Dataset*>& dss, const ModelConfig& cfg,
                         const TrainConfig& tc) {
    require(!dss.empty(), "train: no datasets");
    require(tc.epochs >= 1 && tc.window >= 1 && tc.batch >= 1 && tc.substeps >= 1,
            "train: bad configuration");
    for (const Dataset* d : dss) {
        d->validate();
        require(std::abs(d->dt - dss[0]->dt) <= 1e-12, "train: datasets disagree on dt");
    }
    namespace fs = std::filesystem;

    ParamStore params = make_model_params(cfg, tc.seed);
    Adam adam(params.size(), tc.adam);

    // Fixed per-dataset structures.
    std::vector<SensorLayout> layouts;
    layouts.reserve(dss.size());
    std::vector<detail::WindowRef> all_windows;
    for (std::size_t d = 0; d < dss.size(); ++d) {
        layouts.push_back(SensorLayout::build(dss[d]->sensor_set, cfg));
        const int n = static_cast<int>(dss[d]->n_snapshots());
        const int n_train = n - validation_count(n, tc.val_frac);
        require(n_train >= tc.window + 1, "train: training segment shorter than one window");
        for (int s = 0; s + tc.window < n_train; ++s)
            all_windows.push_back({static_cast<int>(d), s});
    }

    TrainResult out;
    int start_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    ParamStore best = params;

    // Resume: parameters, optimizer moments and the epoch cursor.
    if (tc.resume) {
        require(!tc.checkpoint_dir.empty(), "train: resume needs a checkpoint directory");
        const fs::path dir(tc.checkpoint_dir);
        std::ifstream mf(dir / "manifest.json");
        require(mf.good(), "train: cannot open checkpoint manifest");
        nlohmann::json j = nlohmann::json::parse(mf);
        require(j.at("n_params").get<Eigen::Index>() == params.size(),
                "train: checkpoint parameter count mismatch");
        const auto flat = io::read_doubles(dir / "params.bin",
                                           static_cast<std::size_t>(params.size()));
        params.set_flat(Eigen::Map<const VectorXd>(flat.data(), params.size()));
        const auto opt = io::read_doubles(dir / "opt.bin",
                                          1 + 2 * static_cast<std::size_t>(params.size()));
        const Eigen::Index np = params.size();
        adam.restore(static_cast<std::int64_t>(opt[0]),
                     Eigen::Map<const VectorXd>(opt.data() + 1, np),
                     Eigen::Map<const VectorXd>(opt.data() + 1 + np, np));
        start_epoch = j.at("next_epoch").get<int>();
        best_epoch = j.at("best_epoch").get<int>();
        best_val = j.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("best_val").get<double>();
        if (fs::exists(dir / "best_params.bin")) {
            const auto bflat = io::read_doubles(dir / "best_params.bin",
                                                static_cast<std::size_t>(params.size()));
            best.set_flat(Eigen::Map<const VectorXd>(bflat.data(), params.size()));
        } else {
            best = params;
        }
    }

    std::ofstream csv;
    if (!tc.log_csv.empty()) {
        csv.open(tc.log_csv, tc.resume ? std::ios::app : std::ios::trunc);
        require(csv.good(), "train: cannot open CSV log");
        if (!tc.resume) csv << "epoch,eps,loss_total,loss_recon,loss_kl,loss_cons,wall_ms\n";
    }

    const auto save_checkpoint = [&](int next_epoch) {
        if (tc.checkpoint_dir.empty()) return;
        const fs::path dir(tc.checkpoint_dir);
        fs::create_directories(dir);
        const VectorXd& flat = params.flat();
        io::write_doubles(dir / "params.bin",
                          std::vector<double>(flat.data(), flat.data() + flat.size()));
        std::vector<double> opt;
        opt.reserve(1 + 2 * static_cast<std::size_t>(flat.size()));
        opt.push_back(static_cast<double>(adam.steps()));
        opt.insert(opt.end(), adam.m().data(), adam.m().data() + adam.m().size());
        opt.insert(opt.end(), adam.v().data(), adam.v().data() + adam.v().size());
        io::write_doubles(dir / "opt.bin", opt);
        nlohmann::json j;
        j["version"] = 1;
        j["next_epoch"] = next_epoch;
        j["n_params"] = params.size();
        j["seed"] = tc.seed;
        j["best_epoch"] = best_epoch;
        if (std::isfinite(best_val))
            j["best_val"] = best_val;
        else
            j["best_val"] = nullptr;
        std::ofstream mf(dir / "manifest.json");
        mf << j.dump(2) << "\n";
    };

    const auto mean_validation = [&]() {
        double s = 0;
        int cnt = 0;
        for (std::size_t d = 0; d < dss.size(); ++d) {
            const double v = validation_nll(params, cfg, layouts[d], *dss[d], tc.substeps,
                                            tc.val_frac, tc.weights);
            if (std::isfinite(v)) {
                s += v;
                ++cnt;
            }
        }
        return cnt > 0 ? s / cnt : std::numeric_limits<double>::quiet_NaN();
    };

    const int end_epoch = tc.max_epochs_per_run > 0
                              ? std::min(tc.epochs, start_epoch + tc.max_epochs_per_run)
                              : tc.epochs;
    for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();
        const double eps = tc.curriculum_eps(epoch);
        adam.set_lr(tc.epoch_lr(epoch));

        std::vector<detail::WindowRef> order = all_windows;
        {
            rng::Stream shuffle_stream(tc.seed, rng::sites::kBatch, static_cast<std::uint64_t>(epoch));
            shuffle_stream.shuffle(order);
        }
        rng::Stream mode_stream(tc.seed, rng::sites::kModeSelect,
                                static_cast<std::uint64_t>(epoch));

        double sum_total = 0, sum_recon = 0, sum_kl = 0, sum_cons = 0;
        int n_windows = 0;
        bool failed = false;
        const VectorXd pre_epoch = params.flat();

        for (std::size_t pos = 0; pos < order.size() && !failed; pos += tc.batch) {
            const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(tc.batch));
            const bool teacher_forced = mode_stream.next_double() < eps;
            const VectorXd pre_batch = params.flat();
            try {
                ad::Tape t;
                const std::vector<int> leaves = make_leaves(t, params);
                const LeafMap lm(params, leaves);
                std::map<int, SharedTapeCtx> ctxs;
                std::vector<int> totals;
                totals.reserve(end - pos);
                for (std::size_t i = pos; i < end; ++i) {
                    const detail::WindowRef wr = order[i];
                    const Dataset& ds = *dss[static_cast<std::size_t>(wr.ds)];
                    auto it = ctxs.find(wr.ds);
                    if (it == ctxs.end())
                        it = ctxs.emplace(wr.ds, make_shared_ctx(t, lm, cfg,
                                                                 layouts[static_cast<std::size_t>(
                                                                     wr.ds)]))
                                 .first;
                    const std::vector<Field> obs =
                        detail::window_slice(ds, wr.start, tc.window + 1);
                    const WindowNodes wn = window_loss_tape(
                        t, lm, cfg, it->second, layouts[static_cast<std::size_t>(wr.ds)], obs,
                        ds.times[static_cast<std::size_t>(wr.start)], ds.dt, tc.substeps,
                        ds.complex_valued(), teacher_forced, tc.weights);
                    totals.push_back(wn.total);
                    sum_total += t.val(wn.total)(0, 0);
                    sum_recon += t.val(wn.recon)(0, 0);
                    sum_kl += t.val(wn.kl)(0, 0);
                    sum_cons += t.val(wn.cons)(0, 0);
                    ++n_windows;
                }
                const int root = t.mean_scalars(totals);
                t.backward(root);
                VectorXd theta = params.flat();
                adam.step(theta, detail::collect_gradients(t, params, leaves));
                if (!theta.allFinite()) throw NumericalError("train: non-finite parameters");
                params.set_flat(theta);
            } catch (const NumericalError&) {
                params.set_flat(pre_batch);
                failed = true;
            } catch (const InvalidArgument&) {
                // Value-dependent preconditions (positive variances, PSD
                // covariances) also fail when a step diverges.
                params.set_flat(pre_batch);
                failed = true;
            }
        }

        if (failed) {
            out.aborted = true;
            params.set_flat(pre_epoch);
            break;
        }

        const double val = mean_validation();
        if (std::isfinite(val) && val < best_val) {
            best_val = val;
            best_epoch = epoch;
            best = params;
            if (!tc.checkpoint_dir.empty()) {
                const fs::path dir(tc.checkpoint_dir);
                fs::create_directories(dir);
                const VectorXd& flat = best.flat();
                io::write_doubles(dir / "best_params.bin",
                                  std::vector<double>(flat.data(), flat.data() + flat.size()));
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.eps = eps;
        const double nw = std::max(1, n_windows);
        st.total = sum_total / nw;
        st.recon = sum_recon / nw;
        st.kl = sum_kl / nw;
        st.cons = sum_cons / nw;
        st.val_nll = val;
        st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t_start)
                         .count();
        out.history.push_back(st);
        if (csv.is_open()) {
            csv << st.epoch << ',' << st.eps << ',' << st.total << ',' << st.recon << ','
                << st.kl << ',' << st.cons << ',' << st.wall_ms << '\n';
            csv.flush();
        }
        save_checkpoint(epoch + 1);
    }

    out.params = params;
    out.best_val = best_val;
    out.best_epoch = best_epoch;
    out.best = std::isfinite(best_val) ? best : params;
    return out;
}

inline TrainResult train(const Dataset& ds, const ModelConfig& cfg, const TrainConfig& tc) {
    return train(std::vector<const Dataset*>{&ds}, cfg, tc);
}

}  // namespace snode
