// snode_dmd: command-line driver for the benchmark pipeline. Four
// subcommands cover the full workflow: `simulate` writes a dataset,
// `train` fits the probabilistic mode model, `eval` scores a checkpoint
// against a dataset, `baseline` runs classical exact DMD on the same data.
//
// Conventions shared by every subcommand:
//   - exit 0 on success, 1 on runtime/I-O failure, 2 on usage errors;
//   - all outputs land under --out, including a run_manifest.json holding
//     the fully resolved configuration (reruns from the manifest alone
//     reproduce the outputs bit for bit);
//   - --config FILE.json seeds option values from a JSON file whose
//     sections mirror the config structs field for field; explicit flags
//     win over the file;
//   - SNODE_DMD_THREADS caps the linear-algebra worker count.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snode/config_json.hpp"
#include "snode/dataset_io.hpp"
#include "snode/dmd.hpp"
#include "snode/flow.hpp"
#include "snode/losses.hpp"
#include "snode/metrics.hpp"
#include "snode/model.hpp"
#include "snode/sim_grayscott.hpp"
#include "snode/sim_synthetic.hpp"
#include "snode/sim_vorticity.hpp"
#include "snode/subsample.hpp"
#include "snode/train.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snode;

constexpr const char* kToolVersion = "snode_dmd 1.0.0";

/// Violations of the command-line contract (bad flag values, unknown
/// names). Distinct from runtime failures so main can map them to exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int apply_thread_cap() {
    int cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap < 1) cap = 1;
    if (const char* env = std::getenv("SNODE_DMD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            std::cerr << "snode_dmd: ignoring invalid SNODE_DMD_THREADS value '" << env << "'\n";
        } else {
            cap = std::min<long>(v, cap);
        }
    }
    Eigen::setNbThreads(cap);
    return cap;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in.good()) throw IoError("cannot open config file: " + path);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw UsageError("config file is not valid JSON: " + path);
    if (!j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
    return j;
}

/// "N" -> N x N, "WxH" -> W x H.
std::pair<int, int> parse_grid(const std::string& s) {
    const auto bad = [&] { return UsageError("bad --grid value '" + s + "' (want N or WxH)"); };
    const std::size_t x = s.find('x');
    try {
        if (x == std::string::npos) {
            const int n = std::stoi(s);
            if (n < 2) throw bad();
            return {n, n};
        }
        const int w = std::stoi(s.substr(0, x));
        const int h = std::stoi(s.substr(x + 1));
        if (w < 2 || h < 2) throw bad();
        return {w, h};
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw bad();
    }
}

void write_manifest(const fs::path& out_dir, json manifest) {
    manifest["tool_version"] = kToolVersion;
    std::ofstream f(out_dir / "run_manifest.json");
    if (!f.good()) throw IoError("cannot write run manifest in " + out_dir.string());
    f << manifest.dump(2) << "\n";
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

/// Complex vector as interleaved re/im doubles, appended to `out`.
void append_complex(std::vector<double>& out, const VectorXcd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i].real());
        out.push_back(v[i].imag());
    }
}

json complex_array(const VectorXcd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(json{{"re", v[i].real()}, {"im", v[i].imag()}});
    return a;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string system, out, config;
    std::uint64_t seed = 1;
    bool seed_set = false;
    int T = 0;                  // 0 = struct default
    std::string grid;           // empty = struct default
    double sensor_frac = -1;    // <0 = struct default
    double noise_sigma = -1;    // <0 = struct default
};

int cmd_simulate(const SimulateArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json file = load_config_file(a.config);

    if (a.T != 0 && a.T < 2) throw UsageError("--T must be at least 2");
    if (a.sensor_frac >= 0 && (a.sensor_frac <= 0 || a.sensor_frac > 1))
        throw UsageError("--sensor-frac must lie in (0, 1]");
    if (a.noise_sigma >= 0 && a.noise_sigma < 0) throw UsageError("--noise-sigma must be >= 0");

    Dataset ds;
    json resolved;
    if (a.system == "synthetic") {
        SyntheticConfig c;
        if (file.contains("synthetic")) file.at("synthetic").get_to(c);
        if (a.seed_set) c.seed = a.seed;
        if (a.T != 0) c.n_snapshots = a.T;
        if (!a.grid.empty()) std::tie(c.nx, c.ny) = parse_grid(a.grid);
        if (a.sensor_frac >= 0) c.sensor_frac = a.sensor_frac;
        if (a.noise_sigma >= 0) c.noise_sigma = a.noise_sigma;
        resolved = json{{"synthetic", c}};
        ds = simulate_synthetic(c);
    } else if (a.system == "grayscott") {
        GrayScottConfig c;
        if (file.contains("grayscott")) file.at("grayscott").get_to(c);
        if (a.seed_set) c.seed = a.seed;
        if (a.T != 0) c.n_snapshots = a.T;
        if (!a.grid.empty()) {
            const auto [w, h] = parse_grid(a.grid);
            if (w != h) throw UsageError("--grid must be square for grayscott");
            c.n = w;
        }
        if (a.sensor_frac >= 0) c.sensor_frac = a.sensor_frac;
        if (a.noise_sigma >= 0) c.noise_sigma = a.noise_sigma;
        resolved = json{{"grayscott", c}};
        ds = simulate_grayscott(c);
    } else if (a.system == "vorticity") {
        VorticityConfig c;
        if (file.contains("vorticity")) file.at("vorticity").get_to(c);
        if (a.seed_set) c.seed = a.seed;
        if (a.T != 0) c.n_snapshots = a.T;
        if (!a.grid.empty()) {
            const auto [w, h] = parse_grid(a.grid);
            if (w != h) throw UsageError("--grid must be square for vorticity");
            if (w < 16 || w % 2 != 0)
                throw UsageError("--grid for vorticity must be even and at least 16");
            c.n = w;
        }
        if (a.sensor_frac >= 0) c.sensor_frac = a.sensor_frac;
        if (a.noise_sigma >= 0) c.noise_sigma = a.noise_sigma;
        resolved = json{{"vorticity", c}};
        ds = simulate_vorticity(c);
    } else {
        throw UsageError("unsupported system '" + a.system + "'");
    }

    const fs::path out(a.out);
    fs::create_directories(out);
    io::save_dataset(ds, out);

    write_manifest(out, json{{"command", "simulate"},
                             {"config", resolved},
                             {"seed", ds.meta.seed},
                             {"inputs", json::object()},
                             {"outputs",
                              json{{"dataset", "."},
                                   {"n_sensors", ds.n_sensors()},
                                   {"n_grid", ds.n_grid()},
                                   {"n_snapshots", ds.n_snapshots()},
                                   {"dt", ds.dt}}},
                             {"wall_ms", wall_ms_since(t0)}});
    std::cout << "simulate: wrote " << ds.n_snapshots() << " snapshots, " << ds.n_sensors()
              << " sensors (of " << ds.n_grid() << " grid points) to " << out.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::vector<std::string> data;
    std::string out, from, config;
    int rank = 0;  // 0 = resolve by system
    int epochs = 0, batch = 0, window = 0, substeps = 0;
    double lr = 0, val_frac = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_train(const TrainArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    const json file = load_config_file(a.config);

    if (a.rank < 0) throw UsageError("--rank must be positive");
    if (a.epochs < 0) throw UsageError("--epochs must be positive");
    if (a.batch < 0) throw UsageError("--batch must be positive");
    if (a.window < 0) throw UsageError("--window must be positive");
    if (a.substeps < 0) throw UsageError("--substeps must be positive");
    if (a.lr < 0) throw UsageError("--lr must be positive");
    if (a.val_frac >= 0 && a.val_frac >= 1) throw UsageError("--val-frac must lie in [0, 1)");

    std::vector<Dataset> dss;
    dss.reserve(a.data.size());
    for (const std::string& d : a.data) dss.push_back(io::load_dataset(d));
    std::vector<const Dataset*> ptrs;
    for (const Dataset& d : dss) ptrs.push_back(&d);

    ModelConfig cfg;
    bool rank_from_file = false;
    if (file.contains("model")) {
        rank_from_file = file.at("model").contains("r");
        file.at("model").get_to(cfg);
    }
    if (a.rank > 0) {
        cfg.r = a.rank;
    } else if (!rank_from_file) {
        // Default rank by benchmark family: 4 for the synthetic modal
        // sequence, 8 for everything else.
        cfg.r = dss[0].meta.system == "synthetic" ? 4 : 8;
    }
    cfg.validate();

    TrainConfig tc;
    if (file.contains("train")) file.at("train").get_to(tc);
    if (a.epochs > 0) tc.epochs = a.epochs;
    if (a.batch > 0) tc.batch = a.batch;
    if (a.window > 0) tc.window = a.window;
    if (a.substeps > 0) tc.substeps = a.substeps;
    if (a.lr > 0) tc.adam.lr = a.lr;
    if (a.val_frac >= 0) tc.val_frac = a.val_frac;
    if (a.seed_set) tc.seed = a.seed;
    if (tc.epochs < 1) throw UsageError("--epochs must be positive");

    const fs::path out(a.out);
    fs::create_directories(out);
    tc.checkpoint_dir = out.string();
    tc.log_csv = (out / "log.csv").string();

    // Resuming from another directory: bring the checkpoint state here so
    // every output of this run stays under --out.
    if (!a.from.empty()) {
        const fs::path src(a.from);
        if (!fs::exists(src / "manifest.json"))
            throw IoError("no checkpoint manifest in " + src.string());
        if (fs::weakly_canonical(src) != fs::weakly_canonical(out)) {
            for (const char* name : {"manifest.json", "params.bin", "opt.bin", "best_params.bin"})
                if (fs::exists(src / name))
                    fs::copy_file(src / name, out / name, fs::copy_options::overwrite_existing);
            if (fs::exists(src / "log.csv"))
                fs::copy_file(src / "log.csv", out / "log.csv",
                              fs::copy_options::overwrite_existing);
        }
        tc.resume = true;
    }

    const TrainResult res = train(ptrs, cfg, tc);

    json inputs{{"data", a.data}};
    if (!a.from.empty()) inputs["resume_from"] = a.from;
    write_manifest(out, json{{"command", "train"},
                             {"config", json{{"model", cfg}, {"train", tc}}},
                             {"seed", tc.seed},
                             {"inputs", inputs},
                             {"outputs",
                              json{{"checkpoint", "params.bin"},
                                   {"best_checkpoint", "best_params.bin"},
                                   {"log", "log.csv"},
                                   {"best_epoch", res.best_epoch},
                                   {"best_val", res.best_val},
                                   {"epochs_run", res.history.size()},
                                   {"aborted", res.aborted}}},
                             {"wall_ms", wall_ms_since(t0)}});
    std::cout << "train: " << res.history.size() << " epochs, best validation " << res.best_val
              << " at epoch " << res.best_epoch << (res.aborted ? " (aborted)" : "") << "\n";
    return res.aborted ? 1 : 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string ckpt, data, out, grid_out, config;
    int horizon = 1;
    std::vector<std::string> metrics{"l1"};
    int samples = 10;
    int particles = 4;
    std::uint64_t seed = 0;
};

/// Complex mode matrix on a point set, one column per latent mode.
MatrixXcd complex_modes_at(const ParamStore& p, const ModelConfig& cfg, const CoordSet& pts) {
    const MatrixXd w = mode_lift_block(p, cfg, pts);
    MatrixXcd m(pts.size(), cfg.r);
    for (Eigen::Index j = 0; j < pts.size(); ++j)
        for (int i = 0; i < cfg.r; ++i) m(j, i) = Complex(w(2 * i, j), w(2 * i + 1, j));
    return m;
}

/// Latent mean trajectory from per-snapshot encodings, one row per mode.
MatrixXcd encoded_trajectory(const ParamStore& p, const ModelConfig& cfg, const Dataset& ds) {
    MatrixXcd traj(cfg.r, static_cast<Eigen::Index>(ds.n_snapshots()));
    for (std::size_t t = 0; t < ds.n_snapshots(); ++t)
        traj.col(static_cast<Eigen::Index>(t)) =
            encode_latent(p, cfg, ds.sensor_set, ds.observations[t]).mean_complex();
    return traj;
}

int cmd_eval(const EvalArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    load_config_file(a.config);  // reserved for future knobs; validated if given

    if (a.horizon < 1) throw UsageError("--horizon must be at least 1");
    if (a.samples < 2) throw UsageError("--samples must be at least 2");
    if (a.particles < 1) throw UsageError("--particles must be at least 1");
    for (const std::string& m : a.metrics)
        if (m != "l1" && m != "modes" && m != "eigs" && m != "portraits" && m != "traj")
            throw UsageError("unknown metric '" + m +
                             "' (choose from l1,modes,eigs,portraits,traj)");
    const auto wants = [&](const char* m) {
        return std::find(a.metrics.begin(), a.metrics.end(), m) != a.metrics.end();
    };

    // Model configuration travels with the training run's manifest.
    const fs::path ckpt(a.ckpt);
    std::ifstream mf(ckpt / "run_manifest.json");
    if (!mf.good()) throw IoError("no run_manifest.json in " + ckpt.string());
    const json tm = json::parse(mf);
    ModelConfig cfg;
    tm.at("config").at("model").get_to(cfg);
    TrainConfig tc;
    tm.at("config").at("train").get_to(tc);

    ParamStore p = make_model_params(cfg, 0);
    const fs::path pfile =
        fs::exists(ckpt / "best_params.bin") ? ckpt / "best_params.bin" : ckpt / "params.bin";
    const auto flat = io::read_doubles(pfile, static_cast<std::size_t>(p.size()));
    p.set_flat(Eigen::Map<const VectorXd>(flat.data(), p.size()));

    Dataset ds = io::load_dataset(a.data);
    const int T = static_cast<int>(ds.n_snapshots());
    const SdeConfig sde =
        SdeConfig::for_spacing(std::exp(p.scalar("log_tau")), tc.substeps, ds.dt);
    const double sigma_obs = std::exp(p.scalar("log_sigma_obs"));

    const fs::path out(a.out);
    fs::create_directories(out);
    json metrics;
    json outputs{{"metrics", "metrics.json"}};

    // Hoisted once: decoding on the evaluation grid dominates eval cost.
    MatrixXd w_grid;
    if (wants("l1") || wants("traj")) w_grid = mode_lift_block(p, cfg, ds.full_grid);

    if (wants("l1")) {
        if (!ds.has_truth()) {
            metrics["l1"] = json{{"skipped", "dataset carries no full-grid truth"}};
        } else if (a.horizon >= T) {
            throw UsageError("--horizon must be shorter than the dataset (" +
                             std::to_string(T) + " snapshots)");
        } else {
            std::ofstream csv(out / "eval_l1.csv");
            csv << "start,time,l1\n";
            double sum = 0;
            int cnt = 0;
            for (int s = 0; s + a.horizon < T; ++s) {
                const auto priors = forecast(p, cfg, ds.sensor_set, ds.observations[s],
                                             ds.times[s], ds.dt, sde, a.horizon);
                const FieldPrediction rec = decode_points(w_grid, priors.back(), sigma_obs,
                                                          ds.times[s + a.horizon]);
                const double e = l1_error(rec.mean, ds.truth[s + a.horizon].values,
                                          ds.complex_valued());
                csv << s << "," << ds.times[s + a.horizon] << "," << e << "\n";
                sum += e;
                ++cnt;
            }
            metrics["l1"] = json{{"horizon", a.horizon},
                                 {"mean", sum / cnt},
                                 {"n_windows", cnt},
                                 {"csv", "eval_l1.csv"}};
            outputs["l1"] = "eval_l1.csv";
        }
    }

    std::optional<ModeMatch> match;
    if (wants("modes") || wants("eigs")) {
        if (!ds.gt_spectrum) {
            const json note{{"skipped", "dataset carries no generating spectrum"}};
            if (wants("modes")) metrics["modes"] = note;
            if (wants("eigs")) metrics["eigs"] = note;
        } else if (ds.gt_spectrum->modes.cols() != cfg.r) {
            const json note{{"skipped", "model rank differs from the generating spectrum"}};
            if (wants("modes")) metrics["modes"] = note;
            if (wants("eigs")) metrics["eigs"] = note;
        } else {
            const MatrixXcd learned = complex_modes_at(p, cfg, ds.full_grid);
            match = match_modes(learned, ds.gt_spectrum->modes);
            if (wants("modes")) {
                std::ofstream csv(out / "eval_modes.csv");
                csv << "learned_mode,truth_mode,cosine\n";
                for (int i = 0; i < cfg.r; ++i)
                    csv << i << "," << match->assignment[static_cast<std::size_t>(i)] << ","
                        << match->cosines[i] << "\n";
                metrics["modes"] =
                    json{{"mean_cosine", match->mean_cosine}, {"csv", "eval_modes.csv"}};
                outputs["modes"] = "eval_modes.csv";
            }
            if (wants("eigs")) {
                const MatrixXcd traj = encoded_trajectory(p, cfg, ds);
                const VectorXcd lam = eigen_log_ratio(traj, ds.dt);
                std::ofstream csv(out / "eval_eigs.csv");
                csv << "learned_mode,truth_mode,lambda_re,lambda_im,gt_re,gt_im,abs_error\n";
                for (int i = 0; i < cfg.r; ++i) {
                    const int g = match->assignment[static_cast<std::size_t>(i)];
                    const Complex gt = ds.gt_spectrum->lambdas[g];
                    csv << i << "," << g << "," << lam[i].real() << "," << lam[i].imag() << ","
                        << gt.real() << "," << gt.imag() << "," << std::abs(lam[i] - gt) << "\n";
                }
                metrics["eigs"] = json{
                    {"mean_abs_error",
                     eigen_abs_error(lam, ds.gt_spectrum->lambdas, match->assignment)},
                    {"csv", "eval_eigs.csv"}};
                outputs["eigs"] = "eval_eigs.csv";
            }
        }
    }

    if (wants("portraits")) {
        const MatrixXcd traj = encoded_trajectory(p, cfg, ds);
        std::ofstream csv(out / "eval_portraits.csv");
        csv << "mode,p30,p60,p90,degenerate\n";
        json rows = json::array();
        for (int i = 0; i < cfg.r; ++i) {
            VectorXd mag(traj.cols());
            for (Eigen::Index t = 0; t < traj.cols(); ++t) mag[t] = std::abs(traj(i, t));
            const PortraitLevels lv = portrait_levels(mag);
            csv << i << "," << lv.p30 << "," << lv.p60 << "," << lv.p90 << ","
                << (lv.degenerate ? 1 : 0) << "\n";
            rows.push_back(json{{"mode", i},
                                {"p30", lv.p30},
                                {"p60", lv.p60},
                                {"p90", lv.p90},
                                {"degenerate", lv.degenerate}});
        }
        metrics["portraits"] = json{{"levels", rows}, {"csv", "eval_portraits.csv"}};
        outputs["portraits"] = "eval_portraits.csv";
    }

    if (wants("traj")) {
        const int n = ds.grid_shape[0];
        if (n < 2 || n != ds.grid_shape[1] || ds.n_grid() != static_cast<Eigen::Index>(n) * n) {
            metrics["traj"] = json{{"skipped", "trajectories need a square observation grid"}};
        } else {
            // Posterior path ensemble: one latent sample trajectory per
            // sample index, decoded to vorticity, integrated as velocity.
            const LatentDynamics dyn = model_dynamics(p, cfg);
            const LatentGaussian g0 = encode_latent(p, cfg, ds.sensor_set, ds.observations[0]);
            const double domain = 2 * M_PI;
            const int side = static_cast<int>(std::ceil(std::sqrt(a.particles)));
            std::vector<Eigen::Vector2d> starts;
            for (int k = 0; k < a.particles; ++k)
                starts.emplace_back(domain * (0.5 + k % side) / side,
                                    domain * (0.5 + k / side) / side);

            std::vector<std::vector<Eigen::Vector2d>> ends(
                static_cast<std::size_t>(a.particles));
            std::ofstream csv(out / "eval_traj.csv");
            csv << "sample,particle,x0,y0,x1,y1\n";
            for (int s = 0; s < a.samples; ++s) {
                const auto path = sample_path(g0, dyn, ds.times[0], sde, T - 1, a.seed,
                                              static_cast<std::uint64_t>(s));
                std::vector<VelocityField> fields;
                fields.reserve(static_cast<std::size_t>(T) - 1);
                for (int t = 0; t + 1 < T; ++t)
                    fields.push_back(velocity_from_vorticity(
                        decode_sample(w_grid, path[static_cast<std::size_t>(t)], sigma_obs,
                                      ds.times[static_cast<std::size_t>(t)])
                            .mean,
                        n, domain));
                for (int k = 0; k < a.particles; ++k) {
                    const Eigen::Vector2d e = advect_through(fields, starts[static_cast<std::size_t>(k)], ds.dt);
                    ends[static_cast<std::size_t>(k)].push_back(e);
                    csv << s << "," << k << "," << starts[static_cast<std::size_t>(k)].x() << ","
                        << starts[static_cast<std::size_t>(k)].y() << "," << e.x() << ","
                        << e.y() << "\n";
                }
            }
            double disp = 0;
            for (int k = 0; k < a.particles; ++k)
                disp += mean_pairwise_distance(ends[static_cast<std::size_t>(k)]);
            disp /= a.particles;
            metrics["traj"] = json{{"dispersion", disp},
                                   {"samples", a.samples},
                                   {"particles", a.particles},
                                   {"csv", "eval_traj.csv"}};
            outputs["traj"] = "eval_traj.csv";
        }
    }

    if (!a.grid_out.empty()) {
        // Grid-free reconstruction: filter each snapshot through the encoder
        // and decode on an arbitrary grid, independent of the training one.
        const auto [gw, gh] = parse_grid(a.grid_out);
        const CoordSet grid = uniform_grid(gw, gh);
        const MatrixXd w_out = mode_lift_block(p, cfg, grid);
        std::vector<double> blob;
        blob.reserve(2 * static_cast<std::size_t>(grid.size()) * static_cast<std::size_t>(T));
        bool all_finite = true;
        for (int t = 0; t < T; ++t) {
            const LatentGaussian g =
                encode_latent(p, cfg, ds.sensor_set, ds.observations[static_cast<std::size_t>(t)]);
            const FieldPrediction rec = decode_points(w_out, g, sigma_obs, ds.times[static_cast<std::size_t>(t)]);
            all_finite = all_finite && rec.mean.allFinite();
            append_complex(blob, rec.mean);
        }
        io::write_doubles(out / "grid_fields.bin", blob);
        metrics["grid_out"] = json{{"nx", gw},
                                   {"ny", gh},
                                   {"n_snapshots", T},
                                   {"finite", all_finite},
                                   {"file", "grid_fields.bin"},
                                   {"layout", "snapshot-major, row-major in y, re/im interleaved"}};
        outputs["grid_fields"] = "grid_fields.bin";
    }

    {
        std::ofstream f(out / "metrics.json");
        f << metrics.dump(2) << "\n";
    }
    write_manifest(out, json{{"command", "eval"},
                             {"config", json{{"model", cfg},
                                             {"sde", sde},
                                             {"horizon", a.horizon},
                                             {"metrics", a.metrics},
                                             {"samples", a.samples},
                                             {"particles", a.particles},
                                             {"grid_out", a.grid_out}}},
                             {"seed", a.seed},
                             {"inputs", json{{"ckpt", a.ckpt}, {"data", a.data}}},
                             {"outputs", outputs},
                             {"wall_ms", wall_ms_since(t0)}});
    std::cout << "eval: wrote " << (out / "metrics.json").string() << "\n";
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------- baseline

struct BaselineArgs {
    std::string data, out, config;
    int rank = 0;  // 0 = resolve by system
};

int cmd_baseline(const BaselineArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    load_config_file(a.config);
    if (a.rank < 0) throw UsageError("--rank must be positive");

    const Dataset ds = io::load_dataset(a.data);
    const int rank = a.rank > 0 ? a.rank : (ds.meta.system == "synthetic" ? 4 : 8);

    // Snapshot matrix over the sensors, one column per time.
    MatrixXcd snaps(ds.n_sensors(), static_cast<Eigen::Index>(ds.n_snapshots()));
    for (std::size_t t = 0; t < ds.n_snapshots(); ++t)
        snaps.col(static_cast<Eigen::Index>(t)) = ds.observations[t].values;

    const DmdResult res = exact_dmd(snaps, ds.dt, rank);

    const fs::path out(a.out);
    fs::create_directories(out);
    json report{{"requested_rank", rank},
                {"effective_rank", res.effective_rank},
                {"residual", res.residual},
                {"mus", complex_array(res.spectrum.mus)},
                {"lambdas", complex_array(res.spectrum.lambdas)},
                {"amplitudes", complex_array(res.amplitudes)},
                {"modes_file", "baseline_modes.bin"},
                {"modes_layout", "column-major over sensors, re/im interleaved"}};

    if (ds.gt_spectrum && ds.gt_spectrum->mus.size() == res.spectrum.mus.size()) {
        // Pair recovered and generating eigenvalues by minimum total
        // distance, then report per-pair and mean errors.
        const int r = static_cast<int>(res.spectrum.mus.size());
        MatrixXd cost(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                cost(i, j) = std::abs(res.spectrum.mus[i] - ds.gt_spectrum->mus[j]);
        const std::vector<int> assign = hungarian(cost);
        json pairs = json::array();
        for (int i = 0; i < r; ++i) {
            const int j = assign[static_cast<std::size_t>(i)];
            pairs.push_back(json{{"recovered", i},
                                 {"truth", j},
                                 {"mu_abs_error", std::abs(res.spectrum.mus[i] -
                                                           ds.gt_spectrum->mus[j])},
                                 {"lambda_abs_error", std::abs(res.spectrum.lambdas[i] -
                                                               ds.gt_spectrum->lambdas[j])}});
        }
        report["spectral_errors"] = json{
            {"pairs", pairs},
            {"mean_mu_abs_error", eigen_abs_error(res.spectrum.mus, ds.gt_spectrum->mus, assign)},
            {"mean_lambda_abs_error",
             eigen_abs_error(res.spectrum.lambdas, ds.gt_spectrum->lambdas, assign)}};
    } else if (ds.gt_spectrum) {
        report["spectral_errors"] =
            json{{"skipped", "effective rank differs from the generating spectrum"}};
    }

    std::vector<double> blob;
    blob.reserve(2 * static_cast<std::size_t>(res.spectrum.modes.size()));
    for (Eigen::Index c = 0; c < res.spectrum.modes.cols(); ++c)
        append_complex(blob, res.spectrum.modes.col(c));
    io::write_doubles(out / "baseline_modes.bin", blob);
    {
        std::ofstream f(out / "baseline.json");
        f << report.dump(2) << "\n";
    }
    write_manifest(out, json{{"command", "baseline"},
                             {"config", json{{"rank", rank}}},
                             {"seed", ds.meta.seed},
                             {"inputs", json{{"data", a.data}}},
                             {"outputs",
                              json{{"report", "baseline.json"},
                                   {"modes", "baseline_modes.bin"}}},
                             {"wall_ms", wall_ms_since(t0)}});
    std::cout << "baseline: rank " << res.effective_rank << ", residual " << res.residual
              << ", report in " << (out / "baseline.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic continuous-space mode decomposition toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* s = app.add_subcommand("simulate", "Generate a benchmark dataset");
    s->add_option("--system", sim.system, "synthetic | grayscott | vorticity")->required();
    s->add_option("--out", sim.out, "output directory")->required();
    auto* sim_seed = s->add_option("--seed", sim.seed, "generator seed");
    s->add_option("--T", sim.T, "number of snapshots")->check(CLI::PositiveNumber);
    s->add_option("--grid", sim.grid, "grid size, N or WxH");
    s->add_option("--sensor-frac", sim.sensor_frac, "sensor fraction (default 0.1)");
    s->add_option("--noise-sigma", sim.noise_sigma, "observation noise level");
    s->add_option("--config", sim.config, "JSON config file (flags win)");

    TrainArgs tr;
    CLI::App* t = app.add_subcommand("train", "Fit the model to one or more datasets");
    t->add_option("--data", tr.data, "dataset directory (repeatable)")->required();
    t->add_option("--out", tr.out, "output directory")->required();
    t->add_option("--rank", tr.rank, "latent modes (default: 4 synthetic, else 8)")->check(CLI::PositiveNumber);
    t->add_option("--epochs", tr.epochs, "training epochs")->check(CLI::PositiveNumber);
    t->add_option("--batch", tr.batch, "windows per optimizer step")->check(CLI::PositiveNumber);
    t->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    t->add_option("--window", tr.window, "transitions per training window")->check(CLI::PositiveNumber);
    t->add_option("--substeps", tr.substeps, "integrator substeps per data step")->check(CLI::PositiveNumber);
    t->add_option("--val-frac", tr.val_frac, "validation tail fraction");
    auto* tr_seed = t->add_option("--seed", tr.seed, "training seed");
    t->add_option("--from", tr.from, "resume from this checkpoint directory");
    t->add_option("--config", tr.config, "JSON config file (flags win)");

    EvalArgs ev;
    CLI::App* e = app.add_subcommand("eval", "Score a checkpoint against a dataset");
    e->add_option("--ckpt", ev.ckpt, "training output directory")->required();
    e->add_option("--data", ev.data, "dataset directory")->required();
    e->add_option("--out", ev.out, "output directory")->required();
    e->add_option("--horizon", ev.horizon, "forecast steps per window (default 1)")->check(CLI::PositiveNumber);
    e->add_option("--metrics", ev.metrics, "subset of l1,modes,eigs,portraits,traj")
        ->delimiter(',');
    e->add_option("--samples", ev.samples, "posterior samples for traj")->check(CLI::PositiveNumber);
    e->add_option("--particles", ev.particles, "tracer particles for traj")->check(CLI::PositiveNumber);
    e->add_option("--seed", ev.seed, "sampling seed for traj");
    e->add_option("--grid-out", ev.grid_out, "emit reconstructions on a WxH grid");
    e->add_option("--config", ev.config, "JSON config file (flags win)");

    BaselineArgs bl;
    CLI::App* b = app.add_subcommand("baseline", "Classical exact-DMD reference on a dataset");
    b->add_option("--data", bl.data, "dataset directory")->required();
    b->add_option("--out", bl.out, "output directory")->required();
    b->add_option("--rank", bl.rank, "SVD truncation rank (default: 4 synthetic, else 8)")->check(CLI::PositiveNumber);
    b->add_option("--config", bl.config, "JSON config file (flags win)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return 2;
    }

    try {
        apply_thread_cap();
        sim.seed_set = sim_seed->count() > 0;
        tr.seed_set = tr_seed->count() > 0;
        if (s->parsed()) return cmd_simulate(sim);
        if (t->parsed()) return cmd_train(tr);
        if (e->parsed()) return cmd_eval(ev);
        if (b->parsed()) return cmd_baseline(bl);
        std::cerr << "snode_dmd: no subcommand\n";
        return 2;
    } catch (const UsageError& ex) {
        std::cerr << "snode_dmd: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "snode_dmd: " << ex.what() << "\n";
        return 1;
    }
}
