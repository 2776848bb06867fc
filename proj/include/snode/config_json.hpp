#pragma once
// JSON mirroring of the configuration structs, field for field. to_json
// emits every field; from_json overlays only the keys present, so a partial
// config file adjusts some fields and leaves the rest at their defaults.

#include <json.hpp>

#include "snode/losses.hpp"
#include "snode/nets.hpp"
#include "snode/sde.hpp"
#include "snode/sim_grayscott.hpp"
#include "snode/sim_synthetic.hpp"
#include "snode/sim_vorticity.hpp"
#include "snode/train.hpp"

namespace snode {
namespace detail {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& v) {
    if (j.contains(key)) v = j.at(key).get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"r", c.r},
                       {"coord_dim", c.coord_dim},
                       {"posenc_L", c.posenc_L},
                       {"mode_width", c.mode_width},
                       {"mode_hidden", c.mode_hidden},
                       {"enc_width", c.enc_width},
                       {"drift_width", c.drift_width},
                       {"logvar_min", c.logvar_min},
                       {"logvar_max", c.logvar_max},
                       {"init_log_tau", c.init_log_tau},
                       {"init_log_sigma_obs", c.init_log_sigma_obs},
                       {"init_alpha_lo", c.init_alpha_lo},
                       {"init_alpha_hi", c.init_alpha_hi},
                       {"init_omega_lo", c.init_omega_lo},
                       {"init_omega_hi", c.init_omega_hi}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    detail::get_if(j, "r", c.r);
    detail::get_if(j, "coord_dim", c.coord_dim);
    detail::get_if(j, "posenc_L", c.posenc_L);
    detail::get_if(j, "mode_width", c.mode_width);
    detail::get_if(j, "mode_hidden", c.mode_hidden);
    detail::get_if(j, "enc_width", c.enc_width);
    detail::get_if(j, "drift_width", c.drift_width);
    detail::get_if(j, "logvar_min", c.logvar_min);
    detail::get_if(j, "logvar_max", c.logvar_max);
    detail::get_if(j, "init_log_tau", c.init_log_tau);
    detail::get_if(j, "init_log_sigma_obs", c.init_log_sigma_obs);
    detail::get_if(j, "init_alpha_lo", c.init_alpha_lo);
    detail::get_if(j, "init_alpha_hi", c.init_alpha_hi);
    detail::get_if(j, "init_omega_lo", c.init_omega_lo);
    detail::get_if(j, "init_omega_hi", c.init_omega_hi);
}

inline void to_json(nlohmann::json& j, const AdamConfig& c) {
    j = nlohmann::json{
        {"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}, {"clip", c.clip}};
}

inline void from_json(const nlohmann::json& j, AdamConfig& c) {
    detail::get_if(j, "lr", c.lr);
    detail::get_if(j, "beta1", c.beta1);
    detail::get_if(j, "beta2", c.beta2);
    detail::get_if(j, "eps", c.eps);
    detail::get_if(j, "clip", c.clip);
}

inline void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{
        {"recon", w.recon}, {"kl", w.kl}, {"cons", w.cons}, {"kappa", w.kappa}};
}

inline void from_json(const nlohmann::json& j, LossWeights& w) {
    detail::get_if(j, "recon", w.recon);
    detail::get_if(j, "kl", w.kl);
    detail::get_if(j, "cons", w.cons);
    detail::get_if(j, "kappa", w.kappa);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"window", c.window},
                       {"batch", c.batch},
                       {"substeps", c.substeps},
                       {"val_frac", c.val_frac},
                       {"seed", c.seed},
                       {"adam", c.adam},
                       {"weights", c.weights},
                       {"checkpoint_dir", c.checkpoint_dir},
                       {"log_csv", c.log_csv},
                       {"resume", c.resume},
                       {"max_epochs_per_run", c.max_epochs_per_run},
                       {"lr_final", c.lr_final}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    detail::get_if(j, "epochs", c.epochs);
    detail::get_if(j, "window", c.window);
    detail::get_if(j, "batch", c.batch);
    detail::get_if(j, "substeps", c.substeps);
    detail::get_if(j, "val_frac", c.val_frac);
    detail::get_if(j, "seed", c.seed);
    detail::get_if(j, "adam", c.adam);
    detail::get_if(j, "weights", c.weights);
    detail::get_if(j, "checkpoint_dir", c.checkpoint_dir);
    detail::get_if(j, "log_csv", c.log_csv);
    detail::get_if(j, "resume", c.resume);
    detail::get_if(j, "max_epochs_per_run", c.max_epochs_per_run);
    detail::get_if(j, "lr_final", c.lr_final);
}

inline void to_json(nlohmann::json& j, const SdeConfig& c) {
    j = nlohmann::json{{"tau", c.tau}, {"P", c.P}, {"delta_t", c.delta_t}};
}

inline void from_json(const nlohmann::json& j, SdeConfig& c) {
    detail::get_if(j, "tau", c.tau);
    detail::get_if(j, "P", c.P);
    detail::get_if(j, "delta_t", c.delta_t);
}

inline void to_json(nlohmann::json& j, const SyntheticConfig& c) {
    j = nlohmann::json{{"nx", c.nx},
                       {"ny", c.ny},
                       {"n_snapshots", c.n_snapshots},
                       {"dt", c.dt},
                       {"sensor_frac", c.sensor_frac},
                       {"noise_sigma", c.noise_sigma},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticConfig& c) {
    detail::get_if(j, "nx", c.nx);
    detail::get_if(j, "ny", c.ny);
    detail::get_if(j, "n_snapshots", c.n_snapshots);
    detail::get_if(j, "dt", c.dt);
    detail::get_if(j, "sensor_frac", c.sensor_frac);
    detail::get_if(j, "noise_sigma", c.noise_sigma);
    detail::get_if(j, "seed", c.seed);
}

inline void to_json(nlohmann::json& j, const GrayScottConfig& c) {
    j = nlohmann::json{{"n", c.n},
                       {"n_snapshots", c.n_snapshots},
                       {"dt", c.dt},
                       {"dx", c.dx},
                       {"Du", c.Du},
                       {"Dv", c.Dv},
                       {"F", c.F},
                       {"kill", c.kill},
                       {"f_perturb_sigma", c.f_perturb_sigma},
                       {"max_step", c.max_step},
                       {"sensor_frac", c.sensor_frac},
                       {"noise_sigma", c.noise_sigma},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, GrayScottConfig& c) {
    detail::get_if(j, "n", c.n);
    detail::get_if(j, "n_snapshots", c.n_snapshots);
    detail::get_if(j, "dt", c.dt);
    detail::get_if(j, "dx", c.dx);
    detail::get_if(j, "Du", c.Du);
    detail::get_if(j, "Dv", c.Dv);
    detail::get_if(j, "F", c.F);
    detail::get_if(j, "kill", c.kill);
    detail::get_if(j, "f_perturb_sigma", c.f_perturb_sigma);
    detail::get_if(j, "max_step", c.max_step);
    detail::get_if(j, "sensor_frac", c.sensor_frac);
    detail::get_if(j, "noise_sigma", c.noise_sigma);
    detail::get_if(j, "seed", c.seed);
}

// The optional initial_vorticity callback is programmatic-only and has no
// JSON form; serialization covers every other field.
inline void to_json(nlohmann::json& j, const VorticityConfig& c) {
    j = nlohmann::json{{"n", c.n},
                       {"n_snapshots", c.n_snapshots},
                       {"dt", c.dt},
                       {"save_every", c.save_every},
                       {"nu", c.nu},
                       {"init_peak_k", c.init_peak_k},
                       {"init_band_width", c.init_band_width},
                       {"sensor_frac", c.sensor_frac},
                       {"noise_sigma", c.noise_sigma},
                       {"observe_stride", c.observe_stride},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, VorticityConfig& c) {
    detail::get_if(j, "n", c.n);
    detail::get_if(j, "n_snapshots", c.n_snapshots);
    detail::get_if(j, "dt", c.dt);
    detail::get_if(j, "save_every", c.save_every);
    detail::get_if(j, "nu", c.nu);
    detail::get_if(j, "init_peak_k", c.init_peak_k);
    detail::get_if(j, "init_band_width", c.init_band_width);
    detail::get_if(j, "sensor_frac", c.sensor_frac);
    detail::get_if(j, "noise_sigma", c.noise_sigma);
    detail::get_if(j, "observe_stride", c.observe_stride);
    detail::get_if(j, "seed", c.seed);
}

}  // namespace snode
