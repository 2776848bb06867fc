#pragma once
// Analytic linear benchmark: four fixed spatial patterns evolving under
// known complex eigenvalues on a 32 x 32 grid. Because the generating
// spectrum, modes and amplitudes are exact, this is the system used to
// score spectral recovery.

#include <vector>

#include "snode/subsample.hpp"

namespace snode {

struct SyntheticConfig {
    int nx = 32, ny = 32;
    int n_snapshots = 50;
    double dt = 0.1;
    double sensor_frac = 0.1;
    double noise_sigma = 0.1;
    std::uint64_t seed = 1;
};

/// The four generating patterns evaluated at one point of [-1,1]^2.
inline VectorXd synthetic_mode_values(double x, double y) {
    VectorXd m(4);
    m[0] = std::sin(M_PI / 2 * (x + 1)) * std::cos(M_PI / 2 * (y + 1));
    m[1] = std::cos(M_PI * (x + 1)) * std::sin(M_PI * (y + 1));
    m[2] = std::sin(2 * M_PI * x) * std::sin(2 * M_PI * y);
    m[3] = 0.5;
    return m;
}

inline VectorXcd synthetic_lambdas() {
    VectorXcd l(4);
    l << Complex(-0.01, 2.0), Complex(-0.05, 4.0), Complex(-0.20, 1.0), Complex(-0.01, 0.3);
    return l;
}

inline VectorXcd synthetic_amplitudes() {
    VectorXcd b(4);
    b << Complex(1.0, 0.5), Complex(0.8, -0.3), Complex(0.7, 0.2), Complex(0.2, 0.0);
    return b;
}

/// y(s, t) = sum_k b_k exp(lambda_k t) m_k(s), observed at a fixed random
/// 10% of grid points under complex Gaussian noise.
inline Dataset simulate_synthetic(const SyntheticConfig& c) {
    require(c.n_snapshots >= 2 && c.dt > 0, "simulate_synthetic: bad time axis");
    Dataset ds;
    ds.full_grid = uniform_grid(c.nx, c.ny);
    ds.grid_shape = {c.ny, c.nx};
    ds.dt = c.dt;

    const VectorXcd lambdas = synthetic_lambdas();
    const VectorXcd b = synthetic_amplitudes();
    const Eigen::Index n = ds.full_grid.size();
    MatrixXcd modes(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const VectorXd m = synthetic_mode_values(ds.full_grid.coords()(i, 0),
                                                 ds.full_grid.coords()(i, 1));
        for (int k = 0; k < 4; ++k) modes(i, k) = Complex(m[k], 0.0);
    }

    ds.sensor_indices = select_sensors(n, c.sensor_frac, c.seed);
    ds.sensor_set = ds.full_grid.subset(ds.sensor_indices);

    ds.times.resize(static_cast<std::size_t>(c.n_snapshots));
    ds.truth.reserve(static_cast<std::size_t>(c.n_snapshots));
    ds.observations.reserve(static_cast<std::size_t>(c.n_snapshots));
    for (int k = 0; k < c.n_snapshots; ++k) {
        const double t = static_cast<double>(k) * c.dt;
        ds.times[static_cast<std::size_t>(k)] = t;
        VectorXcd coef(4);
        for (int j = 0; j < 4; ++j) coef[j] = b[j] * std::exp(lambdas[j] * t);
        VectorXcd field = modes * coef;
        VectorXcd at_sensors(ds.sensor_set.size());
        for (Eigen::Index i = 0; i < ds.sensor_set.size(); ++i)
            at_sensors[i] = field[ds.sensor_indices[static_cast<std::size_t>(i)]];
        ds.truth.push_back(Field::over(ds.full_grid, std::move(field), t));
        ds.observations.push_back(Field::over(ds.sensor_set, std::move(at_sensors), t));
    }
    add_observation_noise(ds.observations, c.noise_sigma, true, c.seed);

    Spectrum gt;
    gt.lambdas = lambdas;
    gt.mus = (lambdas * c.dt).array().exp().matrix();
    gt.modes = std::move(modes);
    ds.gt_spectrum = std::move(gt);
    ds.gt_amplitudes = b;

    ds.meta = {"synthetic", c.seed, c.noise_sigma, c.sensor_frac};
    ds.validate();
    return ds;
}

}  // namespace snode
