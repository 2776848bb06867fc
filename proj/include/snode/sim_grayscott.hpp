#pragma once
// Gray-Scott reaction-diffusion benchmark: two species on a periodic grid,
// explicit finite differences with nearest-neighbor wrap. The species v is
// the observable. The feed rate carries a small frozen spatial perturbation
// drawn at initialization to break the symmetry of the wave-modulated
// initial condition.

#include <vector>

#include "snode/subsample.hpp"

namespace snode {

struct GrayScottConfig {
    int n = 100;            // grid side
    int n_snapshots = 100;  // including the initial condition
    double dt = 1.0;        // snapshot spacing
    double dx = 0.01;       // physical step used by the Laplacian
    double Du = 2e-4, Dv = 1e-5;
    double F = 0.035, kill = 0.065;
    double f_perturb_sigma = 1e-3;
    double max_step = 0.125;  // explicit diffusion stability ceiling dx^2 / (4 Du)
    double sensor_frac = 0.1;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
};

namespace detail {

/// Five-point periodic Laplacian, spacing dx.
inline MatrixXd periodic_laplacian(const MatrixXd& u, double dx) {
    const Eigen::Index n = u.rows();
    MatrixXd out(n, n);
    const double inv = 1.0 / (dx * dx);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index im = (i + n - 1) % n, ip = (i + 1) % n;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index jm = (j + n - 1) % n, jp = (j + 1) % n;
            out(i, j) = (u(im, j) + u(ip, j) + u(i, jm) + u(i, jp) - 4.0 * u(i, j)) * inv;
        }
    }
    return out;
}

}  // namespace detail

/// Simulates the coupled system
///   du/dt = Du lap(u) - u v^2 + F (1 - u)
///   dv/dt = Dv lap(v) + u v^2 - (F + kill) v
/// on an n x n periodic grid reported in normalized [-1,1]^2 coordinates.
/// Snapshots land every cfg.dt; internally each snapshot interval is cut
/// into equal explicit steps no longer than cfg.max_step.
inline Dataset simulate_grayscott(const GrayScottConfig& c) {
    require(c.n >= 8, "simulate_grayscott: grid too small");
    require(c.n_snapshots >= 2 && c.dt > 0 && c.dx > 0, "simulate_grayscott: bad configuration");
    require(c.max_step > 0, "simulate_grayscott: bad step ceiling");

    const int n = c.n;
    Dataset ds;
    ds.full_grid = uniform_grid(n, n);
    ds.grid_shape = {n, n};
    ds.dt = c.dt;

    // State on the grid layout of uniform_grid: matrix row = y index.
    MatrixXd u(n, n), v(n, n), F_field(n, n);
    {
        rng::Stream init(c.seed, rng::sites::kSimInit);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) F_field(iy, ix) = c.F + c.f_perturb_sigma * init.normal();
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const double x = ds.full_grid.coords()(static_cast<Eigen::Index>(iy) * n + ix, 0);
                const double y = ds.full_grid.coords()(static_cast<Eigen::Index>(iy) * n + ix, 1);
                u(iy, ix) = 0.9 + 0.1 * std::sin(4 * M_PI * x) * std::cos(2 * M_PI * y);
                v(iy, ix) = 0.1 + 0.05 * std::sin(M_PI * x);
            }
        }
    }

    const int substeps = std::max(1, static_cast<int>(std::ceil(c.dt / c.max_step)));
    const double h = c.dt / substeps;

    ds.sensor_indices = select_sensors(ds.full_grid.size(), c.sensor_frac, c.seed);
    ds.sensor_set = ds.full_grid.subset(ds.sensor_indices);

    const auto snapshot = [&](int k) {
        const double t = static_cast<double>(k) * c.dt;
        VectorXcd field(static_cast<Eigen::Index>(n) * n);
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                field[static_cast<Eigen::Index>(iy) * n + ix] = Complex(v(iy, ix), 0.0);
        VectorXcd at_sensors(ds.sensor_set.size());
        for (Eigen::Index i = 0; i < ds.sensor_set.size(); ++i)
            at_sensors[i] = field[ds.sensor_indices[static_cast<std::size_t>(i)]];
        ds.times.push_back(t);
        ds.truth.push_back(Field::over(ds.full_grid, std::move(field), t));
        ds.observations.push_back(Field::over(ds.sensor_set, std::move(at_sensors), t));
    };

    snapshot(0);
    for (int k = 1; k < c.n_snapshots; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const MatrixXd lu = detail::periodic_laplacian(u, c.dx);
            const MatrixXd lv = detail::periodic_laplacian(v, c.dx);
            const MatrixXd uvv = u.cwiseProduct(v.cwiseProduct(v));
            const MatrixXd du =
                c.Du * lu - uvv + F_field.cwiseProduct(MatrixXd::Ones(n, n) - u);
            const MatrixXd dv =
                c.Dv * lv + uvv - (F_field.array() + c.kill).matrix().cwiseProduct(v);
            u += h * du;
            v += h * dv;
        }
        require(u.allFinite() && v.allFinite(), "simulate_grayscott: state diverged");
        snapshot(k);
    }
    add_observation_noise(ds.observations, c.noise_sigma, false, c.seed);

    ds.meta = {"grayscott", c.seed, c.noise_sigma, c.sensor_frac};
    ds.validate();
    return ds;
}

}  // namespace snode
