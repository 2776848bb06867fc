#pragma once
// 2D incompressible Navier-Stokes in vorticity-streamfunction form on a
// periodic square, pseudo-spectral: RK4 on the 2/3-dealiased advection
// term, Crank-Nicolson on diffusion. The physical domain is [0, 2pi)^2;
// coordinates are reported normalized to [-1, 1). The initial condition is
// a band-filtered random field peaked at a chosen wavenumber, normalized
// to zero mean and unit maximum amplitude, and depends only on the seed
// (not on viscosity), so ensembles over nu share the exact same start.

#include <functional>
#include <iostream>
#include <vector>

#include "snode/spectral.hpp"
#include "snode/subsample.hpp"

namespace snode {

struct VorticityConfig {
    int n = 128;            // simulation grid side
    int n_snapshots = 100;  // including the initial condition
    double dt = 1e-3;       // integrator step
    int save_every = 100;   // steps between snapshots (data spacing dt * save_every)
    double nu = 1e-3;
    double init_peak_k = 2.0;
    double init_band_width = 1.0;
    double sensor_frac = 0.1;
    double noise_sigma = 0.0;
    int observe_stride = 1;  // dataset grid = every observe_stride-th line
    std::uint64_t seed = 1;
    /// Optional initial vorticity omega(x, y) on [0, 2pi)^2; when unset a
    /// band-filtered random field is drawn from the seed.
    std::function<double(double, double)> initial_vorticity;
};

namespace detail {

/// -(u . grad) omega in spectral space, 2/3 dealiased.
inline std::vector<Complex> vorticity_advection(SpectralGrid& g,
                                                const std::vector<Complex>& w_hat) {
    const int n = g.n();
    std::vector<Complex> psi = w_hat, ux = w_hat, uy = w_hat, wx = w_hat, wy = w_hat;
    g.for_modes(psi, [](double kx, double ky, Complex& v) {
        const double k2 = kx * kx + ky * ky;
        v = k2 > 0 ? v / k2 : Complex(0, 0);
    });
    const Complex I(0, 1);
    for (int iy = 0; iy < n; ++iy) {
        const double ky = g.wavenumber(iy);
        for (int ix = 0; ix < n; ++ix) {
            const double kx = g.wavenumber(ix);
            const std::size_t p = static_cast<std::size_t>(iy) * n + ix;
            ux[p] = I * ky * psi[p];
            uy[p] = -I * kx * psi[p];
            wx[p] = I * kx * w_hat[p];
            wy[p] = I * ky * w_hat[p];
        }
    }
    const auto uxp = g.ifft(ux), uyp = g.ifft(uy), wxp = g.ifft(wx), wyp = g.ifft(wy);
    std::vector<Complex> nl(g.sz());
    for (std::size_t p = 0; p < nl.size(); ++p)
        nl[p] = Complex(-(uxp[p].real() * wxp[p].real() + uyp[p].real() * wyp[p].real()), 0.0);
    std::vector<Complex> nl_hat = g.fft(nl);
    const double cut = static_cast<double>(n) / 3.0;
    g.for_modes(nl_hat, [cut](double kx, double ky, Complex& v) {
        if (std::abs(kx) > cut || std::abs(ky) > cut) v = Complex(0, 0);
    });
    return nl_hat;
}

/// Band-filtered random initial vorticity, zero mean, max |omega| = 1.
inline std::vector<Complex> vorticity_initial_spectral(SpectralGrid& g, double peak_k,
                                                       double band_width, std::uint64_t seed) {
    rng::Stream s(seed, rng::sites::kSimInit);
    std::vector<Complex> noise(g.sz());
    for (Complex& c : noise) c = Complex(s.normal(), 0.0);
    std::vector<Complex> hat = g.fft(noise);
    g.for_modes(hat, [peak_k, band_width](double kx, double ky, Complex& v) {
        const double k = std::sqrt(kx * kx + ky * ky);
        const double d = (k - peak_k) / band_width;
        v *= std::exp(-0.5 * d * d);
        if (k == 0.0) v = Complex(0, 0);
    });
    std::vector<Complex> phys = g.ifft(hat);
    double peak = 0.0;
    for (Complex& c : phys) {
        c = Complex(c.real(), 0.0);
        peak = std::max(peak, std::abs(c.real()));
    }
    require(peak > 0, "vorticity_initial_spectral: degenerate initial field");
    for (Complex& c : phys) c /= peak;
    return g.fft(phys);
}

}  // namespace detail

inline Dataset simulate_vorticity(const VorticityConfig& c) {
    require(c.n >= 16 && c.n % 2 == 0, "simulate_vorticity: grid side must be even and >= 16");
    require(c.n_snapshots >= 2 && c.dt > 0 && c.save_every >= 1 && c.nu > 0,
            "simulate_vorticity: bad configuration");
    require(c.observe_stride >= 1 && c.n % c.observe_stride == 0,
            "simulate_vorticity: observe_stride must divide the grid side");

    const int n = c.n;
    const int n_obs = n / c.observe_stride;
    detail::SpectralGrid g(n);
    std::vector<Complex> w_hat;
    if (c.initial_vorticity) {
        std::vector<Complex> phys(g.sz());
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                phys[static_cast<std::size_t>(iy) * n + ix] =
                    Complex(c.initial_vorticity(2.0 * M_PI * ix / n, 2.0 * M_PI * iy / n), 0.0);
        w_hat = g.fft(phys);
    } else {
        w_hat = detail::vorticity_initial_spectral(g, c.init_peak_k, c.init_band_width, c.seed);
    }

    Dataset ds;
    ds.full_grid = periodic_grid(n_obs);
    ds.grid_shape = {n_obs, n_obs};
    const double dt_data = c.dt * c.save_every;
    ds.dt = dt_data;
    ds.sensor_indices = select_sensors(ds.full_grid.size(), c.sensor_frac, c.seed);
    ds.sensor_set = ds.full_grid.subset(ds.sensor_indices);

    // One-shot CFL advisory at the initial state.
    {
        std::vector<Complex> psi = w_hat;
        g.for_modes(psi, [](double kx, double ky, Complex& v) {
            const double k2 = kx * kx + ky * ky;
            v = k2 > 0 ? v / k2 : Complex(0, 0);
        });
        double umax = 0.0;
        std::vector<Complex> ux = psi, uy = psi;
        const Complex I(0, 1);
        g.for_modes(ux, [I](double, double ky, Complex& v) { v = I * ky * v; });
        g.for_modes(uy, [I](double kx, double, Complex& v) { v = -I * kx * v; });
        for (const Complex& v : g.ifft(ux)) umax = std::max(umax, std::abs(v.real()));
        for (const Complex& v : g.ifft(uy)) umax = std::max(umax, std::abs(v.real()));
        const double dx = 2.0 * M_PI / n;
        if (umax * c.dt / dx > 1.0)
            std::cerr << "simulate_vorticity: warning: CFL number " << umax * c.dt / dx
                      << " exceeds 1; reduce dt or resolution\n";
    }

    const auto snapshot = [&](int k) {
        const double t = static_cast<double>(k) * dt_data;
        const std::vector<Complex> phys = g.ifft(w_hat);
        VectorXcd field(ds.full_grid.size());
        for (int iy = 0; iy < n_obs; ++iy)
            for (int ix = 0; ix < n_obs; ++ix) {
                const std::size_t src = static_cast<std::size_t>(iy) * c.observe_stride * n +
                                        static_cast<std::size_t>(ix) * c.observe_stride;
                field[static_cast<Eigen::Index>(iy) * n_obs + ix] =
                    Complex(phys[src].real(), 0.0);
            }
        VectorXcd at_sensors(ds.sensor_set.size());
        for (Eigen::Index i = 0; i < ds.sensor_set.size(); ++i)
            at_sensors[i] = field[ds.sensor_indices[static_cast<std::size_t>(i)]];
        ds.times.push_back(t);
        ds.truth.push_back(Field::over(ds.full_grid, std::move(field), t));
        ds.observations.push_back(Field::over(ds.sensor_set, std::move(at_sensors), t));
    };

    snapshot(0);
    for (int k = 1; k < c.n_snapshots; ++k) {
        for (int s = 0; s < c.save_every; ++s) {
            // RK4 on advection, then an exact Crank-Nicolson diffusion step.
            const auto k1 = detail::vorticity_advection(g, w_hat);
            std::vector<Complex> tmp(w_hat.size());
            for (std::size_t p = 0; p < tmp.size(); ++p) tmp[p] = w_hat[p] + 0.5 * c.dt * k1[p];
            const auto k2 = detail::vorticity_advection(g, tmp);
            for (std::size_t p = 0; p < tmp.size(); ++p) tmp[p] = w_hat[p] + 0.5 * c.dt * k2[p];
            const auto k3 = detail::vorticity_advection(g, tmp);
            for (std::size_t p = 0; p < tmp.size(); ++p) tmp[p] = w_hat[p] + c.dt * k3[p];
            const auto k4 = detail::vorticity_advection(g, tmp);
            for (std::size_t p = 0; p < w_hat.size(); ++p)
                w_hat[p] += c.dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
            g.for_modes(w_hat, [&c](double kx, double ky, Complex& v) {
                const double k2v = kx * kx + ky * ky;
                v *= (1.0 - 0.5 * c.nu * k2v * c.dt) / (1.0 + 0.5 * c.nu * k2v * c.dt);
            });
        }
        snapshot(k);
    }
    add_observation_noise(ds.observations, c.noise_sigma, false, c.seed);

    ds.meta = {"vorticity", c.seed, c.noise_sigma, c.sensor_frac};
    ds.validate();
    return ds;
}

}  // namespace snode
