#pragma once
// Velocity recovery from vorticity snapshots and passive tracer advection,
// used to turn reconstructed fields into trajectory ensembles.

#include <vector>

#include "snode/spectral.hpp"
#include "snode/types.hpp"

namespace snode {

/// Incompressible velocity on an n x n periodic grid, row-major with the
/// row index along y, defined on [0, domain)^2.
struct VelocityField {
    int n = 0;
    VectorXd ux, uy;
    double domain = 2 * M_PI;
};

/// Solves the periodic Poisson problem for the streamfunction spectrally
/// (psi_hat = w_hat / |k|^2, zero mean) and differentiates: u = d psi / dy,
/// v = -d psi / dx. Only the real part of the input field is used.
inline VelocityField velocity_from_vorticity(const VectorXcd& vorticity, int n,
                                             double domain = 2 * M_PI) {
    require(n >= 2 && vorticity.size() == static_cast<Eigen::Index>(n) * n,
            "velocity_from_vorticity: field must be n*n");
    require(domain > 0, "velocity_from_vorticity: domain must be positive");
    detail::SpectralGrid g(n);
    std::vector<Complex> w(g.sz());
    for (std::size_t p = 0; p < w.size(); ++p)
        w[p] = Complex(vorticity[static_cast<Eigen::Index>(p)].real(), 0.0);
    std::vector<Complex> w_hat = g.fft(w);
    const double k_unit = 2 * M_PI / domain;  // physical wavenumber per integer mode
    std::vector<Complex> ux_hat = w_hat, uy_hat = w_hat;
    const Complex I(0, 1);
    for (int iy = 0; iy < n; ++iy) {
        const double ky = k_unit * g.wavenumber(iy);
        for (int ix = 0; ix < n; ++ix) {
            const double kx = k_unit * g.wavenumber(ix);
            const double k2 = kx * kx + ky * ky;
            const std::size_t p = static_cast<std::size_t>(iy) * n + ix;
            const Complex psi = k2 > 0 ? w_hat[p] / k2 : Complex(0, 0);
            ux_hat[p] = I * ky * psi;
            uy_hat[p] = -I * kx * psi;
        }
    }
    const auto uxp = g.ifft(ux_hat), uyp = g.ifft(uy_hat);
    VelocityField out;
    out.n = n;
    out.domain = domain;
    out.ux.resize(vorticity.size());
    out.uy.resize(vorticity.size());
    for (std::size_t p = 0; p < g.sz(); ++p) {
        out.ux[static_cast<Eigen::Index>(p)] = uxp[p].real();
        out.uy[static_cast<Eigen::Index>(p)] = uyp[p].real();
    }
    return out;
}

/// Bilinear sample of a periodic row-major field at physical (x, y).
inline double sample_periodic(const VectorXd& f, int n, double domain, double x, double y) {
    require(f.size() == static_cast<Eigen::Index>(n) * n, "sample_periodic: field must be n*n");
    const double h = domain / n;
    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    const double gx = x / h, gy = y / h;
    const int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy));
    const double fx = gx - std::floor(gx), fy = gy - std::floor(gy);
    const int x0 = wrap(ix), x1 = wrap(ix + 1), y0 = wrap(iy), y1 = wrap(iy + 1);
    auto at = [&](int yy, int xx) { return f[static_cast<Eigen::Index>(yy) * n + xx]; };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline Eigen::Vector2d velocity_at(const VelocityField& v, const Eigen::Vector2d& pos) {
    return {sample_periodic(v.ux, v.n, v.domain, pos.x(), pos.y()),
            sample_periodic(v.uy, v.n, v.domain, pos.x(), pos.y())};
}

/// One RK4 tracer step in a frozen velocity field.
inline Eigen::Vector2d advect_rk4(const VelocityField& v, const Eigen::Vector2d& pos, double dt) {
    const Eigen::Vector2d k1 = velocity_at(v, pos);
    const Eigen::Vector2d k2 = velocity_at(v, pos + 0.5 * dt * k1);
    const Eigen::Vector2d k3 = velocity_at(v, pos + 0.5 * dt * k2);
    const Eigen::Vector2d k4 = velocity_at(v, pos + dt * k3);
    return pos + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// Advects a tracer through a snapshot sequence, holding each field frozen
/// for dt_per_field split into RK4 substeps. Positions are left unwrapped
/// so endpoint distances measure true displacement divergence.
inline Eigen::Vector2d advect_through(const std::vector<VelocityField>& fields,
                                      Eigen::Vector2d pos, double dt_per_field,
                                      int substeps = 4) {
    require(!fields.empty(), "advect_through: no fields");
    require(dt_per_field > 0 && substeps >= 1, "advect_through: bad step configuration");
    const double h = dt_per_field / substeps;
    for (const VelocityField& f : fields)
        for (int s = 0; s < substeps; ++s) pos = advect_rk4(f, pos, h);
    return pos;
}

/// Mean pairwise Euclidean distance between endpoints; zero for fewer
/// than two points.
inline double mean_pairwise_distance(const std::vector<Eigen::Vector2d>& pts) {
    if (pts.size() < 2) return 0.0;
    double s = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            s += (pts[i] - pts[j]).norm();
            ++cnt;
        }
    return s / static_cast<double>(cnt);
}

}  // namespace snode
