#pragma once
// Shared pieces of the benchmark generators: grid construction, sparse
// sensor selection, and observation-noise corruption. Everything here is a
// pure function of its seed.

#include <algorithm>
#include <vector>

#include "snode/rng.hpp"
#include "snode/types.hpp"

namespace snode {

/// n evenly spaced values from lo to hi, endpoints included.
inline VectorXd linspace(double lo, double hi, int n) {
    require(n >= 2, "linspace: need at least two points");
    VectorXd out(n);
    for (int i = 0; i < n; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

/// Row-major nx x ny grid with endpoints included: point (iy, ix) lands in
/// row iy * nx + ix with coordinates (x_ix, y_iy).
inline CoordSet uniform_grid(int nx, int ny, double lo = -1.0, double hi = 1.0) {
    const VectorXd xs = linspace(lo, hi, nx), ys = linspace(lo, hi, ny);
    MatrixXd coords(static_cast<Eigen::Index>(nx) * ny, 2);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            coords(static_cast<Eigen::Index>(iy) * nx + ix, 0) = xs[ix];
            coords(static_cast<Eigen::Index>(iy) * nx + ix, 1) = ys[iy];
        }
    return CoordSet(std::move(coords));
}

/// Same layout for a periodic domain: n cells from lo to hi with the right
/// endpoint excluded (it aliases the left one).
inline CoordSet periodic_grid(int n, double lo = -1.0, double hi = 1.0) {
    require(n >= 2, "periodic_grid: need at least two cells");
    MatrixXd coords(static_cast<Eigen::Index>(n) * n, 2);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const Eigen::Index row = static_cast<Eigen::Index>(iy) * n + ix;
            coords(row, 0) = lo + (hi - lo) * static_cast<double>(ix) / n;
            coords(row, 1) = lo + (hi - lo) * static_cast<double>(iy) / n;
        }
    return CoordSet(std::move(coords));
}

/// floor(frac * n) distinct indices drawn without replacement, keyed by the
/// seed, returned sorted ascending. The set is time-invariant by design:
/// callers reuse it for every snapshot.
inline std::vector<int> select_sensors(Eigen::Index n, double frac, std::uint64_t seed) {
    require(n >= 1, "select_sensors: empty point set");
    require(frac > 0.0 && frac <= 1.0, "select_sensors: fraction must be in (0, 1]");
    const auto k = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
    require(k >= 1, "select_sensors: fraction selects no points");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    rng::Stream s(seed, rng::sites::kSensors);
    s.shuffle(idx);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Corrupts observations in place. Complex-valued fields get circularly
/// symmetric complex noise of total variance sigma^2 (each quadrature gets
/// sigma^2 / 2); real-valued fields get N(0, sigma^2) on the real part.
/// One keyed stream drives all snapshots in order.
inline void add_observation_noise(std::vector<Field>& obs, double sigma, bool complex_valued,
                                  std::uint64_t seed) {
    require(sigma >= 0.0, "add_observation_noise: sigma must be non-negative");
    if (sigma == 0.0) return;
    rng::Stream s(seed, rng::sites::kNoise);
    const double half = sigma * M_SQRT1_2;
    for (Field& f : obs) {
        for (Eigen::Index i = 0; i < f.values.size(); ++i) {
            if (complex_valued) {
                f.values[i] += Complex(half * s.normal(), half * s.normal());
            } else {
                f.values[i] += Complex(sigma * s.normal(), 0.0);
            }
        }
    }
}

}  // namespace snode
