#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "snode/common.hpp"

namespace snode {

/// One spatial coordinate s in the (domain-normalized) domain.
using Coord = VectorXd;

/// Ordered set of spatial coordinates. Row i of coords() is coordinate i and
/// index i of any Field over this set refers to it.
class CoordSet {
public:
    CoordSet() = default;

    explicit CoordSet(MatrixXd coords) : coords_(std::move(coords)) {
        require(coords_.cols() >= 1, "CoordSet: coordinate dimension must be >= 1");
        require(coords_.allFinite(), "CoordSet: all components must be finite");
        require(!has_duplicates(coords_), "CoordSet: duplicate coordinates");
    }

    Eigen::Index size() const { return coords_.rows(); }
    Eigen::Index dim() const { return coords_.cols(); }
    const MatrixXd& coords() const { return coords_; }
    Coord point(Eigen::Index i) const { return coords_.row(i).transpose(); }

    /// Subset by row indices (kept in the given order).
    CoordSet subset(const std::vector<int>& idx) const {
        MatrixXd sub(static_cast<Eigen::Index>(idx.size()), coords_.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            require(idx[i] >= 0 && idx[i] < coords_.rows(), "CoordSet::subset: index out of range");
            sub.row(static_cast<Eigen::Index>(i)) = coords_.row(idx[i]);
        }
        return CoordSet(std::move(sub));
    }

private:
    static bool has_duplicates(const MatrixXd& c) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(c.rows()));
        std::iota(order.begin(), order.end(), 0);
        auto lex_less = [&](Eigen::Index a, Eigen::Index b) {
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                if (c(a, j) < c(b, j)) return true;
                if (c(a, j) > c(b, j)) return false;
            }
            return false;
        };
        std::sort(order.begin(), order.end(), lex_less);
        for (std::size_t i = 1; i < order.size(); ++i) {
            if (c.row(order[i - 1]) == c.row(order[i])) return true;
        }
        return false;
    }

    MatrixXd coords_;
};

/// A complex-valued spatial snapshot over some CoordSet, at one instant.
struct Field {
    VectorXcd values;
    double time = 0.0;

    Field() = default;
    Field(VectorXcd v, double t) : values(std::move(v)), time(t) {}

    /// Construct checked against the owning coordinate set.
    static Field over(const CoordSet& set, VectorXcd v, double t) {
        require(v.size() == set.size(), "Field: value count must equal CoordSet size");
        require(all_finite(MatrixXcd(v)), "Field: values must be finite");
        return Field(std::move(v), t);
    }
};

/// Continuous-time eigenvalues, their discrete-time counterparts, and the
/// matched spatial modes (one column per mode).
struct Spectrum {
    VectorXcd lambdas;  // alpha_i + j beta_i, units 1/time
    VectorXcd mus;      // exp(lambda_i * dt)
    MatrixXcd modes;    // m x r over some CoordSet

    /// mus[i] == exp(lambdas[i] * dt) whenever both are populated from one dt.
    bool consistent(double dt, double tol = 1e-10) const {
        if (lambdas.size() != mus.size()) return false;
        for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
            if (std::abs(mus[i] - std::exp(lambdas[i] * dt)) > tol) return false;
        }
        return true;
    }
};

struct DatasetMeta {
    std::string system;        // generator name
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;  // total complex-noise variance is sigma^2
    double sensor_frac = 1.0;
};

/// Time-indexed sequences of sparse observations plus everything needed to
/// evaluate against the generating system.
struct Dataset {
    CoordSet full_grid;                // evaluation grid S_Omega
    CoordSet sensor_set;               // fixed sparse sensors S (subset of full_grid)
    std::vector<int> sensor_indices;   // sensor_set[i] == full_grid[sensor_indices[i]]
    std::array<int, 2> grid_shape{0, 0};  // rows (y) x cols (x)

    std::vector<Field> observations;   // over sensor_set, times t_0..t_{p-1}
    std::vector<Field> truth;          // optional, over full_grid, same times
    double dt = 0.0;
    std::vector<double> times;

    DatasetMeta meta;
    std::optional<Spectrum> gt_spectrum;   // synthetic only
    VectorXcd gt_amplitudes;               // synthetic only: initial coefficients b

    Eigen::Index n_sensors() const { return sensor_set.size(); }
    Eigen::Index n_grid() const { return full_grid.size(); }
    std::size_t n_snapshots() const { return observations.size(); }
    bool has_truth() const { return !truth.empty(); }

    /// Real-valued benchmark fields are embedded as complex with Im == 0;
    /// the synthetic sequence is genuinely complex.
    bool complex_valued() const { return meta.system == "synthetic"; }

    void validate() const {
        require(!observations.empty(), "Dataset: no observations");
        require(dt > 0.0, "Dataset: dt must be positive");
        require(times.size() == observations.size(), "Dataset: times/observations mismatch");
        for (std::size_t k = 0; k + 1 < times.size(); ++k) {
            const double step = times[k + 1] - times[k];
            require(std::abs(step - dt) <= 1e-9 * std::max(1.0, std::abs(dt)),
                    "Dataset: times must be uniform with spacing dt");
        }
        require(static_cast<Eigen::Index>(sensor_indices.size()) == sensor_set.size(),
                "Dataset: sensor index map size mismatch");
        for (std::size_t i = 0; i < sensor_indices.size(); ++i) {
            require(sensor_indices[i] >= 0 && sensor_indices[i] < full_grid.size(),
                    "Dataset: sensor index out of range");
            require(full_grid.coords().row(sensor_indices[i]) == sensor_set.coords().row(i),
                    "Dataset: sensor_set is not the indexed subset of full_grid");
        }
        for (const auto& f : observations) {
            require(f.values.size() == sensor_set.size(), "Dataset: observation size mismatch");
        }
        if (!truth.empty()) {
            require(truth.size() == observations.size(),
                    "Dataset: truth/observation count mismatch");
            for (const auto& f : truth) {
                require(f.values.size() == full_grid.size(), "Dataset: truth size mismatch");
            }
        }
    }
};

}  // namespace snode
