#pragma once
// Evaluation metrics: pointwise reconstruction error, optimal mode
// matching with cosine similarity, continuous-time eigenvalue recovery
// from latent trajectories, and level-set summaries of mode portraits.

#include <algorithm>
#include <limits>
#include <vector>

#include "snode/types.hpp"

namespace snode {

/// Mean absolute pointwise error: complex modulus for complex-valued
/// observables, |Re - Re| otherwise.
inline double l1_error(const VectorXcd& pred, const VectorXcd& truth, bool complex_valued) {
    require(pred.size() == truth.size() && pred.size() > 0, "l1_error: size mismatch");
    double s = 0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        s += complex_valued ? std::abs(pred[i] - truth[i])
                            : std::abs(pred[i].real() - truth[i].real());
    }
    return s / static_cast<double>(pred.size());
}

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting paths with potentials, O(n^3)). Returns row -> column.
inline std::vector<int> hungarian(const MatrixXd& cost) {
    require(cost.rows() == cost.cols() && cost.rows() >= 1, "hungarian: square matrix required");
    require(cost.allFinite(), "hungarian: costs must be finite");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0)
            row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
    return row_to_col;
}

/// Exhaustive minimum-cost assignment; the independent oracle for the fast
/// solver. Practical only for small n.
inline std::vector<int> assignment_brute_force(const MatrixXd& cost) {
    require(cost.rows() == cost.cols() && cost.rows() >= 1 && cost.rows() <= 9,
            "assignment_brute_force: size out of range");
    const int n = static_cast<int>(cost.rows());
    std::vector<int> perm(static_cast<std::size_t>(n)), best;
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0;
        for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<std::size_t>(i)]);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// |<a, b>| / (||a|| ||b||); phase-invariant by construction, so the
/// optimal per-mode phase correction is already folded in.
inline double mode_cosine(const VectorXcd& a, const VectorXcd& b) {
    require(a.size() == b.size() && a.size() > 0, "mode_cosine: size mismatch");
    const double na = a.norm(), nb = b.norm();
    require(na > 0 && nb > 0, "mode_cosine: zero mode");
    return std::abs(a.dot(b)) / (na * nb);
}

struct ModeMatch {
    std::vector<int> assignment;  // learned column k pairs with truth column assignment[k]
    VectorXd cosines;             // per learned mode, after matching
    double mean_cosine = 0;
};

/// Pairs learned modes with ground-truth modes by maximizing total cosine
/// similarity (Hungarian on 1 - cosine).
inline ModeMatch match_modes(const MatrixXcd& learned, const MatrixXcd& truth) {
    require(learned.rows() == truth.rows() && learned.cols() == truth.cols(),
            "match_modes: shape mismatch");
    const int r = static_cast<int>(learned.cols());
    MatrixXd cost(r, r);
    for (int j = 0; j < r; ++j)
        for (int k = 0; k < r; ++k) cost(j, k) = 1.0 - mode_cosine(learned.col(j), truth.col(k));
    ModeMatch out;
    out.assignment = hungarian(cost);
    out.cosines.resize(r);
    for (int j = 0; j < r; ++j)
        out.cosines[j] = 1.0 - cost(j, out.assignment[static_cast<std::size_t>(j)]);
    out.mean_cosine = out.cosines.mean();
    return out;
}

/// Mean absolute complex eigenvalue error under a fixed pairing.
inline double eigen_abs_error(const VectorXcd& learned, const VectorXcd& truth,
                              const std::vector<int>& assignment) {
    require(learned.size() == truth.size() &&
                static_cast<Eigen::Index>(assignment.size()) == learned.size(),
            "eigen_abs_error: size mismatch");
    double s = 0;
    for (Eigen::Index k = 0; k < learned.size(); ++k)
        s += std::abs(learned[k] - truth[assignment[static_cast<std::size_t>(k)]]);
    return s / static_cast<double>(learned.size());
}

namespace detail {
inline double median_inplace(std::vector<double>& v) {
    require(!v.empty(), "median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// Continuous-time eigenvalues from a latent mean trajectory (one row per
/// mode, one column per time): per step Log(phi_{t+1} / phi_t) / dt with
/// the imaginary branch kept within pi of the previous step's choice, then
/// a componentwise median over steps. Steps whose endpoints fall under the
/// magnitude floor are skipped.
inline VectorXcd eigen_log_ratio(const MatrixXcd& traj, double dt, double floor = 1e-12) {
    require(traj.cols() >= 2, "eigen_log_ratio: need at least two time points");
    require(dt > 0, "eigen_log_ratio: dt must be positive");
    VectorXcd out(traj.rows());
    for (Eigen::Index k = 0; k < traj.rows(); ++k) {
        std::vector<double> res, ims;
        double prev_theta = 0;
        bool have_prev = false;
        for (Eigen::Index t = 0; t + 1 < traj.cols(); ++t) {
            const Complex c0 = traj(k, t), c1 = traj(k, t + 1);
            if (std::abs(c0) < floor || std::abs(c1) < floor) continue;
            const Complex ratio = c1 / c0;
            double theta = std::arg(ratio);
            if (have_prev) {
                while (theta - prev_theta > M_PI) theta -= 2 * M_PI;
                while (prev_theta - theta > M_PI) theta += 2 * M_PI;
            }
            prev_theta = theta;
            have_prev = true;
            res.push_back(std::log(std::abs(ratio)) / dt);
            ims.push_back(theta / dt);
        }
        require(!res.empty(), "eigen_log_ratio: trajectory vanished for a mode");
        out[k] = Complex(detail::median_inplace(res), detail::median_inplace(ims));
    }
    return out;
}

struct PortraitLevels {
    double p30 = 0, p60 = 0, p90 = 0;
    bool degenerate = false;  // spread too small to draw distinct level sets
};

/// Linearly interpolated percentile of an unsorted sample: position
/// q/100 * (N-1) between the order statistics.
inline double percentile_linear(std::vector<double> v, double q) {
    require(!v.empty(), "percentile_linear: empty sample");
    require(q >= 0 && q <= 100, "percentile_linear: percentile out of range");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

/// 30/60/90 percentile levels of a mode magnitude portrait; degenerate
/// when the spread is too small for meaningful contours.
inline PortraitLevels portrait_levels(const VectorXd& vals) {
    require(vals.size() > 0, "portrait_levels: empty sample");
    std::vector<double> v(vals.data(), vals.data() + vals.size());
    PortraitLevels out;
    out.p30 = percentile_linear(v, 30);
    out.p60 = percentile_linear(v, 60);
    out.p90 = percentile_linear(v, 90);
    out.degenerate = (out.p90 - out.p30) <= 1e-9 * std::max(std::abs(out.p90), 1e-12);
    return out;
}

}  // namespace snode
