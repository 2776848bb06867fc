#pragma once
// Exact dynamic mode decomposition: the classical linear baseline the
// learned model is measured against. Works directly on complex snapshot
// matrices; real-valued data embeds with zero imaginary part.

#include <iostream>

#include "snode/linalg.hpp"
#include "snode/types.hpp"

namespace snode {

struct DmdResult {
    Spectrum spectrum;     // unit-norm mode columns, mus, lambdas = Log(mu)/dt
    VectorXcd amplitudes;  // least-squares fit of the first snapshot
    double residual = 0;   // ||Y' - A Y||_F / ||Y'||_F
    int effective_rank = 0;
};

/// Exact DMD with SVD truncation at the requested rank. Singular values
/// below 1e-12 of the largest are dropped (with a warning) before the rank
/// cap applies. Eigenpairs come back sorted by |mu| descending; magnitudes
/// within 1e-9 (relative) count as tied and are ordered by ascending
/// argument.
inline DmdResult exact_dmd(const MatrixXcd& snapshots, double dt, int rank) {
    require(snapshots.cols() >= 2, "exact_dmd: need at least two snapshots");
    require(dt > 0, "exact_dmd: dt must be positive");
    require(rank >= 1, "exact_dmd: rank must be positive");

    const Eigen::Index T = snapshots.cols();
    const MatrixXcd Y = snapshots.leftCols(T - 1);
    const MatrixXcd Yp = snapshots.rightCols(T - 1);

    const SvdResult svd = complex_svd(Y);
    int r = 0;
    const double floor_sv = 1e-12 * svd.sigma[0];
    while (r < svd.sigma.size() && svd.sigma[r] > floor_sv) ++r;
    require(r >= 1, "exact_dmd: snapshot matrix is numerically zero");
    if (r < rank)
        std::cerr << "exact_dmd: warning: rank reduced from " << rank << " to " << r
                  << " (singular values below threshold)\n";
    r = std::min(r, rank);

    const MatrixXcd U = svd.U.leftCols(r);
    const MatrixXcd V = svd.V.leftCols(r);
    const VectorXd sig = svd.sigma.head(r);
    const MatrixXcd VSinv = V * sig.cwiseInverse().asDiagonal();
    const MatrixXcd Atilde = U.adjoint() * Yp * VSinv;

    Eigen::ComplexEigenSolver<MatrixXcd> eig(Atilde);
    require(eig.info() == Eigen::Success, "exact_dmd: eigendecomposition failed");

    // Deterministic ordering: |mu| descending, then arg(mu) ascending.
    // Recovered magnitudes of analytically tied eigenvalues differ in the
    // last ulps, so after the exact sort re-sort each run of near-equal
    // magnitudes by argument (grouping keeps the comparator transitive).
    std::vector<int> order(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) order[static_cast<std::size_t>(i)] = i;
    const VectorXcd mu_raw = eig.eigenvalues();
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = std::abs(mu_raw[a]), mb = std::abs(mu_raw[b]);
        if (ma != mb) return ma > mb;
        return std::arg(mu_raw[a]) < std::arg(mu_raw[b]);
    });
    for (std::size_t lo = 0; lo < order.size();) {
        std::size_t hi = lo + 1;
        while (hi < order.size()) {
            const double prev = std::abs(mu_raw[order[hi - 1]]);
            const double cur = std::abs(mu_raw[order[hi]]);
            if (prev - cur > 1e-9 * std::max(1.0, prev)) break;
            ++hi;
        }
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(lo),
                  order.begin() + static_cast<std::ptrdiff_t>(hi),
                  [&](int a, int b) { return std::arg(mu_raw[a]) < std::arg(mu_raw[b]); });
        lo = hi;
    }

    const MatrixXcd modes_raw = Yp * (VSinv * eig.eigenvectors());
    DmdResult out;
    out.effective_rank = r;
    out.spectrum.mus.resize(r);
    out.spectrum.lambdas.resize(r);
    out.spectrum.modes.resize(snapshots.rows(), r);
    for (int i = 0; i < r; ++i) {
        const int j = order[static_cast<std::size_t>(i)];
        out.spectrum.mus[i] = mu_raw[j];
        out.spectrum.lambdas[i] = std::log(mu_raw[j]) / dt;
        const double nrm = modes_raw.col(j).norm();
        require(nrm > 0, "exact_dmd: zero mode column");
        out.spectrum.modes.col(i) = modes_raw.col(j) / nrm;
    }

    // Amplitudes from the first snapshot, then the one-step residual of the
    // implied full operator A = U Atilde U^H.
    out.amplitudes =
        out.spectrum.modes.colPivHouseholderQr().solve(snapshots.col(0).eval());
    const MatrixXcd AY = U * (Atilde * (U.adjoint() * Y));
    out.residual = (Yp - AY).norm() / Yp.norm();
    return out;
}

/// Snapshot matrix (one column per time) from a field sequence.
inline MatrixXcd snapshot_matrix(const std::vector<Field>& fields) {
    require(!fields.empty(), "snapshot_matrix: empty sequence");
    MatrixXcd out(fields[0].values.size(), static_cast<Eigen::Index>(fields.size()));
    for (std::size_t k = 0; k < fields.size(); ++k) {
        require(fields[k].values.size() == out.rows(), "snapshot_matrix: ragged sequence");
        out.col(static_cast<Eigen::Index>(k)) = fields[k].values;
    }
    return out;
}

/// One-step linear predictions: column k is A y_k for k = 0..T-2, where A
/// is the truncated DMD operator in its mode basis. Used to score the
/// baseline pointwise against held-out targets.
inline MatrixXcd dmd_one_step(const DmdResult& d, const MatrixXcd& snapshots) {
    require(snapshots.cols() >= 1, "dmd_one_step: empty input");
    // Project each snapshot onto the modes, advance by mu, decode.
    const MatrixXcd coef = d.spectrum.modes.colPivHouseholderQr().solve(snapshots);
    return d.spectrum.modes * (d.spectrum.mus.asDiagonal() * coef);
}

}  // namespace snode
