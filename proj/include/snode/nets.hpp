#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "snode/params.hpp"
#include "snode/posenc.hpp"
#include "snode/rng.hpp"
#include "snode/tape.hpp"
#include "snode/types.hpp"

namespace snode {

/// Architecture and initialization knobs for the three networks plus the
/// global eigenvalue/noise parameters. Widths are configurable so tiny
/// instances stay cheap enough for exhaustive finite-difference checks.
struct ModelConfig {
    int r = 4;           // latent complex modes
    int coord_dim = 2;   // spatial dimension d
    int posenc_L = 6;    // Fourier feature octaves
    int mode_width = 128;
    int mode_hidden = 4;  // hidden tanh layers in the mode network
    int enc_width = 64;   // per-sensor layers (two of them)
    int drift_width = 64; // drift hidden layers (two of them)
    double logvar_min = -12.0;
    double logvar_max = 4.0;
    double init_log_tau = -3.0;
    double init_log_sigma_obs = -4.0;
    double init_alpha_lo = -0.1, init_alpha_hi = 0.0;
    double init_omega_lo = 0.0, init_omega_hi = 5.0;

    int posenc_dim() const { return (2 * posenc_L + 1) * coord_dim; }
    int enc_in() const { return 2 + posenc_dim(); }  // (Re y, Im y, gamma(s))
    int drift_in() const { return 2 * r + 1; }       // (phi lift, t)

    void validate() const {
        require(r >= 1 && coord_dim >= 1 && posenc_L >= 1, "ModelConfig: bad dimensions");
        require(mode_width >= 1 && mode_hidden >= 1 && enc_width >= 1 && drift_width >= 1,
                "ModelConfig: widths must be positive");
        require(logvar_min < logvar_max, "ModelConfig: logvar bounds inverted");
    }
};

namespace detail {

inline std::string layer_name(const std::string& net, const char* kind, int i) {
    return net + "." + kind + std::to_string(i);
}

inline void glorot_fill(Eigen::Map<MatrixXd> m, rng::Stream& s) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = s.uniform(-a, a);
}

}  // namespace detail

/// Registers every learnable segment in a fixed order and initializes it from
/// keyed streams, so the full parameter vector is a pure function of
/// (config, seed). The drift output layer starts at exactly zero: the latent
/// dynamics begin as the purely linear eigenvalue flow.
inline ParamStore make_model_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore p;
    const int lift = 2 * cfg.r;

    // Mode network: posenc -> mode_width x mode_hidden (tanh) -> lift.
    p.add("mode.W0", cfg.mode_width, cfg.posenc_dim());
    p.add("mode.b0", cfg.mode_width, 1);
    for (int i = 1; i < cfg.mode_hidden; ++i) {
        p.add(detail::layer_name("mode", "W", i), cfg.mode_width, cfg.mode_width);
        p.add(detail::layer_name("mode", "b", i), cfg.mode_width, 1);
    }
    p.add(detail::layer_name("mode", "W", cfg.mode_hidden), lift, cfg.mode_width);
    p.add(detail::layer_name("mode", "b", cfg.mode_hidden), lift, 1);

    // Encoder: per-sensor MLP, mean pooling, two heads.
    p.add("enc.W0", cfg.enc_width, cfg.enc_in());
    p.add("enc.b0", cfg.enc_width, 1);
    p.add("enc.W1", cfg.enc_width, cfg.enc_width);
    p.add("enc.b1", cfg.enc_width, 1);
    p.add("enc.Wmu", lift, cfg.enc_width);
    p.add("enc.bmu", lift, 1);
    p.add("enc.Wlv", lift, cfg.enc_width);
    p.add("enc.blv", lift, 1);

    // Drift correction network on (phi lift, t).
    p.add("drift.W0", cfg.drift_width, cfg.drift_in());
    p.add("drift.b0", cfg.drift_width, 1);
    p.add("drift.W1", cfg.drift_width, cfg.drift_width);
    p.add("drift.b1", cfg.drift_width, 1);
    p.add("drift.W2", lift, cfg.drift_width);
    p.add("drift.b2", lift, 1);

    // Diagonal spectral generator and global noise scales.
    p.add("eig.alpha", cfg.r, 1);
    p.add("eig.omega", cfg.r, 1);
    p.add("log_tau", 1, 1);
    p.add("log_sigma_obs", 1, 1);

    for (int i = 0; i < p.n_segments(); ++i) {
        const ParamStore::Segment& seg = p.segment(i);
        rng::Stream s(seed, rng::sites::kInit, static_cast<std::uint64_t>(i));
        const bool is_weight = seg.name.find(".W") != std::string::npos;
        if (seg.name == "drift.W2" || seg.name == "drift.b2") {
            continue;  // zero
        } else if (seg.name == "eig.alpha") {
            auto m = p.matrix(seg.name);
            for (int k = 0; k < cfg.r; ++k) m(k, 0) = s.uniform(cfg.init_alpha_lo, cfg.init_alpha_hi);
        } else if (seg.name == "eig.omega") {
            auto m = p.matrix(seg.name);
            for (int k = 0; k < cfg.r; ++k) m(k, 0) = s.uniform(cfg.init_omega_lo, cfg.init_omega_hi);
        } else if (seg.name == "log_tau") {
            p.set_scalar(seg.name, cfg.init_log_tau);
        } else if (seg.name == "log_sigma_obs") {
            p.set_scalar(seg.name, cfg.init_log_sigma_obs);
        } else if (is_weight) {
            detail::glorot_fill(p.matrix(seg.name), s);
        }  // biases stay zero
    }
    return p;
}

/// Resolves segment names to tape leaf ids (leaves created in segment order).
class LeafMap {
public:
    LeafMap(const ParamStore& p, const std::vector<int>& leaves) : p_(&p), leaves_(&leaves) {
        require(static_cast<int>(leaves.size()) == p.n_segments(),
                "LeafMap: one leaf per segment required");
    }
    int operator[](const std::string& name) const { return (*leaves_)[p_->index_of(name)]; }

private:
    const ParamStore* p_;
    const std::vector<int>* leaves_;
};

// ---- eigenvalue parameters ----

inline VectorXcd lambda_complex(const ParamStore& p) {
    const auto a = p.matrix("eig.alpha"), w = p.matrix("eig.omega");
    VectorXcd out(a.rows());
    for (Eigen::Index k = 0; k < a.rows(); ++k) out[k] = Complex(a(k, 0), w(k, 0));
    return out;
}

/// Real lift of diag(alpha + i omega): 2x2 blocks [[a, -w], [w, a]].
inline MatrixXd lambda_lift(const ParamStore& p) {
    const auto a = p.matrix("eig.alpha"), w = p.matrix("eig.omega");
    const Eigen::Index r = a.rows();
    MatrixXd out = MatrixXd::Zero(2 * r, 2 * r);
    for (Eigen::Index k = 0; k < r; ++k) {
        out(2 * k, 2 * k) = a(k, 0);
        out(2 * k + 1, 2 * k + 1) = a(k, 0);
        out(2 * k + 1, 2 * k) = w(k, 0);
        out(2 * k, 2 * k + 1) = -w(k, 0);
    }
    return out;
}

// ---- mode network ----
//
// The mode network is always evaluated one point at a time, as a chain of
// gemv products, in both the value and tape paths. A point's output therefore
// never depends on which other points are evaluated alongside it, which is
// what makes grid-free reconstruction exact rather than approximate.

/// Lift-valued mode row at one point: (Re W_1, Im W_1, ..., Re W_r, Im W_r).
inline VectorXd mode_point_lift(const ParamStore& p, const ModelConfig& cfg,
                                const VectorXd& coord) {
    MatrixXd h = posenc(coord, cfg.posenc_L);
    for (int i = 0; i < cfg.mode_hidden; ++i) {
        MatrixXd z = p.matrix(detail::layer_name("mode", "W", i)) * h;
        MatrixXd zb = z + p.matrix(detail::layer_name("mode", "b", i));
        h = zb.array().tanh().matrix();
    }
    MatrixXd z = p.matrix(detail::layer_name("mode", "W", cfg.mode_hidden)) * h;
    MatrixXd out = z + p.matrix(detail::layer_name("mode", "b", cfg.mode_hidden));
    return out.col(0);
}

/// Same chain as a tape subgraph; pe must be the posenc column for the point.
inline int mode_point_tape(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg, int pe) {
    int h = pe;
    for (int i = 0; i < cfg.mode_hidden; ++i) {
        h = t.tanh_(t.add(t.matmul(lm[detail::layer_name("mode", "W", i)], h),
                          lm[detail::layer_name("mode", "b", i)]));
    }
    return t.add(t.matmul(lm[detail::layer_name("mode", "W", cfg.mode_hidden)], h),
                 lm[detail::layer_name("mode", "b", cfg.mode_hidden)]);
}

/// Complex m x r mode matrix over a coordinate set.
inline MatrixXcd modes_matrix(const ParamStore& p, const ModelConfig& cfg, const CoordSet& set) {
    MatrixXcd out(set.size(), cfg.r);
    for (int i = 0; i < set.size(); ++i) {
        const VectorXd lift = mode_point_lift(p, cfg, set.point(i));
        for (int k = 0; k < cfg.r; ++k) out(i, k) = Complex(lift[2 * k], lift[2 * k + 1]);
    }
    return out;
}

// ---- encoder ----

/// Indices that put points into canonical (lexicographic by coordinates)
/// order. Pooling in this fixed order makes the encoder exactly permutation
/// invariant, not just invariant up to floating-point reassociation.
inline std::vector<int> canonical_order(const MatrixXd& coords) {
    std::vector<int> idx(static_cast<std::size_t>(coords.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        for (Eigen::Index j = 0; j < coords.cols(); ++j) {
            if (coords(a, j) < coords(b, j)) return true;
            if (coords(a, j) > coords(b, j)) return false;
        }
        return false;
    });
    return idx;
}

inline std::vector<int> canonical_order(const CoordSet& set) {
    return canonical_order(set.coords());
}

struct EncodedGaussian {
    VectorXd mu_lift;      // 2r
    VectorXd logvar_lift;  // 2r, clamped to [logvar_min, logvar_max]
};

namespace detail {

/// Shared encoder trunk on a pre-assembled input block (enc_in x m, canonical
/// column order). Mirrors the tape path operation for operation.
inline EncodedGaussian encode_block(const ParamStore& p, const ModelConfig& cfg,
                                    const MatrixXd& X) {
    MatrixXd z0 = p.matrix("enc.W0") * X;
    MatrixXd h0 = (z0.array().colwise() + p.matrix("enc.b0").col(0).array()).tanh().matrix();
    MatrixXd z1 = p.matrix("enc.W1") * h0;
    MatrixXd h1 = (z1.array().colwise() + p.matrix("enc.b1").col(0).array()).tanh().matrix();
    MatrixXd pooled = h1.rowwise().mean();
    MatrixXd mu_z = p.matrix("enc.Wmu") * pooled;
    MatrixXd mu = mu_z + p.matrix("enc.bmu");
    MatrixXd lv_z = p.matrix("enc.Wlv") * pooled;
    MatrixXd lv = lv_z + p.matrix("enc.blv");
    EncodedGaussian out;
    out.mu_lift = mu.col(0);
    const double lo = cfg.logvar_min, hi = cfg.logvar_max;
    out.logvar_lift =
        lv.col(0).unaryExpr([lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); });
    return out;
}

}  // namespace detail

/// Permutation-invariant set encoder on raw (coords, values) lists. Exact
/// duplicates (same coordinates and same value bits) are collapsed before
/// pooling, so duplicating sensors never shifts the estimate.
inline EncodedGaussian encode_raw(const ParamStore& p, const ModelConfig& cfg,
                                  const MatrixXd& coords, const VectorXcd& values) {
    require(coords.rows() == values.size(), "encode_raw: coords/values size mismatch");
    require(coords.rows() >= 1, "encode_raw: empty input");
    require(coords.cols() == cfg.coord_dim, "encode_raw: wrong coordinate dimension");
    require(coords.allFinite() && all_finite(MatrixXcd(values)),
            "encode_raw: non-finite input");

    std::vector<int> idx(static_cast<std::size_t>(coords.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        for (Eigen::Index j = 0; j < coords.cols(); ++j) {
            if (coords(a, j) < coords(b, j)) return true;
            if (coords(a, j) > coords(b, j)) return false;
        }
        if (values[a].real() != values[b].real()) return values[a].real() < values[b].real();
        return values[a].imag() < values[b].imag();
    });
    std::vector<int> keep;
    keep.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i > 0) {
            const int a = idx[i], b = idx[i - 1];
            if (coords.row(a) == coords.row(b) && values[a] == values[b]) continue;
        }
        keep.push_back(idx[i]);
    }

    const int m = static_cast<int>(keep.size());
    MatrixXd X(cfg.enc_in(), m);
    for (int c = 0; c < m; ++c) {
        const int i = keep[static_cast<std::size_t>(c)];
        X(0, c) = values[i].real();
        X(1, c) = values[i].imag();
        X.col(c).tail(cfg.posenc_dim()) = posenc(coords.row(i).transpose(), cfg.posenc_L);
    }
    return detail::encode_block(p, cfg, X);
}

inline EncodedGaussian encode_field(const ParamStore& p, const ModelConfig& cfg,
                                    const CoordSet& sensors, const Field& y) {
    require(y.values.size() == sensors.size(), "encode_field: field/sensor size mismatch");
    return encode_raw(p, cfg, sensors.coords(), y.values);
}

struct EncTapeOut {
    int mu;      // 2r x 1
    int logvar;  // 2r x 1 (clamped)
};

/// Tape-path encoder. y2m carries the lifted sensor values (2 x m) and
/// pe_block the posenc features (posenc_dim x m); both must already be in
/// canonical column order. y2m may be a constant (teacher forcing) or a node
/// assembled from predictions (autoregressive feedback).
inline EncTapeOut encode_tape(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg, int y2m,
                              int pe_block) {
    int X = t.vstack({y2m, pe_block});
    int h0 = t.tanh_(t.add_colvec(t.matmul(lm["enc.W0"], X), lm["enc.b0"]));
    int h1 = t.tanh_(t.add_colvec(t.matmul(lm["enc.W1"], h0), lm["enc.b1"]));
    int pooled = t.rowmean(h1);
    EncTapeOut out;
    out.mu = t.add(t.matmul(lm["enc.Wmu"], pooled), lm["enc.bmu"]);
    out.logvar = t.clamp_(t.add(t.matmul(lm["enc.Wlv"], pooled), lm["enc.blv"]), cfg.logvar_min,
                          cfg.logvar_max);
    return out;
}

/// Assembles the constant encoder input pieces for a sensor set: the posenc
/// block plus the canonical ordering, reused across every window and step.
struct SensorLayout {
    std::vector<int> order;  // canonical permutation of sensor indices
    MatrixXd pe;             // posenc_dim x m, canonical order

    static SensorLayout build(const CoordSet& sensors, const ModelConfig& cfg) {
        SensorLayout out;
        out.order = canonical_order(sensors);
        MatrixXd block = posenc_block(sensors, cfg.posenc_L);
        out.pe.resize(block.rows(), block.cols());
        for (std::size_t c = 0; c < out.order.size(); ++c)
            out.pe.col(static_cast<Eigen::Index>(c)) = block.col(out.order[c]);
        return out;
    }

    /// Lifted sensor values (2 x m) in canonical order.
    MatrixXd lift_values(const VectorXcd& values) const {
        MatrixXd y(2, static_cast<Eigen::Index>(order.size()));
        for (std::size_t c = 0; c < order.size(); ++c) {
            y(0, static_cast<Eigen::Index>(c)) = values[order[c]].real();
            y(1, static_cast<Eigen::Index>(c)) = values[order[c]].imag();
        }
        return y;
    }
};

// ---- drift network ----

inline MatrixXd drift_selector(const ModelConfig& cfg) {
    MatrixXd S = MatrixXd::Zero(cfg.drift_in(), 2 * cfg.r);
    S.topRows(2 * cfg.r).setIdentity();
    return S;
}

/// f_theta(phi, t) on the lift.
inline VectorXd f_theta_value(const ParamStore& p, const ModelConfig& cfg,
                              const VectorXd& phi_lift, double time) {
    require(phi_lift.size() == 2 * cfg.r, "f_theta_value: wrong state size");
    MatrixXd in(cfg.drift_in(), 1);
    in.col(0).head(2 * cfg.r) = phi_lift;
    in(2 * cfg.r, 0) = time;
    MatrixXd z0 = p.matrix("drift.W0") * in;
    MatrixXd h0 = (z0 + p.matrix("drift.b0")).array().tanh().matrix();
    MatrixXd z1 = p.matrix("drift.W1") * h0;
    MatrixXd h1 = (z1 + p.matrix("drift.b1")).array().tanh().matrix();
    MatrixXd z2 = p.matrix("drift.W2") * h1;
    MatrixXd out = z2 + p.matrix("drift.b2");
    return out.col(0);
}

/// Full drift Lambda*phi + f_theta(phi, t) on the lift.
inline VectorXd full_drift_value(const ParamStore& p, const ModelConfig& cfg,
                                 const VectorXd& phi_lift, double time) {
    return lambda_lift(p) * phi_lift + f_theta_value(p, cfg, phi_lift, time);
}

/// Exact real-lift Jacobian of the full drift at (phi, t): Lambda's lift plus
/// the tanh-chain product of the drift network. With the drift at zero this
/// is exactly Lambda's lift.
inline MatrixXd jacobian_real_lift(const ParamStore& p, const ModelConfig& cfg,
                                   const VectorXd& phi_lift, double time) {
    require(phi_lift.size() == 2 * cfg.r, "jacobian_real_lift: wrong state size");
    MatrixXd in(cfg.drift_in(), 1);
    in.col(0).head(2 * cfg.r) = phi_lift;
    in(2 * cfg.r, 0) = time;
    MatrixXd z0 = p.matrix("drift.W0") * in;
    MatrixXd h0 = (z0 + p.matrix("drift.b0")).array().tanh().matrix();
    MatrixXd z1 = p.matrix("drift.W1") * h0;
    MatrixXd h1 = (z1 + p.matrix("drift.b1")).array().tanh().matrix();
    VectorXd d0 = ((h0.array() * h0.array()) * -1.0 + 1.0).matrix().col(0);
    VectorXd d1 = ((h1.array() * h1.array()) * -1.0 + 1.0).matrix().col(0);
    MatrixXd W0S = p.matrix("drift.W0") * drift_selector(cfg);
    MatrixXd t0 = (W0S.array().colwise() * d0.array()).matrix();
    MatrixXd t1 = p.matrix("drift.W1") * t0;
    MatrixXd t2 = (t1.array().colwise() * d1.array()).matrix();
    return lambda_lift(p) + p.matrix("drift.W2") * t2;
}

struct DriftTapeOut {
    int f;    // 2r x 1 full drift (Lambda phi + f_theta)
    int jac;  // 2r x 2r full Jacobian, or -1 when not requested
};

/// Tape-path drift and (optionally) its Jacobian as differentiable nodes.
/// lambda_node must be assemble_lambda(alpha, omega); selector a constant
/// node holding drift_selector(cfg). Building the Jacobian from the same tanh
/// activations keeps covariance propagation differentiable end to end.
inline DriftTapeOut drift_tape(ad::Tape& t, const LeafMap& lm, const ModelConfig& cfg,
                               int lambda_node, int selector, int phi, double time,
                               bool want_jacobian) {
    int in = t.vstack({phi, t.constant(MatrixXd::Constant(1, 1, time))});
    int h0 = t.tanh_(t.add(t.matmul(lm["drift.W0"], in), lm["drift.b0"]));
    int h1 = t.tanh_(t.add(t.matmul(lm["drift.W1"], h0), lm["drift.b1"]));
    int f_theta = t.add(t.matmul(lm["drift.W2"], h1), lm["drift.b2"]);
    DriftTapeOut out;
    out.f = t.add(t.matmul(lambda_node, phi), f_theta);
    out.jac = -1;
    if (want_jacobian) {
        int d0 = t.addc(t.scale(t.hadamard(h0, h0), -1.0), 1.0);
        int d1 = t.addc(t.scale(t.hadamard(h1, h1), -1.0), 1.0);
        int t0 = t.rowscale(t.matmul(lm["drift.W0"], selector), d0);
        int t1 = t.rowscale(t.matmul(lm["drift.W1"], t0), d1);
        out.jac = t.add(lambda_node, t.matmul(lm["drift.W2"], t1));
    }
    return out;
}

}  // namespace snode
