#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "snode/common.hpp"

namespace snode {
namespace ad {

/// Reverse-mode tape over real Eigen matrices (column vectors are n x 1).
/// Nodes are appended in evaluation order, so operands always precede their
/// results and a single reverse sweep accumulates exact adjoints. Complex
/// quantities elsewhere in the library enter the tape through their real
/// lift, which keeps the op set closed and first-order.
class Tape {
public:
    struct Node {
        MatrixXd val;
        MatrixXd adj;                  // empty until touched by backward()
        std::function<void()> back;    // pulls this node's adjoint into its operands
        const char* op = "leaf";
        bool needs_grad = false;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int leaf(MatrixXd v) { return push(std::move(v), true, "leaf"); }
    int constant(MatrixXd v) { return push(std::move(v), false, "constant"); }
    int scalar_constant(double c) { return constant(MatrixXd::Constant(1, 1, c)); }

    const MatrixXd& val(int id) const { return nodes_[check(id)].val; }

    /// Adjoint of a node after backward(); zeros if the sweep never reached it.
    MatrixXd grad_of(int id) const {
        const Node& n = nodes_[check(id)];
        if (n.adj.size() == 0) return MatrixXd::Zero(n.val.rows(), n.val.cols());
        return n.adj;
    }

    std::size_t size() const { return nodes_.size(); }

    // ---- arithmetic ----

    int add(int a, int b) {
        same_shape(a, b, "add");
        int o = push(nodes_[a].val + nodes_[b].val, ng(a) || ng(b), "add");
        nodes_[o].back = [this, o, a, b] {
            acc(a, nodes_[o].adj);
            acc(b, nodes_[o].adj);
        };
        return o;
    }

    int sub(int a, int b) {
        same_shape(a, b, "sub");
        int o = push(nodes_[a].val - nodes_[b].val, ng(a) || ng(b), "sub");
        nodes_[o].back = [this, o, a, b] {
            acc(a, nodes_[o].adj);
            acc(b, -nodes_[o].adj);
        };
        return o;
    }

    int scale(int a, double c) {
        int o = push(c * nodes_[a].val, ng(a), "scale");
        nodes_[o].back = [this, o, a, c] { acc(a, c * nodes_[o].adj); };
        return o;
    }

    /// A + c*B.
    int add_scaled(int a, int b, double c) {
        same_shape(a, b, "add_scaled");
        int o = push(nodes_[a].val + c * nodes_[b].val, ng(a) || ng(b), "add_scaled");
        nodes_[o].back = [this, o, a, b, c] {
            acc(a, nodes_[o].adj);
            acc(b, c * nodes_[o].adj);
        };
        return o;
    }

    int addc(int a, double c) {
        int o = push(nodes_[a].val.array() + c, ng(a), "addc");
        nodes_[o].back = [this, o, a] { acc(a, nodes_[o].adj); };
        return o;
    }

    int matmul(int a, int b) {
        require(nodes_[a].val.cols() == nodes_[b].val.rows(), "matmul: inner dims differ");
        int o = push(nodes_[a].val * nodes_[b].val, ng(a) || ng(b), "matmul");
        nodes_[o].back = [this, o, a, b] {
            if (ng(a)) acc(a, nodes_[o].adj * nodes_[b].val.transpose());
            if (ng(b)) acc(b, nodes_[a].val.transpose() * nodes_[o].adj);
        };
        return o;
    }

    int transpose(int a) {
        int o = push(nodes_[a].val.transpose(), ng(a), "transpose");
        nodes_[o].back = [this, o, a] { acc(a, nodes_[o].adj.transpose()); };
        return o;
    }

    int hadamard(int a, int b) {
        same_shape(a, b, "hadamard");
        int o = push((nodes_[a].val.array() * nodes_[b].val.array()).matrix(), ng(a) || ng(b),
                     "hadamard");
        nodes_[o].back = [this, o, a, b] {
            if (ng(a)) acc(a, (nodes_[o].adj.array() * nodes_[b].val.array()).matrix());
            if (ng(b)) acc(b, (nodes_[o].adj.array() * nodes_[a].val.array()).matrix());
        };
        return o;
    }

    /// Elementwise A / B.
    int div(int a, int b) {
        same_shape(a, b, "div");
        int o = push((nodes_[a].val.array() / nodes_[b].val.array()).matrix(), ng(a) || ng(b),
                     "div");
        nodes_[o].back = [this, o, a, b] {
            if (ng(a)) acc(a, (nodes_[o].adj.array() / nodes_[b].val.array()).matrix());
            if (ng(b))
                acc(b, (-nodes_[o].adj.array() * nodes_[o].val.array() / nodes_[b].val.array())
                           .matrix());
        };
        return o;
    }

    /// diag(v) * M where v is n x 1 and M is n x k.
    int rowscale(int m, int v) {
        require(nodes_[v].val.cols() == 1 && nodes_[v].val.rows() == nodes_[m].val.rows(),
                "rowscale: v must be a column vector matching M's rows");
        int o = push((nodes_[m].val.array().colwise() * nodes_[v].val.col(0).array()).matrix(),
                     ng(m) || ng(v), "rowscale");
        nodes_[o].back = [this, o, m, v] {
            if (ng(m))
                acc(m, (nodes_[o].adj.array().colwise() * nodes_[v].val.col(0).array()).matrix());
            if (ng(v))
                acc(v, (nodes_[o].adj.array() * nodes_[m].val.array()).rowwise().sum().matrix());
        };
        return o;
    }

    // ---- elementwise nonlinearities ----

    int tanh_(int a) {
        int o = push(nodes_[a].val.array().tanh().matrix(), ng(a), "tanh");
        nodes_[o].back = [this, o, a] {
            acc(a, (nodes_[o].adj.array() * (1.0 - nodes_[o].val.array().square())).matrix());
        };
        return o;
    }

    int exp_(int a) {
        int o = push(nodes_[a].val.array().exp().matrix(), ng(a), "exp");
        nodes_[o].back = [this, o, a] {
            acc(a, (nodes_[o].adj.array() * nodes_[o].val.array()).matrix());
        };
        return o;
    }

    int log_(int a) {
        int o = push(nodes_[a].val.array().log().matrix(), ng(a), "log");
        nodes_[o].back = [this, o, a] {
            acc(a, (nodes_[o].adj.array() / nodes_[a].val.array()).matrix());
        };
        return o;
    }

    int sin_(int a) {
        int o = push(nodes_[a].val.array().sin().matrix(), ng(a), "sin");
        nodes_[o].back = [this, o, a] {
            acc(a, (nodes_[o].adj.array() * nodes_[a].val.array().cos()).matrix());
        };
        return o;
    }

    int cos_(int a) {
        int o = push(nodes_[a].val.array().cos().matrix(), ng(a), "cos");
        nodes_[o].back = [this, o, a] {
            acc(a, (-nodes_[o].adj.array() * nodes_[a].val.array().sin()).matrix());
        };
        return o;
    }

    int softplus_(int a) {
        MatrixXd v = nodes_[a].val.unaryExpr([](double x) {
            return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        });
        int o = push(std::move(v), ng(a), "softplus");
        nodes_[o].back = [this, o, a] {
            MatrixXd sig = nodes_[a].val.unaryExpr(
                [](double x) { return x > 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
            acc(a, (nodes_[o].adj.array() * sig.array()).matrix());
        };
        return o;
    }

    /// Hard clamp; gradient is zero outside the open interval (lo, hi).
    int clamp_(int a, double lo, double hi) {
        MatrixXd v = nodes_[a].val.unaryExpr(
            [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); });
        int o = push(std::move(v), ng(a), "clamp");
        nodes_[o].back = [this, o, a, lo, hi] {
            MatrixXd mask = nodes_[a].val.unaryExpr(
                [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
            acc(a, (nodes_[o].adj.array() * mask.array()).matrix());
        };
        return o;
    }

    // ---- reductions and scalars ----

    int sum(int a) {
        int o = push(MatrixXd::Constant(1, 1, nodes_[a].val.sum()), ng(a), "sum");
        nodes_[o].back = [this, o, a] {
            acc(a, MatrixXd::Constant(nodes_[a].val.rows(), nodes_[a].val.cols(),
                                      nodes_[o].adj(0, 0)));
        };
        return o;
    }

    int mean_all(int a) {
        const double n = static_cast<double>(nodes_[a].val.size());
        int o = push(MatrixXd::Constant(1, 1, nodes_[a].val.sum() / n), ng(a), "mean_all");
        nodes_[o].back = [this, o, a, n] {
            acc(a, MatrixXd::Constant(nodes_[a].val.rows(), nodes_[a].val.cols(),
                                      nodes_[o].adj(0, 0) / n));
        };
        return o;
    }

    /// sum(A .* B) as a 1x1 node.
    int dot(int a, int b) {
        same_shape(a, b, "dot");
        int o = push(MatrixXd::Constant(1, 1, (nodes_[a].val.array() * nodes_[b].val.array()).sum()),
                     ng(a) || ng(b), "dot");
        nodes_[o].back = [this, o, a, b] {
            const double g = nodes_[o].adj(0, 0);
            if (ng(a)) acc(a, g * nodes_[b].val);
            if (ng(b)) acc(b, g * nodes_[a].val);
        };
        return o;
    }

    /// s * M with s a 1x1 node.
    int scalemat(int m, int s) {
        require(nodes_[s].val.size() == 1, "scalemat: s must be 1x1");
        int o = push(nodes_[s].val(0, 0) * nodes_[m].val, ng(m) || ng(s), "scalemat");
        nodes_[o].back = [this, o, m, s] {
            if (ng(m)) acc(m, nodes_[s].val(0, 0) * nodes_[o].adj);
            if (ng(s))
                acc(s, MatrixXd::Constant(1, 1,
                                          (nodes_[o].adj.array() * nodes_[m].val.array()).sum()));
        };
        return o;
    }

    /// Mean of a list of 1x1 nodes as one fused node.
    int mean_scalars(const std::vector<int>& ids) {
        require(!ids.empty(), "mean_scalars: empty list");
        double s = 0;
        bool g = false;
        for (int id : ids) {
            require(nodes_[check(id)].val.size() == 1, "mean_scalars: entries must be 1x1");
            s += nodes_[id].val(0, 0);
            g = g || ng(id);
        }
        const double n = static_cast<double>(ids.size());
        int o = push(MatrixXd::Constant(1, 1, s / n), g, "mean_scalars");
        nodes_[o].back = [this, o, ids, n] {
            const MatrixXd share = MatrixXd::Constant(1, 1, nodes_[o].adj(0, 0) / n);
            for (int id : ids) acc(id, share);
        };
        return o;
    }

    // ---- structure ----

    /// Stack blocks vertically (all must share column count).
    int vstack(const std::vector<int>& ids) {
        require(!ids.empty(), "vstack: empty list");
        Eigen::Index cols = nodes_[check(ids[0])].val.cols(), rows = 0;
        bool g = false;
        for (int id : ids) {
            require(nodes_[check(id)].val.cols() == cols, "vstack: column counts differ");
            rows += nodes_[id].val.rows();
            g = g || ng(id);
        }
        MatrixXd v(rows, cols);
        Eigen::Index at = 0;
        for (int id : ids) {
            v.middleRows(at, nodes_[id].val.rows()) = nodes_[id].val;
            at += nodes_[id].val.rows();
        }
        int o = push(std::move(v), g, "vstack");
        nodes_[o].back = [this, o, ids] {
            Eigen::Index at = 0;
            for (int id : ids) {
                const Eigen::Index r = nodes_[id].val.rows();
                if (ng(id)) acc(id, nodes_[o].adj.middleRows(at, r));
                at += r;
            }
        };
        return o;
    }

    /// Stack blocks horizontally (all must share row count).
    int hstack(const std::vector<int>& ids) {
        require(!ids.empty(), "hstack: empty list");
        Eigen::Index rows = nodes_[check(ids[0])].val.rows(), cols = 0;
        bool g = false;
        for (int id : ids) {
            require(nodes_[check(id)].val.rows() == rows, "hstack: row counts differ");
            cols += nodes_[id].val.cols();
            g = g || ng(id);
        }
        MatrixXd v(rows, cols);
        Eigen::Index at = 0;
        for (int id : ids) {
            v.middleCols(at, nodes_[id].val.cols()) = nodes_[id].val;
            at += nodes_[id].val.cols();
        }
        int o = push(std::move(v), g, "hstack");
        nodes_[o].back = [this, o, ids] {
            Eigen::Index at = 0;
            for (int id : ids) {
                const Eigen::Index c = nodes_[id].val.cols();
                if (ng(id)) acc(id, nodes_[o].adj.middleCols(at, c));
                at += c;
            }
        };
        return o;
    }

    int slice_rows(int a, int r0, int n) {
        require(r0 >= 0 && n >= 1 && r0 + n <= nodes_[a].val.rows(), "slice_rows: out of range");
        int o = push(nodes_[a].val.middleRows(r0, n), ng(a), "slice_rows");
        nodes_[o].back = [this, o, a, r0, n] {
            MatrixXd g = MatrixXd::Zero(nodes_[a].val.rows(), nodes_[a].val.cols());
            g.middleRows(r0, n) = nodes_[o].adj;
            acc(a, g);
        };
        return o;
    }

    int col(int a, int j) {
        require(j >= 0 && j < nodes_[a].val.cols(), "col: out of range");
        int o = push(nodes_[a].val.col(j), ng(a), "col");
        nodes_[o].back = [this, o, a, j] {
            MatrixXd g = MatrixXd::Zero(nodes_[a].val.rows(), nodes_[a].val.cols());
            g.col(j) = nodes_[o].adj;
            acc(a, g);
        };
        return o;
    }

    /// M + b broadcast over columns (b is n x 1).
    int add_colvec(int m, int b) {
        require(nodes_[b].val.cols() == 1 && nodes_[b].val.rows() == nodes_[m].val.rows(),
                "add_colvec: b must be a column vector matching M's rows");
        int o = push((nodes_[m].val.array().colwise() + nodes_[b].val.col(0).array()).matrix(),
                     ng(m) || ng(b), "add_colvec");
        nodes_[o].back = [this, o, m, b] {
            if (ng(m)) acc(m, nodes_[o].adj);
            if (ng(b)) acc(b, nodes_[o].adj.rowwise().sum());
        };
        return o;
    }

    /// Row-wise mean over columns: n x m -> n x 1.
    int rowmean(int a) {
        const double m = static_cast<double>(nodes_[a].val.cols());
        int o = push(nodes_[a].val.rowwise().mean(), ng(a), "rowmean");
        nodes_[o].back = [this, o, a, m] {
            acc(a, (nodes_[o].adj / m).replicate(1, nodes_[a].val.cols()));
        };
        return o;
    }

    int diagvec(int a) {
        require(nodes_[a].val.rows() == nodes_[a].val.cols(), "diagvec: square input required");
        int o = push(nodes_[a].val.diagonal(), ng(a), "diagvec");
        nodes_[o].back = [this, o, a] {
            MatrixXd g = MatrixXd::Zero(nodes_[a].val.rows(), nodes_[a].val.cols());
            g.diagonal() = nodes_[o].adj.col(0);
            acc(a, g);
        };
        return o;
    }

    int diagmat(int a) {
        require(nodes_[a].val.cols() == 1, "diagmat: column vector required");
        MatrixXd v = MatrixXd::Zero(nodes_[a].val.rows(), nodes_[a].val.rows());
        v.diagonal() = nodes_[a].val.col(0);
        int o = push(std::move(v), ng(a), "diagmat");
        nodes_[o].back = [this, o, a] { acc(a, nodes_[o].adj.diagonal()); };
        return o;
    }

    /// (A + A^T) / 2.
    int sym(int a) {
        require(nodes_[a].val.rows() == nodes_[a].val.cols(), "sym: square input required");
        int o = push(0.5 * (nodes_[a].val + nodes_[a].val.transpose()), ng(a), "sym");
        nodes_[o].back = [this, o, a] {
            acc(a, 0.5 * (nodes_[o].adj + nodes_[o].adj.transpose()));
        };
        return o;
    }

    // ---- complex real-lift helpers ----

    /// Real lift of diag(alpha + i*omega): 2x2 blocks [[a, -w], [w, a]].
    int assemble_lambda(int alpha, int omega) {
        require(nodes_[alpha].val.cols() == 1 && nodes_[omega].val.cols() == 1 &&
                    nodes_[alpha].val.rows() == nodes_[omega].val.rows(),
                "assemble_lambda: alpha/omega must be equal-length column vectors");
        const Eigen::Index r = nodes_[alpha].val.rows();
        MatrixXd v = MatrixXd::Zero(2 * r, 2 * r);
        for (Eigen::Index k = 0; k < r; ++k) {
            const double a = nodes_[alpha].val(k, 0), w = nodes_[omega].val(k, 0);
            v(2 * k, 2 * k) = a;
            v(2 * k + 1, 2 * k + 1) = a;
            v(2 * k + 1, 2 * k) = w;
            v(2 * k, 2 * k + 1) = -w;
        }
        int o = push(std::move(v), ng(alpha) || ng(omega), "assemble_lambda");
        nodes_[o].back = [this, o, alpha, omega, r] {
            const MatrixXd& g = nodes_[o].adj;
            MatrixXd da(r, 1), dw(r, 1);
            for (Eigen::Index k = 0; k < r; ++k) {
                da(k, 0) = g(2 * k, 2 * k) + g(2 * k + 1, 2 * k + 1);
                dw(k, 0) = g(2 * k + 1, 2 * k) - g(2 * k, 2 * k + 1);
            }
            acc(alpha, da);
            acc(omega, dw);
        };
        return o;
    }

    /// Complex dot in the real lift: w, phi are 2r x 1 interleaved (re, im);
    /// output is the 2 x 1 lift of sum_k w_k * phi_k (no conjugation).
    int cplx_matvec(int w, int phi) {
        same_shape(w, phi, "cplx_matvec");
        require(nodes_[w].val.cols() == 1 && nodes_[w].val.rows() % 2 == 0,
                "cplx_matvec: 2r x 1 inputs required");
        const Eigen::Index r = nodes_[w].val.rows() / 2;
        const MatrixXd& W = nodes_[w].val;
        const MatrixXd& P = nodes_[phi].val;
        double re = 0, im = 0;
        for (Eigen::Index k = 0; k < r; ++k) {
            const double wr = W(2 * k, 0), wi = W(2 * k + 1, 0);
            const double pr = P(2 * k, 0), pi = P(2 * k + 1, 0);
            re += wr * pr - wi * pi;
            im += wr * pi + wi * pr;
        }
        MatrixXd v(2, 1);
        v << re, im;
        int o = push(std::move(v), ng(w) || ng(phi), "cplx_matvec");
        nodes_[o].back = [this, o, w, phi, r] {
            const double gr = nodes_[o].adj(0, 0), gi = nodes_[o].adj(1, 0);
            const MatrixXd& W = nodes_[w].val;
            const MatrixXd& P = nodes_[phi].val;
            if (ng(w)) {
                MatrixXd dw(2 * r, 1);
                for (Eigen::Index k = 0; k < r; ++k) {
                    dw(2 * k, 0) = gr * P(2 * k, 0) + gi * P(2 * k + 1, 0);
                    dw(2 * k + 1, 0) = -gr * P(2 * k + 1, 0) + gi * P(2 * k, 0);
                }
                acc(w, dw);
            }
            if (ng(phi)) {
                MatrixXd dp(2 * r, 1);
                for (Eigen::Index k = 0; k < r; ++k) {
                    dp(2 * k, 0) = gr * W(2 * k, 0) + gi * W(2 * k + 1, 0);
                    dp(2 * k + 1, 0) = -gr * W(2 * k + 1, 0) + gi * W(2 * k, 0);
                }
                acc(phi, dp);
            }
        };
        return o;
    }

    /// Predictive variance of the complex product w^T phi under cov Sigma
    /// (real lift, 2r x 2r): trace(R Sigma R^T) for the 2 x 2r lift R of w.
    int decode_var(int w, int sigma) {
        require(nodes_[w].val.cols() == 1 && nodes_[w].val.rows() % 2 == 0,
                "decode_var: w must be 2r x 1");
        require(nodes_[sigma].val.rows() == nodes_[w].val.rows() &&
                    nodes_[sigma].val.cols() == nodes_[w].val.rows(),
                "decode_var: Sigma must be 2r x 2r");
        const Eigen::Index n = nodes_[w].val.rows();
        VectorXd a(n), b(n);
        lift_rows(nodes_[w].val, a, b);
        const MatrixXd& S = nodes_[sigma].val;
        const VectorXd Sa = S * a, Sb = S * b;
        int o = push(MatrixXd::Constant(1, 1, a.dot(Sa) + b.dot(Sb)), ng(w) || ng(sigma),
                     "decode_var");
        nodes_[o].back = [this, o, w, sigma, n] {
            const double g = nodes_[o].adj(0, 0);
            VectorXd a(n), b(n);
            lift_rows(nodes_[w].val, a, b);
            const MatrixXd& S = nodes_[sigma].val;
            if (ng(sigma)) acc(sigma, g * (a * a.transpose() + b * b.transpose()));
            if (ng(w)) {
                const VectorXd da = 2.0 * g * (S * a), db = 2.0 * g * (S * b);
                MatrixXd dw(n, 1);
                for (Eigen::Index k = 0; k < n / 2; ++k) {
                    dw(2 * k, 0) = da(2 * k) + db(2 * k + 1);
                    dw(2 * k + 1, 0) = -da(2 * k + 1) + db(2 * k);
                }
                acc(w, dw);
            }
        };
        return o;
    }

    /// Per-point Gaussian negative log-likelihood against a 2 x 1 lifted
    /// prediction with total (complex) variance var. Complex points score both
    /// components at variance var/2; real points score the real component at
    /// variance var.
    int nll_point(int pred, int target, int var, bool complex_point) {
        require(nodes_[pred].val.rows() == 2 && nodes_[pred].val.cols() == 1,
                "nll_point: pred must be 2 x 1");
        same_shape(pred, target, "nll_point");
        require(nodes_[var].val.size() == 1, "nll_point: var must be 1x1");
        const double v = nodes_[var].val(0, 0);
        require(v > 0, "nll_point: variance must be positive");
        const double rr = nodes_[pred].val(0, 0) - nodes_[target].val(0, 0);
        const double ri = nodes_[pred].val(1, 0) - nodes_[target].val(1, 0);
        static const double log2pi = std::log(2.0 * M_PI);
        double L;
        if (complex_point) {
            L = std::log(v / 2) + log2pi + (rr * rr + ri * ri) / v;
        } else {
            L = 0.5 * (std::log(v) + rr * rr / v + log2pi);
        }
        int o = push(MatrixXd::Constant(1, 1, L), ng(pred) || ng(target) || ng(var), "nll_point");
        nodes_[o].back = [this, o, pred, target, var, complex_point] {
            const double g = nodes_[o].adj(0, 0);
            const double v = nodes_[var].val(0, 0);
            const double rr = nodes_[pred].val(0, 0) - nodes_[target].val(0, 0);
            const double ri = nodes_[pred].val(1, 0) - nodes_[target].val(1, 0);
            MatrixXd dp(2, 1);
            double dv;
            if (complex_point) {
                dp << 2 * rr / v, 2 * ri / v;
                dv = 1.0 / v - (rr * rr + ri * ri) / (v * v);
            } else {
                dp << rr / v, 0.0;
                dv = 0.5 * (1.0 / v - rr * rr / (v * v));
            }
            if (ng(pred)) acc(pred, g * dp);
            if (ng(target)) acc(target, -g * dp);
            if (ng(var)) acc(var, MatrixXd::Constant(1, 1, g * dv));
        };
        return o;
    }

    // ---- reverse sweep ----

    void backward(int root) {
        require(nodes_[check(root)].val.size() == 1, "backward: root must be a 1x1 scalar");
        nodes_[root].adj = MatrixXd::Ones(1, 1);
        for (int i = root; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.adj.size() != 0 && n.back) n.back();
        }
    }

private:
    static void lift_rows(const MatrixXd& w, VectorXd& a, VectorXd& b) {
        // Rows of the 2 x 2r real lift of w: a gives Re(w^T phi), b gives Im.
        for (Eigen::Index k = 0; k < w.rows() / 2; ++k) {
            a(2 * k) = w(2 * k, 0);
            a(2 * k + 1) = -w(2 * k + 1, 0);
            b(2 * k) = w(2 * k + 1, 0);
            b(2 * k + 1) = w(2 * k, 0);
        }
    }

    bool ng(int id) const { return nodes_[id].needs_grad; }

    int check(int id) const {
        require(id >= 0 && id < static_cast<int>(nodes_.size()), "tape: node id out of range");
        return id;
    }

    void same_shape(int a, int b, const char* op) const {
        require(nodes_[check(a)].val.rows() == nodes_[check(b)].val.rows() &&
                    nodes_[a].val.cols() == nodes_[b].val.cols(),
                std::string(op) + ": operand shapes differ");
    }

    int push(MatrixXd v, bool needs_grad, const char* op) {
        if (!v.allFinite())
            throw NumericalError(std::string("non-finite value produced by op '") + op + "'");
        Node n;
        n.val = std::move(v);
        n.needs_grad = needs_grad;
        n.op = op;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void acc(int id, const MatrixXd& g) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return;
        if (n.adj.size() == 0)
            n.adj = g;
        else
            n.adj += g;
    }

    void acc(int id, MatrixXd&& g) {
        Node& n = nodes_[id];
        if (!n.needs_grad) return;
        if (n.adj.size() == 0)
            n.adj = std::move(g);
        else
            n.adj += g;
    }

    std::vector<Node> nodes_;
};

}  // namespace ad
}  // namespace snode
