#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace snode {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Thrown when a caller violates an operation's preconditions.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown on I/O failures and malformed on-disk data.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a numerical routine leaves its valid regime (blow-up, NaN, ...).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline bool all_finite(const Eigen::Ref<const MatrixXd>& m) {
    return m.allFinite();
}

inline bool all_finite(const MatrixXcd& m) {
    return m.real().allFinite() && m.imag().allFinite();
}

// Complex vectors and their real lift: z in C^r maps to the interleaved
// (Re z_0, Im z_0, Re z_1, Im z_1, ...) vector in R^{2r}. All tape and SDE
// code works on the lift; complex views are derived.

inline VectorXd complex_to_lift(const VectorXcd& z) {
    VectorXd out(2 * z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        out[2 * k] = z[k].real();
        out[2 * k + 1] = z[k].imag();
    }
    return out;
}

inline VectorXcd lift_to_complex(const VectorXd& v) {
    require(v.size() % 2 == 0, "lift_to_complex: odd length");
    VectorXcd out(v.size() / 2);
    for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = Complex(v[2 * k], v[2 * k + 1]);
    return out;
}

}  // namespace snode
