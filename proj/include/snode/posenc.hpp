#pragma once

#include <cmath>

#include "snode/common.hpp"
#include "snode/types.hpp"

namespace snode {

/// Fourier positional features for one coordinate vector. Each of the d
/// components contributes its raw value followed by sin/cos pairs at octave
/// frequencies, so the output has (2L+1)*d entries laid out per component:
///   [ s_j, sin(2^0 pi s_j), cos(2^0 pi s_j), ..., sin(2^{L-1} pi s_j), cos(2^{L-1} pi s_j) ]
inline VectorXd posenc(const VectorXd& s, int L) {
    require(L >= 1, "posenc: L must be >= 1");
    const int d = static_cast<int>(s.size());
    require(d >= 1, "posenc: empty coordinate");
    VectorXd out((2 * L + 1) * d);
    int at = 0;
    for (int j = 0; j < d; ++j) {
        out[at++] = s[j];
        double freq = M_PI;
        for (int l = 0; l < L; ++l) {
            out[at++] = std::sin(freq * s[j]);
            out[at++] = std::cos(freq * s[j]);
            freq *= 2.0;
        }
    }
    return out;
}

/// Positional features for every point of a set, one column per point, in the
/// set's own ordering.
inline MatrixXd posenc_block(const CoordSet& set, int L) {
    const int m = set.size();
    require(m >= 1, "posenc_block: empty coord set");
    MatrixXd out((2 * L + 1) * set.dim(), m);
    for (int i = 0; i < m; ++i) out.col(i) = posenc(set.point(i), L);
    return out;
}

}  // namespace snode
