#pragma once
// Shared pseudo-spectral workspace for periodic-square fields, used by the
// vorticity simulator and by velocity reconstruction in analysis.

#include <fftw3.h>

#include <vector>

#include "snode/common.hpp"

namespace snode::detail {

/// Minimal pseudo-spectral workspace around FFTW. Plans are created once
/// per instance; transforms run through a single reused buffer pair.
class SpectralGrid {
public:
    explicit SpectralGrid(int n) : n_(n), buf_a_(sz()), buf_b_(sz()) {
        fwd_ = fftw_plan_dft_2d(n_, n_, cast(buf_a_.data()), cast(buf_b_.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_2d(n_, n_, cast(buf_a_.data()), cast(buf_b_.data()), FFTW_BACKWARD,
                                FFTW_ESTIMATE);
        require(fwd_ != nullptr && inv_ != nullptr, "SpectralGrid: planning failed");
    }
    SpectralGrid(const SpectralGrid&) = delete;
    SpectralGrid& operator=(const SpectralGrid&) = delete;
    ~SpectralGrid() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    int n() const { return n_; }
    std::size_t sz() const { return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_); }

    /// Integer wavenumber for index i (0..n-1).
    double wavenumber(int i) const { return i <= n_ / 2 ? i : i - n_; }

    std::vector<Complex> fft(const std::vector<Complex>& physical) {
        buf_a_ = physical;
        fftw_execute(fwd_);
        return buf_b_;
    }

    std::vector<Complex> ifft(const std::vector<Complex>& spectral) {
        buf_a_ = spectral;
        fftw_execute(inv_);
        std::vector<Complex> out = buf_b_;
        const double scale = 1.0 / static_cast<double>(sz());
        for (Complex& c : out) c *= scale;
        return out;
    }

    /// Applies f(kx, ky, value) over a spectral array in place.
    template <typename F>
    void for_modes(std::vector<Complex>& a, F&& f) const {
        for (int iy = 0; iy < n_; ++iy) {
            const double ky = wavenumber(iy);
            for (int ix = 0; ix < n_; ++ix) {
                f(wavenumber(ix), ky, a[static_cast<std::size_t>(iy) * n_ + ix]);
            }
        }
    }

private:
    static fftw_complex* cast(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }
    int n_;
    std::vector<Complex> buf_a_, buf_b_;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

}  // namespace snode::detail
