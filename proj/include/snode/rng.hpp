#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace snode {

// Counter-based deterministic RNG. Every stream is keyed by (seed, site ids);
// identical keys give identical draws on every platform, which is what makes
// datasets, training runs, and reparameterized gradients replayable.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// A stateless-keyed stream: draw i of stream (seed,k1,k2,k3) is a pure function.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                    std::uint64_t k3 = 0) {
        std::uint64_t h = splitmix64(seed);
        h = splitmix64(h ^ (k1 + 0x632be59bd9b4e019ULL));
        h = splitmix64(h ^ (k2 + 0x9e6c63d0876a9a47ULL));
        h = splitmix64(h ^ (k3 + 0xd1b54a32d192ed03ULL));
        state_ = h;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * next_double(); }

    /// Standard normal via Box-Muller (explicit formula, no libc distributions).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // Guard against log(0).
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is negligible for n << 2^64 and,
        // more importantly, the mapping is deterministic.
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Fixed stream keys, one per site that consumes randomness. Every draw in
/// the library is keyed as Stream(seed, site, ...), so adding a new consumer
/// never perturbs the draws of existing ones.
namespace sites {
inline constexpr std::uint64_t kInit = 1;        // parameter initialization (sub-key: segment)
inline constexpr std::uint64_t kBatch = 2;       // window shuffling (sub-key: epoch)
inline constexpr std::uint64_t kModeSelect = 3;  // curriculum coin (sub-key: epoch, step)
inline constexpr std::uint64_t kSamplePath = 4;  // latent SDE path draws
inline constexpr std::uint64_t kNoise = 5;       // observation noise
inline constexpr std::uint64_t kSensors = 6;     // sensor subsampling
inline constexpr std::uint64_t kSimInit = 7;     // simulator initial conditions
}  // namespace sites

}  // namespace rng
}  // namespace snode
