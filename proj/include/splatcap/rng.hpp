#pragma once

#include <cmath>
#include <cstdint>

namespace splatcap {

// Counter-based splitmix64 stream. Used everywhere randomness is needed so
// that runs are reproducible bit-for-bit and training can resume from a
// checkpoint without serializing generator state: the stream for iteration i
// and purpose p is Rng(seed).fork(i).fork(p).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed * 0x9E3779B97F4A7C15ULL + 0x243F6A8885A308D3ULL) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    // Box-Muller, one draw per call (the pair's second half is discarded to
    // keep the stream position independent of call parity).
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925287 * u2);
    }

    Rng fork(std::uint64_t stream) const {
        Rng r(0);
        r.state_ = state_ ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
        return r;
    }

  private:
    std::uint64_t state_;
};

}  // namespace splatcap
