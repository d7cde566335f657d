#pragma once

#include <cmath>
#include <cstdint>

namespace gridface {

// Deterministic splitmix64 generator. The standard library engines are
// portable but the distributions are not, so uniform/normal sampling is
// done explicitly here. State is a single u64, which makes checkpointing
// the training stream trivial.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller. Two uniforms per draw, no cached
    // spare, so the state stays a single word.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

    // Derive an independent stream from a master seed and a stream tag.
    static uint64_t derive(uint64_t master, uint64_t tag) {
        Rng r(master ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL));
        return r.next_u64();
    }

private:
    uint64_t state_;
};

}  // namespace gridface
