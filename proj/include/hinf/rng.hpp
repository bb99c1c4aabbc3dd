#pragma once

#include <cstdint>
#include <vector>

#include "hinf/common.hpp"
#include "hinf/normal.hpp"

namespace hinf {

// xoshiro256++ with SplitMix64 seeding. Self-contained so that seeded runs
// produce identical streams across standard libraries and platforms; the
// std:: distributions are implementation-defined and would break that.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via inverse CDF (one uniform per draw, fully ordered).
    double normal() {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return norm_quantile(u);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    /// Draw from probabilities summing to ~1 (last bucket absorbs roundoff).
    std::size_t categorical(const std::vector<double>& probs) {
        double u = uniform(), acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    }

    /// Fisher-Yates shuffle of index vector.
    void shuffle(std::vector<std::size_t>& idx) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(idx[i - 1], idx[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace hinf
