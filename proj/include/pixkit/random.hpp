// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace pixkit
{

/// Seeded generator with portable draws. std::mt19937_64 output is fixed by the
/// standard, but the std distributions are not, so every draw here is derived
/// from raw engine output to keep traces identical across toolchains.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed): _engine(seed) {}

    std::uint64_t next() { return _engine(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(_engine() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n)
    {
        // reject the top partial bucket so the modulo is unbiased
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = _engine();
        while (x >= limit)
            x = _engine();
        return x % n;
    }

    /// Uniform integer in [lo, hi].
    std::int64_t range(std::int64_t lo, std::int64_t hi)
    {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Independent stream derived from a base seed and a stream index.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) { return Rng(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 _engine;
};

} // namespace pixkit
