#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace nmt
{

  // std::mt19937_64 with explicit mappings to doubles and indices. The engine
  // and std::seed_seq are fully specified, the std distributions are not, so
  // uniform() and uniform_index() are spelled out to keep runs identical
  // across standard library implementations.
  class Rng
  {
  public:
    explicit Rng(std::uint64_t seed = 0)
    {
      reseed(seed);
    }

    void reseed(std::uint64_t seed)
    {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
      _engine.seed(seq);
    }

    std::uint64_t next()
    {
      return _engine();
    }

    // Uniform in [0, 1).
    double uniform()
    {
      return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi)
    {
      return lo + (hi - lo) * uniform();
    }

    // Uniform in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_index(std::uint64_t n)
    {
      const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
      std::uint64_t x;
      do
        x = next();
      while (x >= limit);
      return x % n;
    }

    // Derives an independent seed from a base seed and a stream index.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream)
    {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
      std::array<std::uint32_t, 2> out;
      seq.generate(out.begin(), out.end());
      return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    }

    // Returns a fresh seed and steps `state` forward.
    static std::uint64_t advance(std::uint64_t& state)
    {
      const std::uint64_t seed = derive(state, 0);
      state = derive(state, 1);
      return seed;
    }

  private:
    std::mt19937_64 _engine;
  };

}
