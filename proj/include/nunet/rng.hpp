#pragma once

#include <cstdint>

namespace nunet {

/// Counter-based generator: the k-th draw is a pure function of
/// (seed, stream, k), so results never depend on call order or thread.
class CounterRng
{
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL)))
  {
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_unit() * (hi - lo); }

  bool bernoulli(double p) { return next_unit() < p; }

  std::uint64_t counter() const { return counter_; }

private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nunet
