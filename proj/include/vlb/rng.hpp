#pragma once

#include <array>
#include <cstdint>

namespace vlb {

/// Philox4x32-10 block function (Salmon et al., Random123 family).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// What a stream is used for; part of the stream key so unrelated consumers
/// never share random bits.
enum class StreamPurpose : std::uint32_t {
  WorldLayout = 1,
  WorldDescriptors = 2,
  DescriptorProjection = 3,
  Odometry = 4,
  Observation = 5,
  Ransac = 6,
  Gallery = 7,
  Test = 99,
};

/// Counter-based random stream keyed by (seed, purpose, a, b).
///
/// Two streams with different keys are statistically independent and the
/// sequence depends only on the key, so consumers can be evaluated in any
/// order or in parallel without changing results.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint32_t a = 0,
               std::uint32_t b = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n); n must be > 0.
  std::uint32_t uniform_index(std::uint32_t n);
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace vlb
