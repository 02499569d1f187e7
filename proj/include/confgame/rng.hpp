#pragma once

#include <cstdint>
#include <random>

namespace confgame {

/// Purposes for stream splitting. Each (master seed, purpose, index) triple
/// names an independent generator.
enum class StreamPurpose : std::uint64_t {
  kTrajectory = 1,
  kDataset = 2,
  kFixture = 3,
  kReplication = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// seed_k = splitmix(splitmix(master ^ splitmix(purpose)) + index)
inline std::uint64_t stream_seed(std::uint64_t master, StreamPurpose purpose,
                                 std::uint64_t index) {
  std::uint64_t p = splitmix64(static_cast<std::uint64_t>(purpose));
  return splitmix64(splitmix64(master ^ p) + index);
}

/// Thin wrapper with platform-independent draws (no std distributions).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Draws an index from the probability row p[0..k).
  int categorical(const double* p, int k) {
    double r = uniform();
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      acc += p[i];
      if (r < acc) return i;
    }
    for (int i = k - 1; i >= 0; --i)
      if (p[i] > 0.0) return i;
    return k - 1;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace confgame
