#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace icrl {

/**
 * Seeded random stream with platform-independent sampling.
 *
 * Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
 * derives uniforms and categorical draws by hand, because the standard
 * distribution adaptors are implementation-defined.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent substream keyed by name: hash(name) mixed with the root seed.
  static Rng substream(std::uint64_t root_seed, std::string_view name);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  int below(int n);

  /// Index drawn from unnormalised non-negative weights (any indexable range).
  template <typename Weights>
  int categorical(const Weights& w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = uniform() * total;
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      last_positive = i;
      if (u < w[i]) return i;
      u -= w[i];
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace icrl
