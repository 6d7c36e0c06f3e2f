#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace cotd {

/// Derives an independent 64-bit seed from a master seed, a purpose tag and
/// optional integer coordinates (cell index, replicate, sample index, ...).
///
/// The tag is hashed with FNV-1a; the master seed, tag hash and each
/// coordinate are folded through the SplitMix64 finalizer. The mapping is
/// fixed and platform independent, so (master, tag, coords) always names the
/// same stream.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::initializer_list<std::uint64_t> coords = {});

std::uint64_t fnv1a64(std::string_view bytes);

/// Seedable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The conversions to doubles, normals and bounded integers are
/// implemented here instead of using <random> distributions, whose
/// algorithms are left to the library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Stream for (seed, tag, coords), see derive_seed.
  static Rng for_purpose(std::uint64_t master, std::string_view tag,
                         std::initializer_list<std::uint64_t> coords = {}) {
    return Rng(derive_seed(master, tag, coords));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool coin() { return (next_u64() >> 63) != 0; }

  /// Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Point drawn uniformly on the unit sphere in R^dim (normalized Gaussian).
std::vector<double> uniform_on_sphere(Rng& rng, std::size_t dim);

}  // namespace cotd
