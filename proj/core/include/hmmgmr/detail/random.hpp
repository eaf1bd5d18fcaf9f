#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "hmmgmr/types.hpp"

namespace hmmgmr::detail {

// mt19937_64 engine with fixed variate transforms. The standard distribution
// objects are implementation-defined, which would break byte-identical
// reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1)
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // standard normal, Marsaglia polar with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  // uniform on {0, ..., n-1}, rejection-sampled to avoid modulo bias
  int uniform_int(int n) {
    const auto un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t r;
    do {
      r = gen_();
    } while (r >= bound);
    return static_cast<int>(r % un);
  }

  // index drawn proportional to non-negative weights
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw NumericError("categorical draw: weights sum to zero");
    double u = uniform01() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hmmgmr::detail
