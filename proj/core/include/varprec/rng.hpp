#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace varprec {

// Mixes a master seed with an index so that per-trial streams are stable:
// adding trials or methods never perturbs the streams of earlier ones.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

// Seeded random stream. All transforms (uniform, normal, gamma) are
// hand-rolled on top of mt19937_64 so that a (config, seed) pair pins every
// sampled number independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // uniform on [0, 1): 53-bit mantissa
  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1): never returns 0 (safe for logs)
  double u01_open() {
    double u;
    do {
      u = u01();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // standard normal, Marsaglia polar method with a cached spare
  double normal();

  // Gamma(shape, rate = 1), Marsaglia-Tsang squeeze with the alpha < 1 boost
  double gamma(double shape);

  // Gamma(shape, rate)
  double gamma(double shape, double rate) { return gamma(shape) / rate; }

  std::int64_t uniform_int(std::int64_t n);  // in [0, n)

  void shuffle(std::vector<std::int64_t>& idx);

  // k distinct indices from [0, n), uniform without replacement
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace varprec
