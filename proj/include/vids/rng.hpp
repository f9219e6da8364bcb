#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vids {

/// SplitMix64 finalizer; used to fan a master seed out into named streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the stream `name` under `master`:
/// splitmix64(master ^ splitmix64(fnv1a64(name))). Stream names used by the
/// library: "data", "init", "pretrain", "envs", "eps", "prior-mc",
/// "predict", "certify".
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);

/// Sub-stream keyed by an integer (iteration, environment index, ...).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key);

// Deterministic random source. The distributions are implemented here rather
// than through <random>'s distribution classes, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via the Marsaglia polar method.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vids
