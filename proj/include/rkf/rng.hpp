#pragma once

#include "rkf/linalg.hpp"

#include <cstdint>
#include <random>

namespace rkf {

/// Independent random streams carved out of one master seed.
enum class Stream : std::uint64_t {
  Noise = 1,          // initial state, innovations, observation errors
  Innovation = 2,     // IO indicators and contaminating states
  Additive = 3,       // AO indicators and contaminating observations
  Calibration = 4,
  Sampling = 5,
};

/// SplitMix64 finalizer applied to a running state; used to derive sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for (master, key...) pairs. Replication r of a study draws from
/// derive_seed(master, r), so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key1, std::uint64_t key2);

/// 64-bit Mersenne twister seeded through SplitMix64. Gaussian draws use the
/// standard library normal distribution (one cached object per stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, Stream stream);

  double uniform();
  double gaussian();
  Vec gaussian(Eigen::Index n);
  bool bernoulli(double p);
  double cauchy(double location, double scale);
  /// Number of trials up to and including the first success, P(success) = p.
  long geometric_trials(double p);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rkf
