#include "rkf/rng.hpp"

#include "rkf/error.hpp"

namespace rkf {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key) {
  return splitmix64(splitmix64(master) ^ (key * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key1, std::uint64_t key2) {
  return derive_seed(derive_seed(master, key1), key2);
}

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)),
                    static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                    static_cast<std::uint32_t>(splitmix64(seed ^ 0xa5a5a5a5ULL)),
                    static_cast<std::uint32_t>(splitmix64(seed ^ 0xa5a5a5a5ULL) >> 32)};
  engine_.seed(seq);
}

Rng::Rng(std::uint64_t seed, Stream stream)
    : Rng(derive_seed(seed, static_cast<std::uint64_t>(stream))) {}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::gaussian() { return normal_(engine_); }

Vec Rng::gaussian(Eigen::Index n) {
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal_(engine_);
  return out;
}

bool Rng::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform() < p;
}

double Rng::cauchy(double location, double scale) {
  return std::cauchy_distribution<double>(location, scale)(engine_);
}

long Rng::geometric_trials(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidParameter("geometric: success probability must be in (0,1]");
  if (p == 1.0) return 1;
  return 1 + std::geometric_distribution<long>(p)(engine_);
}

}  // namespace rkf
