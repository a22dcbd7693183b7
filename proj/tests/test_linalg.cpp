#include "oracles.hpp"
#include "rkf/error.hpp"
#include "rkf/filter.hpp"
#include "rkf/linalg.hpp"
#include "rkf/rng.hpp"

#include <doctest.h>

#include <set>

using namespace rkf;

TEST_CASE("pseudo_inverse satisfies the Penrose axioms on random shapes and ranks") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int i = 0; i < 500; ++i) {
    const int r = dim(gen), c = dim(gen);
    const int rank = std::uniform_int_distribution<int>(0, std::min(r, c))(gen);
    const Mat a = oracle::random_rank(gen, r, c, rank, 0.1, 10.0);
    const Mat g = pseudo_inverse(a);
    CHECK(g.rows() == c);
    CHECK(g.cols() == r);
    CHECK(penrose_residuals(a, g).max() < 1e-8);
  }
}

TEST_CASE("pseudo_inverse edge cases") {
  CHECK(pseudo_inverse(Mat::Zero(2, 3)).isZero());
  CHECK(pseudo_inverse(Mat::Zero(2, 3)).rows() == 3);
  const Mat empty(0, 0);
  CHECK(pseudo_inverse(empty).size() == 0);
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 4.0;
  const Mat g = pseudo_inverse(d);
  CHECK(g(0, 0) == doctest::Approx(0.25));
  CHECK(g(1, 1) == 0.0);
  Mat bad = Mat::Identity(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(pseudo_inverse(bad), InvalidInput);
  // Singular values below the relative cutoff are dropped.
  Mat tiny = Mat::Identity(2, 2);
  tiny(1, 1) = 1e-14;
  CHECK(pseudo_inverse(tiny)(1, 1) == 0.0);
}

TEST_CASE("pseudo_inverse agrees with the eigen-based oracle on PSD matrices") {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 200; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 4)(gen);
    const int rank = std::uniform_int_distribution<int>(0, n)(gen);
    const Mat s = oracle::random_psd(gen, n, rank);
    CHECK((pseudo_inverse(s) - oracle::psd_pinv(s)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("clamp_psd and require_psd") {
  Mat s(2, 2);
  s << 1.0, 0.0, 0.0, -1e-13;
  const Mat c = clamp_psd(s);
  CHECK(c(1, 1) == doctest::Approx(0.0));
  s(1, 1) = -0.5;
  CHECK_THROWS_AS(clamp_psd(s), NumericalError);
  CHECK_THROWS_AS(require_psd(s, "S"), InvalidModel);
  Mat asym = Mat::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(require_psd(asym, "S"), InvalidModel);
  CHECK_NOTHROW(require_psd(Mat::Zero(3, 3), "S"));
}

TEST_CASE("symmetric_sqrt squares back") {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 50; ++i) {
    const Mat s = oracle::random_psd(gen, 3, std::uniform_int_distribution<int>(0, 3)(gen));
    const Mat r = symmetric_sqrt(s);
    CHECK((r * r - s).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("huber_clip") {
  const Vec x = (Vec(2) << 3.0, 4.0).finished();
  CHECK(huber_clip(x, 10.0).isApprox(x));
  CHECK(huber_clip(x, kInf) == x);
  const Vec c = huber_clip(x, 1.0);
  CHECK(c.norm() == doctest::Approx(1.0));
  CHECK(c(0) / c(1) == doctest::Approx(0.75));
  CHECK(huber_clip(Vec::Zero(2), 1.0).isZero());
  CHECK_THROWS_AS(huber_clip(x, 0.0), InvalidParameter);
  CHECK_THROWS_AS(huber_clip(x, -1.0), InvalidParameter);
  CHECK_THROWS_AS(huber_clip(x, std::nan("")), InvalidParameter);

  // Mahalanobis clip: |x|_W = sqrt(x' W^- x)
  Mat w = Mat::Identity(2, 2) * 4.0;
  const ClipNorm n = ClipNorm::mahalanobis(SemiNorm(w));
  CHECK(n(x) == doctest::Approx(2.5));
  CHECK(n(huber_clip(x, 1.0, n)) == doctest::Approx(1.0));
}

TEST_CASE("SemiNorm ignores the null space of D") {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 2.0;
  const SemiNorm sn(d);
  CHECK(sn.squared((Vec(2) << 2.0, 100.0).finished()) == doctest::Approx(2.0));
  CHECK(sn.squared((Vec(2) << 0.0, 1.0).finished()) == 0.0);
  CHECK_THROWS_AS(sn.squared(Vec::Zero(3)), DimensionMismatch);
  const SemiNorm inv = SemiNorm::from_inverse(sn.d_minus());
  CHECK(inv.squared((Vec(2) << 2.0, 0.0).finished()) == doctest::Approx(2.0));
}

TEST_CASE("generalized inverse identities on random triples") {
  // Sigma Z' pi_bar = 0 and Z^Sigma Z K = K.
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int p = dim(gen), q = dim(gen);
    const Mat sigma = oracle::random_psd(gen, p, std::uniform_int_distribution<int>(0, p)(gen));
    const Mat z = oracle::random_rank(gen, q, p, std::uniform_int_distribution<int>(0, std::min(p, q))(gen));
    const Mat v = oracle::random_psd(gen, q, std::uniform_int_distribution<int>(0, q)(gen));
    const GenInvBundle g = gen_inverse_bundle(z, sigma);
    const Gain gain = compute_gain(sigma, z, v);
    worst = std::max(worst, (sigma * z.transpose() * g.pi_bar).cwiseAbs().maxCoeff());
    worst = std::max(worst, (g.z_sigma * z * gain.K - gain.K).cwiseAbs().maxCoeff());
    worst = std::max(worst, (g.pi + g.pi_bar - Mat::Identity(q, q)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("observable_seminorm vanishes on directions Z cannot see") {
  Mat z(1, 2);
  z << 1.0, 0.0;
  const SemiNorm d = observable_seminorm(z, Mat::Identity(2, 2));
  CHECK(d.squared((Vec(2) << 0.0, 5.0).finished()) == doctest::Approx(0.0));
  CHECK(d.squared((Vec(2) << 2.0, 0.0).finished()) == doctest::Approx(4.0));
}

TEST_CASE("derived seeds are distinct and reproducible") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 10000; ++k) seen.insert(derive_seed(42, k));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  Rng a(9, Stream::Noise), b(9, Stream::Noise), c(9, Stream::Additive);
  const double xa = a.gaussian();
  CHECK(xa == b.gaussian());
  CHECK(xa != c.gaussian());
}

TEST_CASE("Rng distributions have the expected moments") {
  Rng rng(123);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  long trials = 0;
  for (int i = 0; i < 20000; ++i) trials += rng.geometric_trials(0.1);
  CHECK(static_cast<double>(trials) / 20000 == doctest::Approx(10.0).epsilon(0.03));
  int hits = 0;
  for (int i = 0; i < 20000; ++i) hits += rng.bernoulli(0.25);
  CHECK(hits / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
  CHECK_FALSE(rng.bernoulli(0.0));
  CHECK(rng.bernoulli(1.0));
  // Cauchy median and quartiles
  std::vector<double> c(20001);
  for (auto& x : c) x = rng.cauchy(5.0, 2.0);
  std::sort(c.begin(), c.end());
  CHECK(c[10000] == doctest::Approx(5.0).epsilon(0.02));
  CHECK(c[15000] - c[5000] == doctest::Approx(4.0).epsilon(0.05));
}
