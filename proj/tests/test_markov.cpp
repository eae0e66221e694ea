#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tts/markov.hpp"

using namespace tts;

namespace {

Distribution dist(std::initializer_list<double> v) {
  Vec p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return Distribution{p};
}

Mat two_state(double p00, double p10) {
  Mat P(2, 2);
  P << p00, 1 - p00, p10, 1 - p10;
  return P;
}

FiniteKernel fixed_kernel(const Mat& P) {
  FiniteKernel k;
  k.matrix = [P](const Vec&) { return P; };
  return k;
}

}  // namespace

TEST_CASE("tv distance basics") {
  CHECK(tv_distance(dist({0.3, 0.7}), dist({0.3, 0.7})) == 0.0);
  CHECK(tv_distance(dist({1.0, 0.0}), dist({0.0, 1.0})) == 1.0);
  CHECK(tv_distance(dist({0.5, 0.5}), dist({0.75, 0.25})) == Catch::Approx(0.25).margin(1e-15));
  CHECK_THROWS_AS(tv_distance(dist({1.0}), dist({0.5, 0.5})), DimensionError);
}

TEST_CASE("tv distance is a metric on random triples") {
  RandomSource rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.raw() % 5);
    auto random_dist = [&]() {
      Vec p(n);
      for (int i = 0; i < n; ++i) p(i) = rng.uniform() + 1e-3;
      p /= p.sum();
      return Distribution{p};
    };
    const auto p = random_dist(), q = random_dist(), r = random_dist();
    const double pq = tv_distance(p, q);
    CHECK(pq >= 0.0);
    CHECK(pq <= 1.0);
    CHECK(pq == Catch::Approx(tv_distance(q, p)).margin(1e-12));
    CHECK(pq <= tv_distance(p, r) + tv_distance(r, q) + 1e-12);
  }
}

TEST_CASE("stationary distribution of simple chains") {
  // Doubly stochastic: uniform.
  const Distribution u = stationary_distribution(two_state(0.3, 0.7));
  CHECK(u.probs(0) == Catch::Approx(0.5).margin(1e-9));

  // mu P = mu solved exactly: 0.1 mu0 = 0.5 mu1 -> mu = (5/6, 1/6).
  const Distribution m = stationary_distribution(two_state(0.9, 0.5));
  CHECK(m.probs(0) == Catch::Approx(5.0 / 6.0).margin(1e-9));
  CHECK(m.probs(1) == Catch::Approx(1.0 / 6.0).margin(1e-9));
}

TEST_CASE("stationary distribution is a kernel fixed point") {
  RandomSource rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.raw() % 4);
    Mat P(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) P(i, j) = rng.uniform() + 0.05;
      P.row(i) /= P.row(i).sum();
    }
    const Distribution mu = stationary_distribution(P);
    CHECK((mu.probs.transpose() * P - mu.probs.transpose()).cwiseAbs().sum() <= 1e-10);
  }
}

TEST_CASE("reducible and periodic chains are rejected") {
  CHECK_THROWS_AS(stationary_distribution(Mat::Identity(2, 2)), ConvergenceError);
  CHECK_THROWS_AS(stationary_distribution(two_state(0.0, 1.0), 20000), ConvergenceError);
}

TEST_CASE("empirical mixing time") {
  const Mat P = two_state(0.9, 0.5);
  const FiniteKernel kernel = fixed_kernel(P);
  const Vec theta = Vec::Zero(1);

  // Rank-one chain mixes in one step from any point mass.
  Mat rank_one(2, 2);
  rank_one << 0.25, 0.75, 0.25, 0.75;
  CHECK(empirical_mixing_time(fixed_kernel(rank_one), theta, 0.5) == 1);
  CHECK(empirical_mixing_time(fixed_kernel(rank_one), theta, 0.1) == 1);

  // Already mixed at k = 0 when alpha exceeds the worst initial TV (5/6).
  CHECK(empirical_mixing_time(kernel, theta, 0.9) == 0);

  // Brute force agrees with the second-eigenvalue cross-check: TV contracts
  // by |lambda_2| = 0.4 per step from TV_0 = 5/6.
  const std::int64_t k = empirical_mixing_time(kernel, theta, 0.1);
  const std::int64_t predicted = static_cast<std::int64_t>(
      std::ceil(std::log((5.0 / 6.0) / 0.1) / std::log(1.0 / 0.4)));
  CHECK(k == predicted);

  // Non-increasing in alpha.
  std::int64_t prev = empirical_mixing_time(kernel, theta, 0.01);
  for (double alpha : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const std::int64_t cur = empirical_mixing_time(kernel, theta, alpha);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("geometric ergodicity check") {
  const Vec theta = Vec::Zero(1);

  Mat rank_one(2, 2);
  rank_one << 0.25, 0.75, 0.25, 0.75;
  CHECK(geometric_ergodicity_check(fixed_kernel(rank_one), {theta}, 1.0, 0.5, 30));

  // Vacuous bound.
  CHECK(geometric_ergodicity_check(fixed_kernel(two_state(0.9, 0.5)), {theta}, 1e6, 0.999, 10));

  // Exact contraction factor 0.4 for the two-state chain.
  CHECK(geometric_ergodicity_check(fixed_kernel(two_state(0.9, 0.5)), {theta}, 1.0, 0.4, 50));
  // A smaller rate must fail once k grows.
  CHECK_FALSE(
      geometric_ergodicity_check(fixed_kernel(two_state(0.9, 0.5)), {theta}, 1.0, 0.2, 50));
}

TEST_CASE("finite kernel sampler follows the matrix") {
  const Mat P = two_state(0.8, 0.3);
  const FiniteKernel kernel = fixed_kernel(P);
  auto sampler = kernel.as_sampler();
  RandomSource rng(123);
  int visits0 = 0;
  int s = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    s = sampler.sampler(s, Vec::Zero(1), rng);
    if (s == 0) visits0++;
  }
  const Distribution mu = stationary_distribution(P);
  CHECK(static_cast<double>(visits0) / n == Catch::Approx(mu.probs(0)).margin(0.01));
}

TEST_CASE("row-stochastic validation") {
  Mat bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  FiniteKernel k = fixed_kernel(bad);
  CHECK_THROWS_AS(k.matrix_at(Vec::Zero(1)), ConfigError);
}
