#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tts/common.hpp"
#include "tts/engine.hpp"

namespace tts {

// Finite probability distribution.
struct Distribution {
  Vec probs;

  void validate(double tol = 1e-12) const {
    if (probs.size() == 0) throw DimensionError("distribution: empty support");
    if ((probs.array() < -tol).any())
      throw ConfigError("distribution: negative probability");
    if (std::abs(probs.sum() - 1.0) > tol)
      throw ConfigError("distribution: probabilities do not sum to 1");
  }
};

// Total variation distance (1/2) sum_i |p_i - q_i|.
inline double tv_distance(const Distribution& p, const Distribution& q) {
  if (p.probs.size() != q.probs.size())
    throw DimensionError("tv_distance: support sizes differ");
  return 0.5 * (p.probs - q.probs).cwiseAbs().sum();
}

inline void check_row_stochastic(const Mat& P, double tol = 1e-12) {
  if (P.rows() != P.cols()) throw DimensionError("kernel matrix must be square");
  if ((P.array() < -tol).any()) throw ConfigError("kernel matrix has negative entries");
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (std::abs(P.row(i).sum() - 1.0) > tol)
      throw ConfigError("kernel matrix row does not sum to 1");
  }
}

// Controlled kernel over a finite state space: theta selects a row-stochastic
// matrix. Continuous-state problems (LQR) build ControlledKernel samplers
// directly and never pass through here; the TV/mixing operations below are
// finite-chain only.
struct FiniteKernel {
  std::function<Mat(const Vec&)> matrix;  // theta -> row-stochastic n x n

  Mat matrix_at(const Vec& theta) const {
    Mat P = matrix(theta);
    check_row_stochastic(P);
    return P;
  }

  ControlledKernel<int> as_sampler() const {
    auto fn = matrix;
    ControlledKernel<int> k;
    k.sampler = [fn](const int& s, const Vec& theta, RandomSource& rng) {
      const Mat P = fn(theta);
      return rng.pick(P.row(s).transpose());
    };
    return k;
  }
};

// Stationary distribution by power iteration on the transpose, started from
// several initial distributions. Requiring all starts to converge to the same
// fixed point is what detects reducible or periodic chains: for those, either
// some start never settles or two starts settle on different laws.
inline Distribution stationary_distribution(const Mat& P,
                                            std::int64_t max_iters = 1000000,
                                            double tol = 1e-10) {
  check_row_stochastic(P);
  const Eigen::Index n = P.rows();
  std::vector<Vec> mus;
  mus.push_back(Vec::Constant(n, 1.0 / static_cast<double>(n)));
  Vec point = Vec::Zero(n);
  point(0) = 1.0;
  if (n > 1) mus.push_back(point);

  const Mat Pt = P.transpose();
  for (std::int64_t it = 0; it <= max_iters; ++it) {
    bool all_fixed = true;
    for (const Vec& mu : mus) {
      if ((Pt * mu - mu).cwiseAbs().sum() > tol) {
        all_fixed = false;
        break;
      }
    }
    if (all_fixed) {
      for (std::size_t j = 1; j < mus.size(); ++j) {
        if ((mus[j] - mus[0]).cwiseAbs().sum() > 100 * tol)
          throw ConvergenceError(
              "stationary_distribution: starts disagree (chain not irreducible?)");
      }
      Distribution d{mus[0] / mus[0].sum()};
      d.validate(1e-9);
      return d;
    }
    for (Vec& mu : mus) {
      mu = Pt * mu;
      mu /= mu.sum();  // guard against drift
    }
  }
  throw ConvergenceError("stationary_distribution: power iteration did not converge");
}

namespace detail {

inline double max_row_tv(const Mat& Pk, const Distribution& mu) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < Pk.rows(); ++i) {
    const Distribution row{Pk.row(i).transpose()};
    worst = std::max(worst, tv_distance(row, mu));
  }
  return worst;
}

}  // namespace detail

// Smallest k with max over start states x of TV(P^k(x, .), mu_theta) <= alpha.
// k counts kernel applications from a point mass; k = 0 is the raw start.
inline std::int64_t empirical_mixing_time(const FiniteKernel& kernel, const Vec& theta,
                                          double alpha, std::int64_t cap = 100000) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw PreconditionError("empirical_mixing_time: alpha must lie in (0,1)");
  const Mat P = kernel.matrix_at(theta);
  const Distribution mu = stationary_distribution(P);
  Mat Pk = Mat::Identity(P.rows(), P.cols());
  for (std::int64_t k = 0; k <= cap; ++k) {
    if (detail::max_row_tv(Pk, mu) <= alpha) return k;
    Pk = Pk * P;
  }
  throw ConvergenceError("empirical_mixing_time: cap exceeded");
}

// Checks the uniform geometric ergodicity bound max-row TV(P_theta^k, mu_theta)
// <= m rho^k for all k <= k_max across the supplied thetas. Matrix powers
// accumulate rounding noise of order machine epsilon, so the comparison
// carries a 1e-12 absolute floor; without it the envelope underflows the
// attainable TV for fast-mixing chains at large k.
inline bool geometric_ergodicity_check(const FiniteKernel& kernel,
                                       const std::vector<Vec>& thetas, double m,
                                       double rho, std::int64_t k_max) {
  for (const Vec& theta : thetas) {
    const Mat P = kernel.matrix_at(theta);
    // The reference law must be resolved well below the comparison floor.
    const Distribution mu = stationary_distribution(P, 1000000, 1e-13);
    Mat Pk = Mat::Identity(P.rows(), P.cols());
    double envelope = m;
    for (std::int64_t k = 0; k <= k_max; ++k) {
      if (detail::max_row_tv(Pk, mu) > envelope + 1e-12) return false;
      Pk = Pk * P;
      envelope *= rho;
    }
  }
  return true;
}

}  // namespace tts
