#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tts/common.hpp"
#include "tts/engine.hpp"
#include "tts/markov.hpp"
#include "tts/schedule.hpp"

namespace tts {

// ---------------------------------------------------------------------------
// Synthetic problem instances with analytically known theta*, omega*(theta)
// and f*, one per function regime. All four share the same skeleton:
//
//   H(theta, omega, s) = grad f(theta) + C_omega (omega - W theta) + n_H(s, theta)
//   G(theta, omega, s) = G_gain (omega - W theta) + n_G(s, theta)
//
// over a 2-state chain whose transition row from state 0 is
// (1-p, p) with p = sigmoid(c * theta_0); the row from state 1 is (1/2, 1/2).
// The stationary law is then mu_theta = (1/2, p) / (1/2 + p) in closed form,
// and the per-state noise offsets (mu_1, -mu_0) have exactly zero stationary
// mean for every theta.
// ---------------------------------------------------------------------------

struct QuadraticTestbed {
  Regime regime = Regime::StronglyConvex;
  int d = 1;
  int r = 1;

  Mat A_f;      // strongly convex curvature
  Mat W;        // omega*(theta) = W theta
  Mat G_gain;   // SPD gain of the auxiliary operator
  Mat C_omega;  // coupling of the auxiliary error into H
  double noise_scale = 1.0;
  double chain_c = 1.0;  // sigmoid slope of the chain link
  Vec h_dir;             // noise direction for H (dim d)
  Vec g_dir;             // noise direction for G (dim r)

  // Convex regime: f = sum_i huber(v_i' theta), V has fewer rows than d so
  // flat directions exist.
  Mat V;
  double huber_delta = 1.0;

  // PL regime: f = 0.5 ||g(theta)||^2 with g = eta(L theta),
  // eta(t) = t + pl_amp sin(t). L has full row rank.
  Mat Lmat;
  double pl_amp = 0.25;

  double lambda_f = 0.0;  // documented strong-convexity / PL constant
  double lambda_g = 0.0;  // min eigenvalue of G_gain

  // Lipschitz constant of theta -> transition matrix in max-row TV,
  // from the sigmoid link (slope c/4).
  double tv_lipschitz() const { return chain_c / 4.0; }

  double chain_p(const Vec& theta) const {
    return 1.0 / (1.0 + std::exp(-chain_c * theta(0)));
  }

  Mat chain_matrix(const Vec& theta) const {
    const double p = chain_p(theta);
    Mat P(2, 2);
    P << 1.0 - p, p, 0.5, 0.5;
    return P;
  }

  // Closed-form stationary law of the 2-state chain.
  Vec stationary(const Vec& theta) const {
    const double p = chain_p(theta);
    Vec mu(2);
    mu << 0.5, p;
    return mu / (0.5 + p);
  }

  double noise_weight(int s, const Vec& theta) const {
    const Vec mu = stationary(theta);
    return s == 0 ? mu(1) : -mu(0);
  }

  Vec noise_h(int s, const Vec& theta) const {
    return noise_scale * noise_weight(s, theta) * h_dir;
  }

  Vec noise_g(int s, const Vec& theta) const {
    return noise_scale * noise_weight(s, theta) * g_dir;
  }

  double f(const Vec& theta) const {
    switch (regime) {
      case Regime::StronglyConvex:
        return 0.5 * theta.dot(A_f * theta);
      case Regime::Convex: {
        const Vec t = V * theta;
        double total = 0.0;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          const double a = std::abs(t(i));
          total += a <= huber_delta ? 0.5 * t(i) * t(i)
                                    : huber_delta * (a - 0.5 * huber_delta);
        }
        return total;
      }
      case Regime::PL: {
        const Vec g = eta(Lmat * theta);
        return 0.5 * g.squaredNorm();
      }
      case Regime::NonConvex: {
        double total = 0.0;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          const double w = theta(i) * theta(i) - 1.0;
          total += 0.25 * w * w;
        }
        return total;
      }
    }
    return 0.0;
  }

  Vec grad_f(const Vec& theta) const {
    switch (regime) {
      case Regime::StronglyConvex:
        return A_f * theta;
      case Regime::Convex: {
        Vec t = V * theta;
        for (Eigen::Index i = 0; i < t.size(); ++i)
          t(i) = std::clamp(t(i), -huber_delta, huber_delta);
        return V.transpose() * t;
      }
      case Regime::PL: {
        const Vec z = Lmat * theta;
        const Vec g = eta(z);
        Vec dz(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
          dz(i) = (1.0 + pl_amp * std::cos(z(i))) * g(i);
        return Lmat.transpose() * dz;
      }
      case Regime::NonConvex: {
        Vec g(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i)
          g(i) = theta(i) * theta(i) * theta(i) - theta(i);
        return g;
      }
    }
    return Vec::Zero(theta.size());
  }

  // Exact expectations over the stationary law (noise integrates to zero).
  Vec exact_EH(const Vec& theta, const Vec& omega) const {
    return grad_f(theta) + C_omega * (omega - W * theta);
  }

  Vec exact_EG(const Vec& theta, const Vec& omega) const {
    return G_gain * (omega - W * theta);
  }

 private:
  Vec eta(Vec z) const {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += pl_amp * std::sin(z(i));
    return z;
  }
};

struct RegimeProblem {
  std::shared_ptr<const QuadraticTestbed> bed;
  TwoTimescaleProblem<int> problem;
  FiniteKernel finite_kernel;
};

namespace detail {

inline Mat random_spd(int n, double lo, double hi, RandomSource& rng) {
  const Mat g = rng.gauss_mat(n, n);
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat q = qr.householderQ();
  Vec eig(n);
  for (int i = 0; i < n; ++i)
    eig(i) = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return q * eig.asDiagonal() * q.transpose();
}

// Matrix with prescribed singular values, rows x cols, rows <= cols.
inline Mat random_with_singular_values(int rows, int cols, double lo, double hi,
                                       RandomSource& rng) {
  Eigen::HouseholderQR<Mat> qr_u(rng.gauss_mat(rows, rows));
  Eigen::HouseholderQR<Mat> qr_v(rng.gauss_mat(cols, cols));
  const Mat u = qr_u.householderQ();
  const Mat v = qr_v.householderQ();
  Mat s = Mat::Zero(rows, cols);
  for (int i = 0; i < rows; ++i)
    s(i, i) = rows == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (rows - 1);
  return u * s * v.transpose();
}

}  // namespace detail

inline RegimeProblem make_regime_testbed(Regime regime, int d, int r,
                                         std::uint64_t seed,
                                         double noise_scale = 1.0,
                                         double coupling = 1.0) {
  if (d < 1 || r < 1) throw ConfigError("make_regime_testbed: d, r must be >= 1");
  RandomSource rng(seed);

  auto bed = std::make_shared<QuadraticTestbed>();
  bed->regime = regime;
  bed->d = d;
  bed->r = r;
  bed->noise_scale = noise_scale;
  bed->chain_c = 1.0;
  bed->A_f = detail::random_spd(d, 1.0, 2.0, rng);
  bed->G_gain = detail::random_spd(r, 1.0, 2.0, rng);
  bed->W = rng.gauss_mat(r, d) / std::sqrt(static_cast<double>(d));
  bed->C_omega = coupling * rng.gauss_mat(d, r) / std::sqrt(static_cast<double>(r));
  bed->h_dir = rng.gauss_vec(d).normalized();
  bed->g_dir = rng.gauss_vec(r).normalized();
  bed->lambda_g = Eigen::SelfAdjointEigenSolver<Mat>(bed->G_gain).eigenvalues().minCoeff();

  switch (regime) {
    case Regime::StronglyConvex:
      bed->lambda_f = Eigen::SelfAdjointEigenSolver<Mat>(bed->A_f).eigenvalues().minCoeff();
      break;
    case Regime::Convex: {
      const int m = std::max(1, d - 1);
      bed->V = detail::random_with_singular_values(m, d, 0.7, 1.3, rng);
      bed->huber_delta = 1.0;
      bed->lambda_f = 0.0;
      break;
    }
    case Regime::PL: {
      const int m = std::max(1, d - 1);
      bed->Lmat = detail::random_with_singular_values(m, d, 0.7, 1.3, rng);
      bed->pl_amp = 0.25;
      Eigen::JacobiSVD<Mat> svd(bed->Lmat);
      const double smin = svd.singularValues().minCoeff();
      bed->lambda_f = std::pow((1.0 - bed->pl_amp) * smin, 2);
      // The PL inequality must hold at construction; probe random points.
      for (int i = 0; i < 100; ++i) {
        const Vec theta = 2.0 * rng.gauss_vec(d);
        const double lhs = 0.5 * bed->grad_f(theta).squaredNorm();
        const double rhs = bed->lambda_f * bed->f(theta);
        if (lhs < rhs - 1e-12)
          throw ConstructionError("make_regime_testbed: PL inequality failed at a probe point");
      }
      break;
    }
    case Regime::NonConvex:
      bed->lambda_f = 0.0;
      break;
  }

  RegimeProblem out;
  out.bed = bed;

  out.finite_kernel.matrix = [bed](const Vec& theta) { return bed->chain_matrix(theta); };

  out.problem.grad_oracle = [bed](const Vec& theta, const Vec& omega, const int& s) {
    return Vec(bed->exact_EH(theta, omega) + bed->noise_h(s, theta));
  };
  out.problem.aux_oracle = [bed](const Vec& theta, const Vec& omega, const int& s) {
    return Vec(bed->exact_EG(theta, omega) + bed->noise_g(s, theta));
  };
  out.problem.kernel = out.finite_kernel.as_sampler();

  OptimumInfo opt;
  if (regime == Regime::StronglyConvex) opt.theta_star = Vec::Zero(d);
  opt.f_star = 0.0;
  const Mat W = bed->W;
  opt.omega_star = [W](const Vec& theta) { return Vec(W * theta); };
  opt.f = [bed](const Vec& theta) { return bed->f(theta); };
  opt.grad_f = [bed](const Vec& theta) { return bed->grad_f(theta); };
  out.problem.optimum = std::move(opt);

  return out;
}

// Per-regime convergence metric:
//   StronglyConvex: ||theta - theta*||^2
//   Convex:         f(theta_bar) - f*  with the alpha-weighted running average
//   PL:             f(theta) - f*
//   NonConvex:      min over t <= k of ||grad f(theta_t)||^2
// All monitors log the auxiliary error ||omega - W theta||^2.
inline Monitor<int> make_regime_monitor(const RegimeProblem& rp, const StepSchedule& sched) {
  auto bed = rp.bed;
  switch (bed->regime) {
    case Regime::StronglyConvex:
      return [bed](const OptState<int>& s) {
        MonitorResult m;
        m.metric = s.theta.squaredNorm();
        m.aux_error = (s.omega - bed->W * s.theta).squaredNorm();
        return m;
      };
    case Regime::Convex: {
      Vec wsum = Vec::Zero(bed->d);
      double wtotal = 0.0;
      return [bed, sched, wsum, wtotal](const OptState<int>& s) mutable {
        const double a = sched.alpha(s.k);
        wsum += a * s.theta;
        wtotal += a;
        MonitorResult m;
        m.metric = bed->f(wsum / wtotal);
        m.aux_error = (s.omega - bed->W * s.theta).squaredNorm();
        return m;
      };
    }
    case Regime::PL:
      return [bed](const OptState<int>& s) {
        MonitorResult m;
        m.metric = bed->f(s.theta);
        m.aux_error = (s.omega - bed->W * s.theta).squaredNorm();
        return m;
      };
    case Regime::NonConvex: {
      double best = std::numeric_limits<double>::infinity();
      return [bed, best](const OptState<int>& s) mutable {
        best = std::min(best, bed->grad_f(s.theta).squaredNorm());
        MonitorResult m;
        m.metric = best;
        m.aux_error = (s.omega - bed->W * s.theta).squaredNorm();
        return m;
      };
    }
  }
  return {};
}

}  // namespace tts
