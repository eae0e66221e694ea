#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "tts/common.hpp"
#include "tts/engine.hpp"
#include "tts/schedule.hpp"

namespace tts {

// ---------------------------------------------------------------------------
// Discrete-time infinite-horizon average-cost LQR:
//
//   x_{k+1} = A x_k + B u_k + w_k,   w_k ~ N(0, Psi),
//   u_k = -K x_k + sigma eps_k,      eps_k ~ N(0, I).
//
// Sign convention: K* = (B'PB + R)^{-1} B'PA with the control law u = -Kx,
// which makes E_{K*} = 0. (Some presentations fold the minus sign into K*
// itself; we keep the control law explicit instead.)
//
// J(K) = trace(P_K Psi_sigma) + sigma^2 trace(R). The constant term shifts
// J and J* equally, so the optimality gap J(K) - J* does not depend on it.
// ---------------------------------------------------------------------------

struct LqrInstance {
  Mat A;    // d1 x d1
  Mat B;    // d1 x d2
  Mat Q;    // SPD d1 x d1
  Mat R;    // SPD d2 x d2
  Mat Psi;  // SPD d1 x d1 process noise covariance
  double sigma = 0.1;  // exploration std
  double rho = 0.99;   // stability margin for ||A - BK||_2

  int d1() const { return static_cast<int>(A.rows()); }
  int d2() const { return static_cast<int>(B.cols()); }

  // Recomputed on demand, never cached.
  Mat psi_sigma() const { return Psi + sigma * sigma * B * B.transpose(); }

  void validate() const {
    if (A.rows() != A.cols()) throw DimensionError("lqr: A must be square");
    if (B.rows() != A.rows()) throw DimensionError("lqr: B row count must match A");
    auto check_spd = [](const Mat& m, const char* name, Eigen::Index n) {
      if (m.rows() != n || m.cols() != n)
        throw DimensionError(std::string("lqr: bad dimensions for ") + name);
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw SymmetryError(std::string("lqr: ") + name + " is not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat> es(m);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw ConfigError(std::string("lqr: ") + name + " is not positive definite");
    };
    check_spd(Q, "Q", A.rows());
    check_spd(R, "R", B.cols());
    check_spd(Psi, "Psi", A.rows());
    if (!(sigma >= 0.0)) throw ConfigError("lqr: sigma must be nonnegative");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("lqr: rho must lie in (0,1)");
  }
};

inline bool is_stable(const LqrInstance& inst, const Mat& K) {
  if (K.rows() != inst.d2() || K.cols() != inst.d1())
    throw DimensionError("is_stable: K has wrong dimensions");
  return operator_norm(inst.A - inst.B * K) < inst.rho;
}

namespace detail {

// Plain fixed-point iteration for X = S + M X M', converging whenever
// ||M||_2 < 1. Deterministic and dependency-free; adequate at desk scale.
inline Mat discrete_lyapunov(const Mat& M, const Mat& S, double target = 1e-12,
                             double accept = 1e-10, std::int64_t max_iters = 1000000) {
  if (operator_norm(M) >= 1.0)
    throw UnstableError("discrete_lyapunov: ||M||_2 >= 1");
  Mat X = symmetrized(S);
  double best = std::numeric_limits<double>::infinity();
  std::int64_t stall = 0;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    const Mat next = symmetrized(S + M * X * M.transpose());
    const double change = (next - X).cwiseAbs().maxCoeff();
    X = next;
    if (change < best) {
      best = change;
      stall = 0;
    } else if (++stall > 100) {
      break;  // rounding floor reached
    }
    if (change <= target) break;
  }
  const double residual = (X - S - M * X * M.transpose()).norm();
  if (residual > accept)
    throw ConvergenceError("discrete_lyapunov: residual " + std::to_string(residual) +
                           " above acceptance threshold");
  return X;
}

}  // namespace detail

// Cost-to-go matrix of a fixed gain: P_K = Q + K'RK + (A-BK)' P_K (A-BK).
inline Mat solve_pk(const LqrInstance& inst, const Mat& K) {
  const Mat M = inst.A - inst.B * K;
  if (operator_norm(M) >= 1.0) throw UnstableError("solve_pk: ||A - BK||_2 >= 1");
  const Mat S = inst.Q + K.transpose() * inst.R * K;
  return detail::discrete_lyapunov(M.transpose(), S);
}

// Stationary state covariance: Sigma_K = Psi_sigma + (A-BK) Sigma_K (A-BK)'.
inline Mat solve_sigma(const LqrInstance& inst, const Mat& K) {
  const Mat M = inst.A - inst.B * K;
  if (operator_norm(M) >= 1.0) throw UnstableError("solve_sigma: ||A - BK||_2 >= 1");
  return detail::discrete_lyapunov(M, inst.psi_sigma());
}

inline double cost_J(const LqrInstance& inst, const Mat& K) {
  const Mat pk = solve_pk(inst, K);
  return (pk * inst.psi_sigma()).trace() + inst.sigma * inst.sigma * inst.R.trace();
}

struct DareSolution {
  Mat P;
  Mat K_star;
  double J_star = 0.0;
};

// Riccati fixed point P = A'PA + Q - A'PB (B'PB + R)^{-1} B'PA by iteration
// from P_0 = Q. Residual target 1e-12, acceptance 1e-10.
inline DareSolution solve_dare(const LqrInstance& inst, double target = 1e-12,
                               double accept = 1e-10, std::int64_t max_iters = 1000000) {
  const Mat& A = inst.A;
  const Mat& B = inst.B;
  auto riccati_map = [&](const Mat& P) {
    const Mat btpb_r = B.transpose() * P * B + inst.R;
    const Mat btpa = B.transpose() * P * A;
    return symmetrized(A.transpose() * P * A + inst.Q -
                       btpa.transpose() * btpb_r.llt().solve(btpa));
  };

  Mat P = inst.Q;
  double best = std::numeric_limits<double>::infinity();
  std::int64_t stall = 0;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    const Mat next = riccati_map(P);
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (change < best) {
      best = change;
      stall = 0;
    } else if (++stall > 100) {
      break;
    }
    if (change <= target) break;
  }
  const double residual = (riccati_map(P) - P).norm();
  if (residual > accept)
    throw ConvergenceError("solve_dare: residual plateaued at " + std::to_string(residual) +
                           "; (A,B) may not be stabilizable");

  DareSolution out;
  out.P = P;
  const Mat btpb_r = B.transpose() * P * B + inst.R;
  out.K_star = btpb_r.llt().solve(B.transpose() * P * A);
  out.J_star = cost_J(inst, out.K_star);
  return out;
}

// Natural gradient E_K = 2(R + B'P_K B)K - 2 B'P_K A; the full gradient is
// grad J(K) = E_K Sigma_K.
inline Mat natural_gradient_E(const LqrInstance& inst, const Mat& K) {
  const Mat pk = solve_pk(inst, K);
  return 2.0 * (inst.R + inst.B.transpose() * pk * inst.B) * K -
         2.0 * inst.B.transpose() * pk * inst.A;
}

inline Mat gradient_J(const LqrInstance& inst, const Mat& K) {
  return natural_gradient_E(inst, K) * solve_sigma(inst, K);
}

struct PlCheckResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Gradient-domination inequality
//   J(K) - J(K*) <= ||Sigma_{K*}|| / (sigma_min(Sigma_K)^2 sigma_min(R)) ||grad J(K)||_F^2.
inline PlCheckResult pl_inequality_check(const LqrInstance& inst, const Mat& K) {
  const DareSolution opt = solve_dare(inst);
  PlCheckResult out;
  out.lhs = cost_J(inst, K) - opt.J_star;
  const Mat sigma_star = solve_sigma(inst, opt.K_star);
  const Mat sigma_k = solve_sigma(inst, K);
  Eigen::JacobiSVD<Mat> svd_k(sigma_k);
  Eigen::JacobiSVD<Mat> svd_r(inst.R);
  const double smin_sigma = svd_k.singularValues().minCoeff();
  const double smin_r = svd_r.singularValues().minCoeff();
  out.rhs = operator_norm(sigma_star) / (smin_sigma * smin_sigma * smin_r) *
            gradient_J(inst, K).squaredNorm();
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

// ---------------------------------------------------------------------------
// svec / smat: isometric vectorization of symmetric matrices. Row-major upper
// triangle, off-diagonal entries weighted by sqrt(2), so that
// <svec(M), svec(N)> = trace(MN).
// ---------------------------------------------------------------------------

inline Vec svec(const Mat& M, double sym_tol = 1e-9) {
  if (M.rows() != M.cols()) throw DimensionError("svec: matrix must be square");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > sym_tol)
    throw SymmetryError("svec: matrix is not symmetric");
  const Eigen::Index n = M.rows();
  Vec v(n * (n + 1) / 2);
  const double rt2 = std::sqrt(2.0);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      v(idx++) = i == j ? M(i, j) : rt2 * 0.5 * (M(i, j) + M(j, i));
  return v;
}

inline Mat smat(const Vec& v) {
  // n(n+1)/2 = len  =>  n = (-1 + sqrt(1 + 8 len)) / 2
  const auto len = v.size();
  const auto n = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
  if (n * (n + 1) / 2 != len) throw DimensionError("smat: length is not triangular");
  Mat M(n, n);
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double x = v(idx++);
      if (i == j) {
        M(i, j) = x;
      } else {
        M(i, j) = x * inv_rt2;
        M(j, i) = x * inv_rt2;
      }
    }
  return M;
}

// State-control quadratic feature phi(x, u) = svec([x;u][x;u]').
inline Vec phi_feature(const Vec& x, const Vec& u) {
  Vec z(x.size() + u.size());
  z << x, u;
  return svec(z * z.transpose());
}

// ---------------------------------------------------------------------------
// Online natural actor-critic.
// ---------------------------------------------------------------------------

struct CriticState {
  double J_hat = 0.0;
  Mat Omega_hat;  // symmetric (d1+d2) x (d1+d2)

  Mat omega11(int d1) const { return Omega_hat.topLeftCorner(d1, d1); }
  Mat omega21(int d1) const {
    return Omega_hat.bottomLeftCorner(Omega_hat.rows() - d1, d1);
  }
  Mat omega22(int d1) const {
    const auto d2 = Omega_hat.rows() - d1;
    return Omega_hat.bottomRightCorner(d2, d2);
  }
};

struct LqrSample {
  Vec x, u, x_next, u_next;
};

// Two critic update rules, both driven by the instantaneous cost
// c = x'Qx + u'Ru:
//   Bellman:        omega' = omega - beta (M_{x,u,x',u'} omega - c_{x,u})
//                   with the next-state feature difference phi - phi';
//   SimplifiedAlg2: drops the next-state feature from the Omega update.
// Bellman is the default; it is the variant with the documented fixed point
// at (J(K), svec(Omega_K)).
enum class CriticForm { Bellman, SimplifiedAlg2 };

inline CriticState critic_step(const CriticState& state, const LqrSample& t,
                               const LqrInstance& inst, double beta, CriticForm form) {
  const double cost = t.x.dot(inst.Q * t.x) + t.u.dot(inst.R * t.u);
  CriticState next;
  next.J_hat = state.J_hat - beta * (state.J_hat - cost);
  if (form == CriticForm::Bellman) {
    const Vec feat = phi_feature(t.x, t.u);
    const Vec feat_next = phi_feature(t.x_next, t.u_next);
    const Vec w = svec(state.Omega_hat);
    const double td = state.J_hat + (feat - feat_next).dot(w) - cost;
    next.Omega_hat = symmetrized(smat(w - beta * td * feat));
  } else {
    Vec z(t.x.size() + t.u.size());
    z << t.x, t.u;
    const double td = z.dot(state.Omega_hat * z) + state.J_hat - cost;
    next.Omega_hat = symmetrized(state.Omega_hat - beta * td * (z * z.transpose()));
  }
  if (!std::isfinite(next.J_hat)) throw NonFiniteError("critic_step: J_hat diverged");
  require_finite(next.Omega_hat, "critic_step: Omega_hat");
  return next;
}

// Actor update K' = K - alpha (Omega22 K - Omega21). With Omega_hat = Omega_K
// exactly, the step direction is -alpha E_K / 2 (the factor 2 of E_K is
// absorbed into alpha).
inline Mat actor_step(const Mat& K, const CriticState& critic, double alpha) {
  const int d1 = static_cast<int>(K.cols());
  return K - alpha * (critic.omega22(d1) * K - critic.omega21(d1));
}

// Exact critic target omega*(K) = (J(K), svec(Omega_K)).
inline CriticState exact_critic(const LqrInstance& inst, const Mat& K) {
  const Mat pk = solve_pk(inst, K);
  const int d1 = inst.d1();
  const int d2 = inst.d2();
  Mat omega(d1 + d2, d1 + d2);
  omega.topLeftCorner(d1, d1) = inst.Q + inst.A.transpose() * pk * inst.A;
  omega.topRightCorner(d1, d2) = inst.A.transpose() * pk * inst.B;
  omega.bottomLeftCorner(d2, d1) = inst.B.transpose() * pk * inst.A;
  omega.bottomRightCorner(d2, d2) = inst.R + inst.B.transpose() * pk * inst.B;
  CriticState c;
  c.J_hat = (pk * inst.psi_sigma()).trace() + inst.sigma * inst.sigma * inst.R.trace();
  c.Omega_hat = symmetrized(omega);
  return c;
}

inline Vec pack_critic(const CriticState& c) {
  const Vec w = svec(c.Omega_hat);
  Vec out(1 + w.size());
  out(0) = c.J_hat;
  out.tail(w.size()) = w;
  return out;
}

inline CriticState unpack_critic(const Vec& omega) {
  CriticState c;
  c.J_hat = omega(0);
  c.Omega_hat = smat(omega.tail(omega.size() - 1));
  return c;
}

// Rejection sampling of a stable initial gain: i.i.d. Gaussian entries with a
// geometrically shrinking scale until ||A - B K||_2 < rho.
inline Mat random_stable_gain(const LqrInstance& inst, RandomSource& rng,
                              int max_attempts = 10000) {
  double scale = 1.0;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Mat K = scale * rng.gauss_mat(inst.d2(), inst.d1());
    if (is_stable(inst, K)) return K;
    scale *= 0.95;
  }
  throw ConvergenceError("random_stable_gain: no stable gain found");
}

enum class Safeguard { Abort, Log };

struct LqrAcOptions {
  std::optional<Mat> init_K;
  Safeguard safeguard = Safeguard::Abort;
  CriticForm critic_form = CriticForm::Bellman;
  std::int64_t eval_stride = 1;  // J(K_k) costs a Lyapunov solve per evaluation
  double critic_j_init = 1.0;    // scale of the random initial J_hat
  double critic_omega_init = 1.0;  // scale of the random initial Omega_hat
};

struct LqrAcResult {
  std::vector<RunRecord> records;
  Mat final_K;
  CriticState final_critic;
  std::optional<std::int64_t> aborted_at;
};

// The online actor-critic loop as an instance of the generic engine:
// theta = vec(K), omega = (J_hat, svec(Omega_hat)), X = (x, u, x', u').
// The kernel advances the system one transition under the freshly updated
// gain, so the control at the new state is always drawn from the current
// policy iterate. The metric is J(K_k) - J*, evaluated every eval_stride
// iterations while K_k is stable.
inline LqrAcResult run_lqr_ac(const LqrInstance& inst, const StepSchedule& schedule,
                              std::int64_t n_iters, std::uint64_t seed,
                              const LqrAcOptions& options = {}) {
  inst.validate();
  if (options.eval_stride < 1) throw ConfigError("run_lqr_ac: eval_stride must be >= 1");
  const int d1 = inst.d1();
  const int d2 = inst.d2();
  RandomSource rng(seed);

  const DareSolution opt = solve_dare(inst);
  const Eigen::LLT<Mat> psi_chol(inst.Psi);

  Mat K0;
  if (options.init_K) {
    K0 = *options.init_K;
    if (!is_stable(inst, K0)) throw UnstableError("run_lqr_ac: supplied init_K is unstable");
  } else {
    K0 = random_stable_gain(inst, rng);
  }

  CriticState critic0;
  critic0.J_hat = options.critic_j_init * rng.uniform();
  critic0.Omega_hat =
      symmetrized(options.critic_omega_init * rng.gauss_mat(d1 + d2, d1 + d2));

  auto vec_of = [d1, d2](const Mat& K) {
    return Vec(Eigen::Map<const Vec>(K.data(), d2 * d1));
  };
  auto mat_of = [d1, d2](const Vec& theta) {
    return Mat(Eigen::Map<const Mat>(theta.data(), d2, d1));
  };

  TwoTimescaleProblem<LqrSample> problem;
  problem.grad_oracle = [d1, mat_of](const Vec& theta, const Vec& omega, const LqrSample&) {
    const Mat K = mat_of(theta);
    const CriticState c = unpack_critic(omega);
    const Mat dir = c.omega22(d1) * K - c.omega21(d1);
    return Vec(Eigen::Map<const Vec>(dir.data(), dir.size()));
  };
  problem.aux_oracle = [&inst](const Vec&, const Vec& omega, const LqrSample& s) {
    const double cost = s.x.dot(inst.Q * s.x) + s.u.dot(inst.R * s.u);
    const Vec feat = phi_feature(s.x, s.u);
    const Vec feat_next = phi_feature(s.x_next, s.u_next);
    Vec g(omega.size());
    g(0) = omega(0) - cost;
    const Vec w = omega.tail(omega.size() - 1);
    g.tail(omega.size() - 1) = feat * (omega(0) + (feat - feat_next).dot(w) - cost);
    return g;
  };
  problem.kernel.sampler = [&inst, &psi_chol, mat_of](const LqrSample& s, const Vec& theta,
                                                      RandomSource& r) {
    const Mat K = mat_of(theta);
    LqrSample next;
    next.x = s.x_next;
    next.u = s.u_next;
    next.x_next = inst.A * s.x_next + inst.B * s.u_next +
                  psi_chol.matrixL() * r.gauss_vec(inst.d1());
    next.u_next = -K * next.x_next + inst.sigma * r.gauss_vec(inst.d2());
    return next;
  };

  // Map the simplified critic onto the engine by swapping the aux oracle.
  if (options.critic_form == CriticForm::SimplifiedAlg2) {
    problem.aux_oracle = [&inst](const Vec&, const Vec& omega, const LqrSample& s) {
      const double cost = s.x.dot(inst.Q * s.x) + s.u.dot(inst.R * s.u);
      Vec z(s.x.size() + s.u.size());
      z << s.x, s.u;
      const Mat omega_hat = smat(omega.tail(omega.size() - 1));
      const double td = z.dot(omega_hat * z) + omega(0) - cost;
      Vec g(omega.size());
      g(0) = omega(0) - cost;
      g.tail(omega.size() - 1) = td * svec(z * z.transpose());
      return g;
    };
  }

  OptState<LqrSample> state;
  state.theta = vec_of(K0);
  state.omega = pack_critic(critic0);
  state.sample.x = rng.gauss_vec(d1);
  state.sample.u = -K0 * state.sample.x + inst.sigma * rng.gauss_vec(d2);
  state.sample.x_next =
      inst.A * state.sample.x + inst.B * state.sample.u + psi_chol.matrixL() * rng.gauss_vec(d1);
  state.sample.u_next = -K0 * state.sample.x_next + inst.sigma * rng.gauss_vec(d2);

  Monitor<LqrSample> monitor = [&inst, &opt, &options, mat_of](const OptState<LqrSample>& s) {
    MonitorResult m;
    const Mat K = mat_of(s.theta);
    m.stable = is_stable(inst, K);
    if (m.stable && s.k % options.eval_stride == 0) {
      m.metric = cost_J(inst, K) - opt.J_star;
      m.aux_error = (s.omega - pack_critic(exact_critic(inst, K))).squaredNorm();
    }
    if (!m.stable && options.safeguard == Safeguard::Abort) m.abort_run = true;
    return m;
  };

  RunResult<LqrSample> rr = run(problem, schedule, std::move(state), n_iters, monitor, rng);

  LqrAcResult out;
  out.records = std::move(rr.records);
  out.final_K = mat_of(rr.final_state.theta);
  out.final_critic = unpack_critic(rr.final_state.omega);
  out.aborted_at = rr.aborted_at;
  return out;
}

// The instance used throughout the bundled experiments: a mildly coupled
// 3-state, 2-input system with identity costs.
inline LqrInstance paper_lqr_instance(double sigma = 0.1, double rho = 0.99) {
  LqrInstance inst;
  inst.A.resize(3, 3);
  inst.A << 0.5, 0.01, 0.0,
            0.01, 0.5, 0.01,
            0.0, 0.01, 0.5;
  inst.B.resize(3, 2);
  inst.B << 1.0, 0.1,
            0.0, 0.1,
            0.0, 0.1;
  inst.Q = Mat::Identity(3, 3);
  inst.R = Mat::Identity(2, 2);
  inst.Psi = Mat::Identity(3, 3);
  inst.sigma = sigma;
  inst.rho = rho;
  return inst;
}

}  // namespace tts
