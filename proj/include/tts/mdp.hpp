#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "tts/common.hpp"
#include "tts/engine.hpp"
#include "tts/markov.hpp"

namespace tts {

// ---------------------------------------------------------------------------
// Tabular average-reward MDP with a softmax policy and a linear critic.
// The actor ascends J(theta) = E_{s~mu_theta, a~pi_theta}[R(s,a)]; the
// framework minimizes, so the problem instance below descends on -J.
// ---------------------------------------------------------------------------

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  // transition(s * n_actions + a, s') = P(s' | s, a)
  Mat transitions;
  Mat rewards;   // n_states x n_actions, entries in [-1, 1]
  Mat features;  // n_states x m, linearly independent columns

  int feature_dim() const { return static_cast<int>(features.cols()); }
  int param_dim() const { return n_states * n_actions; }

  Eigen::Index row(int s, int a) const {
    return static_cast<Eigen::Index>(s) * n_actions + a;
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1) throw ConfigError("mdp: empty state/action space");
    if (transitions.rows() != static_cast<Eigen::Index>(n_states) * n_actions ||
        transitions.cols() != n_states)
      throw DimensionError("mdp: transition tensor has wrong shape");
    for (Eigen::Index i = 0; i < transitions.rows(); ++i) {
      if ((transitions.row(i).array() < -1e-12).any() ||
          std::abs(transitions.row(i).sum() - 1.0) > 1e-12)
        throw ConfigError("mdp: transition rows must be distributions");
    }
    if (rewards.rows() != n_states || rewards.cols() != n_actions)
      throw DimensionError("mdp: reward matrix has wrong shape");
    if (rewards.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
      throw ConfigError("mdp: rewards must lie in [-1, 1]");
    if (features.rows() != n_states || features.cols() < 1 ||
        features.cols() > n_states)
      throw DimensionError("mdp: feature matrix has wrong shape");
    Eigen::ColPivHouseholderQR<Mat> qr(features);
    if (qr.rank() < features.cols())
      throw ConfigError("mdp: feature columns are linearly dependent");
  }
};

// Softmax policy over the logits of one state; theta is the flat vector of
// tabular logits, entry s * n_actions + a.
inline Distribution policy(const TabularMdp& mdp, const Vec& theta, int s) {
  Vec logits(mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a) logits(a) = theta(mdp.row(s, a));
  const double m = logits.maxCoeff();
  Vec p = (logits.array() - m).exp();
  p /= p.sum();
  return Distribution{p};
}

inline Mat policy_matrix(const TabularMdp& mdp, const Vec& theta) {
  Mat pi(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) pi.row(s) = policy(mdp, theta, s).probs.transpose();
  return pi;
}

// grad log pi_theta(a | s): nonzero only in the block of state s.
inline Vec grad_log_policy(const TabularMdp& mdp, const Vec& theta, int s, int a) {
  const Distribution pi = policy(mdp, theta, s);
  Vec g = Vec::Zero(mdp.param_dim());
  for (int b = 0; b < mdp.n_actions; ++b)
    g(mdp.row(s, b)) = (b == a ? 1.0 : 0.0) - pi.probs(b);
  return g;
}

// State chain P_pi(s, s') = sum_a pi(a|s) P(s'|s, a) under the softmax policy.
inline Mat induced_chain(const TabularMdp& mdp, const Vec& theta) {
  const Mat pi = policy_matrix(mdp, theta);
  Mat P = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      P.row(s) += pi(s, a) * mdp.transitions.row(mdp.row(s, a));
  return P;
}

inline Distribution stationary_under(const TabularMdp& mdp, const Vec& theta) {
  return stationary_distribution(induced_chain(mdp, theta));
}

// Exact average reward J(theta) via the stationary distribution.
inline double exact_avg_reward(const TabularMdp& mdp, const Vec& theta) {
  const Distribution mu = stationary_under(mdp, theta);
  const Mat pi = policy_matrix(mdp, theta);
  double j = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      j += mu.probs(s) * pi(s, a) * mdp.rewards(s, a);
  return j;
}

// Differential value function: solves the average-reward Bellman system
// (I - P_pi) V = r_pi - J 1 with the normalization sum_s mu(s) V(s) = 0.
inline Vec exact_diff_value(const TabularMdp& mdp, const Vec& theta) {
  const int n = mdp.n_states;
  const Mat P = induced_chain(mdp, theta);
  const Distribution mu = stationary_distribution(P);
  const Mat pi = policy_matrix(mdp, theta);
  Vec r_pi(n);
  for (int s = 0; s < n; ++s) r_pi(s) = pi.row(s).dot(mdp.rewards.row(s));
  const double j = mu.probs.dot(r_pi);

  Mat lhs(n + 1, n);
  lhs.topRows(n) = Mat::Identity(n, n) - P;
  lhs.row(n) = mu.probs.transpose();
  Vec rhs(n + 1);
  rhs.head(n) = r_pi.array() - j;
  rhs(n) = 0.0;
  Eigen::ColPivHouseholderQR<Mat> qr(lhs);
  if (qr.rank() < n) throw ConvergenceError("exact_diff_value: singular Bellman system");
  const Vec v = qr.solve(rhs);
  // The overdetermined system is consistent by construction; verify.
  if ((lhs * v - rhs).cwiseAbs().maxCoeff() > 1e-8)
    throw ConvergenceError("exact_diff_value: Bellman system residual too large");
  return v;
}

// Exact policy gradient from the displayed expectation:
// grad J = E[(R(s,a) - J + E_{s'}[V(s')] - V(s)) grad log pi(a|s)].
inline Vec exact_policy_gradient(const TabularMdp& mdp, const Vec& theta) {
  const Distribution mu = stationary_under(mdp, theta);
  const Mat pi = policy_matrix(mdp, theta);
  const double j = exact_avg_reward(mdp, theta);
  const Vec v = exact_diff_value(mdp, theta);
  Vec grad = Vec::Zero(mdp.param_dim());
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double adv =
          mdp.rewards(s, a) - j + mdp.transitions.row(mdp.row(s, a)).dot(v) - v(s);
      grad += mu.probs(s) * pi(s, a) * adv * grad_log_policy(mdp, theta, s, a);
    }
  }
  return grad;
}

struct CriticRoot {
  double J = 0.0;
  Vec psi;
};

// Root of the expected critic operator: J = J(theta) and psi solving
// E[phi(s)(phi(s) - phi(s'))'] psi = E[(R - J) phi(s)]. With feature ranks
// below n_states this is the unique TD(0) fixed point; with full tabular
// features the system is defined up to a constant shift and the minimum-norm
// solution is returned.
inline CriticRoot exact_critic_root(const TabularMdp& mdp, const Vec& theta) {
  const Distribution mu = stationary_under(mdp, theta);
  const Mat pi = policy_matrix(mdp, theta);
  const double j = exact_avg_reward(mdp, theta);
  const int m = mdp.feature_dim();
  Mat A = Mat::Zero(m, m);
  Vec b = Vec::Zero(m);
  for (int s = 0; s < mdp.n_states; ++s) {
    const Vec feat_s = mdp.features.row(s).transpose();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = mu.probs(s) * pi(s, a);
      Vec expected_next = Vec::Zero(m);
      for (int sn = 0; sn < mdp.n_states; ++sn)
        expected_next += mdp.transitions(mdp.row(s, a), sn) * mdp.features.row(sn).transpose();
      A += w * feat_s * (feat_s - expected_next).transpose();
      b += w * (mdp.rewards(s, a) - j) * feat_s;
    }
  }
  CriticRoot root;
  root.J = j;
  root.psi = Eigen::CompleteOrthogonalDecomposition<Mat>(A).solve(b);
  return root;
}

// Expected value of the psi-block coupling matrix E[phi(s)(phi(s)-phi(s'))'];
// its symmetric part governs the strong monotonicity of -E[G] in omega.
inline Mat expected_feature_coupling(const TabularMdp& mdp, const Vec& theta) {
  const Distribution mu = stationary_under(mdp, theta);
  const Mat pi = policy_matrix(mdp, theta);
  const int m = mdp.feature_dim();
  Mat A = Mat::Zero(m, m);
  for (int s = 0; s < mdp.n_states; ++s) {
    const Vec feat_s = mdp.features.row(s).transpose();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = mu.probs(s) * pi(s, a);
      for (int sn = 0; sn < mdp.n_states; ++sn)
        A += w * mdp.transitions(mdp.row(s, a), sn) * feat_s *
             (feat_s - mdp.features.row(sn).transpose()).transpose();
    }
  }
  return A;
}

struct MdpSample {
  int s = 0;
  int a = 0;
  int s_next = 0;
};

// The online actor-critic as a problem instance. omega = (J_hat, psi). With
// the TD error delta = R(s,a) - J_hat + phi(s')'psi - phi(s)'psi:
//   H(theta, omega, X) = -delta * grad log pi_theta(a|s)      (descent on -J)
//   G(theta, omega, X) = (J_hat - R(s,a); -delta * phi(s))
// so that omega <- omega - beta G is average-reward TD(0). The kernel draws
// the next action under the updated theta, then the next state.
inline TwoTimescaleProblem<MdpSample> make_ac_problem(std::shared_ptr<const TabularMdp> mdp) {
  mdp->validate();
  TwoTimescaleProblem<MdpSample> problem;

  problem.grad_oracle = [mdp](const Vec& theta, const Vec& omega, const MdpSample& x) {
    const Vec feat_s = mdp->features.row(x.s).transpose();
    const Vec feat_n = mdp->features.row(x.s_next).transpose();
    const Vec psi = omega.tail(omega.size() - 1);
    const double delta = mdp->rewards(x.s, x.a) - omega(0) + feat_n.dot(psi) - feat_s.dot(psi);
    return Vec(-delta * grad_log_policy(*mdp, theta, x.s, x.a));
  };

  problem.aux_oracle = [mdp](const Vec&, const Vec& omega, const MdpSample& x) {
    const Vec feat_s = mdp->features.row(x.s).transpose();
    const Vec feat_n = mdp->features.row(x.s_next).transpose();
    const Vec psi = omega.tail(omega.size() - 1);
    const double delta = mdp->rewards(x.s, x.a) - omega(0) + feat_n.dot(psi) - feat_s.dot(psi);
    Vec g(omega.size());
    g(0) = omega(0) - mdp->rewards(x.s, x.a);
    g.tail(omega.size() - 1) = -delta * feat_s;
    return g;
  };

  problem.kernel.sampler = [mdp](const MdpSample& x, const Vec& theta, RandomSource& rng) {
    MdpSample next;
    next.s = x.s_next;
    next.a = rng.pick(policy(*mdp, theta, next.s).probs);
    next.s_next = rng.pick(mdp->transitions.row(mdp->row(next.s, next.a)).transpose());
    return next;
  };

  OptimumInfo opt;
  opt.f = [mdp](const Vec& theta) { return -exact_avg_reward(*mdp, theta); };
  opt.grad_f = [mdp](const Vec& theta) { return Vec(-exact_policy_gradient(*mdp, theta)); };
  opt.omega_star = [mdp](const Vec& theta) {
    const CriticRoot root = exact_critic_root(*mdp, theta);
    Vec w(1 + root.psi.size());
    w(0) = root.J;
    w.tail(root.psi.size()) = root.psi;
    return w;
  };
  problem.optimum = std::move(opt);
  return problem;
}

// Draws the initial sample (s, a, s') for a run: uniform start state, action
// from the initial policy.
inline MdpSample initial_mdp_sample(const TabularMdp& mdp, const Vec& theta, RandomSource& rng) {
  MdpSample x;
  x.s = static_cast<int>(rng.raw() % static_cast<std::uint64_t>(mdp.n_states));
  x.a = rng.pick(policy(mdp, theta, x.s).probs);
  x.s_next = rng.pick(mdp.transitions.row(mdp.row(x.s, x.a)).transpose());
  return x;
}

// Rate hook for the non-convex regime: running minimum of ||grad J||^2
// computed from the exact gradient, evaluated every eval_stride iterations.
inline Monitor<MdpSample> make_mdp_monitor(std::shared_ptr<const TabularMdp> mdp,
                                           std::int64_t eval_stride = 1) {
  double best = std::numeric_limits<double>::infinity();
  return [mdp, best, eval_stride](const OptState<MdpSample>& s) mutable {
    MonitorResult m;
    if (s.k % eval_stride == 0) {
      best = std::min(best, exact_policy_gradient(*mdp, s.theta).squaredNorm());
      const CriticRoot root = exact_critic_root(*mdp, s.theta);
      Vec w(1 + root.psi.size());
      w(0) = root.J;
      w.tail(root.psi.size()) = root.psi;
      m.aux_error = (s.omega - w).squaredNorm();
    }
    if (std::isfinite(best)) m.metric = best;
    return m;
  };
}

}  // namespace tts
