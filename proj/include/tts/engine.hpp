#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "tts/common.hpp"
#include "tts/schedule.hpp"

namespace tts {

// ---------------------------------------------------------------------------
// The generic two-time-scale iteration
//
//   theta' = theta - alpha_k H(theta, omega, X)
//   omega' = omega - beta_k G(theta', omega, X)      (G sees the updated theta)
//   X'     ~ kernel(. | X, theta')
//
// over an arbitrary sample type. The engine never projects or clips; any
// safeguarding happens in monitors.
// ---------------------------------------------------------------------------

template <class SampleT>
struct ControlledKernel {
  // (current sample, updated theta, rng) -> next sample
  std::function<SampleT(const SampleT&, const Vec&, RandomSource&)> sampler;
};

template <class SampleT>
struct OptState {
  Vec theta;
  Vec omega;
  SampleT sample{};
  std::int64_t k = 0;
};

// Ground truth for diagnostics only; the update loop never reads it.
struct OptimumInfo {
  std::optional<Vec> theta_star;
  std::optional<double> f_star;
  std::function<Vec(const Vec&)> omega_star;  // theta -> omega*(theta)
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad_f;
};

template <class SampleT>
struct TwoTimescaleProblem {
  // H: (theta, omega, X) -> R^d, equals grad f in stationary expectation at
  // omega = omega*(theta).
  std::function<Vec(const Vec&, const Vec&, const SampleT&)> grad_oracle;
  // G: (theta, omega, X) -> R^r, with E_mu[G(theta, omega*(theta), X)] = 0.
  std::function<Vec(const Vec&, const Vec&, const SampleT&)> aux_oracle;
  ControlledKernel<SampleT> kernel;
  std::optional<OptimumInfo> optimum;
};

struct RunRecord {
  std::int64_t k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> metric;
  std::optional<double> aux_error;  // ||omega - omega*(theta)||^2 when known
  bool stable = true;
};

struct MonitorResult {
  std::optional<double> metric;
  std::optional<double> aux_error;
  bool stable = true;
  bool abort_run = false;
};

template <class SampleT>
using Monitor = std::function<MonitorResult(const OptState<SampleT>&)>;

template <class SampleT>
OptState<SampleT> step(const OptState<SampleT>& state,
                       const TwoTimescaleProblem<SampleT>& problem,
                       const StepSchedule& schedule, RandomSource& rng) {
  require_finite(state.theta, "step: theta");
  require_finite(state.omega, "step: omega");

  const double alpha = schedule.alpha(state.k);
  const double beta = schedule.beta(state.k);

  OptState<SampleT> next;
  next.theta = state.theta - alpha * problem.grad_oracle(state.theta, state.omega, state.sample);
  require_finite(next.theta, "step: updated theta");
  next.omega = state.omega - beta * problem.aux_oracle(next.theta, state.omega, state.sample);
  require_finite(next.omega, "step: updated omega");
  next.sample = problem.kernel.sampler(state.sample, next.theta, rng);
  next.k = state.k + 1;
  return next;
}

template <class SampleT>
struct RunResult {
  std::vector<RunRecord> records;
  OptState<SampleT> final_state;
  std::optional<std::int64_t> aborted_at;
};

namespace detail {

template <class SampleT>
MonitorResult default_monitor(const TwoTimescaleProblem<SampleT>& problem,
                              const OptState<SampleT>& state) {
  MonitorResult m;
  if (problem.optimum) {
    const OptimumInfo& opt = *problem.optimum;
    if (opt.theta_star) m.metric = (state.theta - *opt.theta_star).squaredNorm();
    if (opt.omega_star) m.aux_error = (state.omega - opt.omega_star(state.theta)).squaredNorm();
  }
  return m;
}

}  // namespace detail

// Runs n_iters steps, logging one record per iteration (taken on the
// pre-step state, so record 0 describes the initial iterate). Byte-identical
// output for identical (problem, schedule, seed, init, n_iters).
template <class SampleT>
RunResult<SampleT> run(const TwoTimescaleProblem<SampleT>& problem,
                       const StepSchedule& schedule, OptState<SampleT> state,
                       std::int64_t n_iters,
                       const std::type_identity_t<Monitor<SampleT>>& monitor,
                       RandomSource& rng) {
  RunResult<SampleT> out;
  out.records.reserve(static_cast<std::size_t>(n_iters > 0 ? n_iters : 0));
  bool warned_step_order = false;
  for (std::int64_t i = 0; i < n_iters; ++i) {
    RunRecord rec;
    rec.k = state.k;
    rec.alpha = schedule.alpha(state.k);
    rec.beta = schedule.beta(state.k);
    if (rec.alpha > rec.beta && !warned_step_order) {
      std::fprintf(stderr, "warning: alpha_k > beta_k at k=%lld (two-time-scale ordering violated)\n",
                   static_cast<long long>(state.k));
      warned_step_order = true;
    }
    MonitorResult m = monitor ? monitor(state) : detail::default_monitor(problem, state);
    rec.metric = m.metric;
    rec.aux_error = m.aux_error;
    rec.stable = m.stable;
    out.records.push_back(rec);
    if (m.abort_run) {
      out.aborted_at = state.k;
      break;
    }
    state = step(state, problem, schedule, rng);
  }
  out.final_state = std::move(state);
  return out;
}

}  // namespace tts
