#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "tts/common.hpp"
#include "tts/engine.hpp"
#include "tts/schedule.hpp"

namespace tts {

// ---------------------------------------------------------------------------
// Rate fitting: least-squares line on (log(k+1), log metric_k).
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::int64_t burn_in = 0;
  std::int64_t n_points = 0;
};

inline RateFit fit_rate(const std::vector<RunRecord>& records, std::int64_t burn_in) {
  std::vector<double> xs, ys;
  xs.reserve(records.size());
  ys.reserve(records.size());
  for (const RunRecord& r : records) {
    if (r.k < burn_in || !r.stable || !r.metric) continue;
    const double m = *r.metric;
    if (!(m > 0.0) || !std::isfinite(m)) continue;
    xs.push_back(std::log(static_cast<double>(r.k) + 1.0));
    ys.push_back(std::log(m));
  }
  if (xs.size() < 2)
    throw InsufficientDataError("fit_rate: need at least 2 positive metric values after burn-in");

  const auto n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InsufficientDataError("fit_rate: degenerate abscissa");

  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.burn_in = burn_in;
  fit.n_points = static_cast<std::int64_t>(xs.size());
  return fit;
}

// ---------------------------------------------------------------------------
// Envelope ratio check: metric_k / ((k+1)^exponent log^p(k+1)) must be
// non-increasing after burn-in, up to a multiplicative slack. Implemented
// against the running minimum so sustained growth fails while bounded jitter
// passes.
// ---------------------------------------------------------------------------

inline bool envelope_ratio_check(const std::vector<RunRecord>& records, double exponent,
                                 int log_power, std::int64_t burn_in, double slack = 1.05) {
  if (!(exponent < 0.0))
    throw PreconditionError("envelope_ratio_check: exponent must be negative");
  double running_min = std::numeric_limits<double>::infinity();
  std::int64_t n_valid = 0;
  bool ok = true;
  for (const RunRecord& r : records) {
    if (r.k < burn_in || !r.stable || !r.metric || !std::isfinite(*r.metric)) continue;
    const double kk = static_cast<double>(r.k) + 1.0;
    const double envelope = std::pow(kk, exponent) * std::pow(std::log(kk), log_power);
    if (!(envelope > 0.0)) continue;  // log(1) = 0 at k = 0
    const double ratio = *r.metric / envelope;
    ++n_valid;
    if (std::isfinite(running_min) && ratio > slack * running_min) ok = false;
    running_min = std::min(running_min, ratio);
  }
  if (n_valid < 2)
    throw InsufficientDataError("envelope_ratio_check: fewer than 2 usable points");
  return ok;
}

// Default burn-in: first index where tau_k^2 beta_{k - tau_k} drops below 1,
// capped at 10% of the horizon.
inline std::int64_t default_burn_in(const StepSchedule& schedule, std::int64_t horizon) {
  const std::int64_t cap = std::max<std::int64_t>(1, horizon / 10);
  for (std::int64_t k = 0; k < cap; ++k) {
    const std::int64_t tau = schedule.mixing_time(k);
    if (k < tau) continue;
    const double v = static_cast<double>(tau) * static_cast<double>(tau) * schedule.beta(k - tau);
    if (v < 1.0) return k;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Numeric oracle for the two-time-scale lemma. Case A bounds x_k for the
// contractive coupled dynamics; case B bounds sum u_t for the expansive ones.
//
// The oracle iterates the equality-saturated recursions (the extreme
// trajectory admitted by the hypotheses) and compares against the closed-form
// right-hand side. For case B, saturating x makes u's ceiling telescope to
// zero, so the adversarial trajectories hold x constant or drop it to zero
// after tau; both are admissible and the larger sum is used.
// ---------------------------------------------------------------------------

enum class TtsLemmaCase { A, B };

struct TtsLemmaSequences {
  std::vector<double> a, b, c, d, e, f;
};

struct TtsLemmaResult {
  bool bound_holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

inline TtsLemmaResult tts_lemma_oracle(TtsLemmaCase lemma_case, const TtsLemmaSequences& seq,
                                       double x0, double y0, std::int64_t tau, std::int64_t k,
                                       std::optional<double> A_const = std::nullopt) {
  const auto n = static_cast<std::size_t>(k) + 1;
  if (seq.a.size() < n || seq.b.size() < n || seq.c.size() < n || seq.d.size() < n ||
      seq.e.size() < n || seq.f.size() < n)
    throw DimensionError("tts_lemma_oracle: sequences shorter than k+1");
  if (tau < 0 || tau > k) throw PreconditionError("tts_lemma_oracle: need 0 <= tau <= k");
  if (x0 < 0.0 || y0 < 0.0) throw PreconditionError("tts_lemma_oracle: x0, y0 must be nonnegative");

  double prev_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    if (seq.a[t] < 0 || seq.b[t] < 0 || seq.c[t] < 0 || seq.d[t] < 0 || seq.e[t] < 0 ||
        seq.f[t] < 0)
      throw PreconditionError("tts_lemma_oracle: sequences must be nonnegative");
    if (!(seq.d[t] > 0.0)) throw PreconditionError("tts_lemma_oracle: d_t must be positive");
    const double ratio = seq.a[t] / seq.d[t];
    if (ratio > 1.0 + 1e-12)
      throw PreconditionError("tts_lemma_oracle: a_t/d_t must not exceed 1");
    if (ratio > prev_ratio + 1e-12)
      throw PreconditionError("tts_lemma_oracle: a_t/d_t must be non-increasing");
    prev_ratio = ratio;
    if (seq.d[t] > 1.0 + 1e-12)
      throw PreconditionError("tts_lemma_oracle: d_t > 1 leaves the admissible range");
  }

  if (lemma_case == TtsLemmaCase::A) {
    if (!A_const) throw PreconditionError("tts_lemma_oracle: case A requires A_const");
    const double A = *A_const;
    for (std::size_t t = 0; t < n; ++t) {
      if (A * seq.a[t] - seq.b[t] - A * seq.a[t] * seq.a[t] / seq.d[t] < -1e-12)
        throw PreconditionError("tts_lemma_oracle: A a_t - b_t - A a_t^2/d_t >= 0 violated");
      if (A * seq.a[t] * seq.e[t] / seq.d[t] > seq.a[t] / 2 + 1e-12)
        throw PreconditionError("tts_lemma_oracle: A a_t e_t / d_t <= a_t/2 violated");
    }

    // Equality-saturated trajectory.
    std::vector<double> x(n + 1), y(n + 1);
    x[0] = x0;
    y[0] = y0;
    for (std::size_t t = 0; t < n; ++t) {
      x[t + 1] = (1.0 - seq.a[t]) * x[t] + seq.b[t] * y[t] + seq.c[t];
      y[t + 1] = (1.0 - seq.d[t]) * y[t] + seq.e[t] * x[t] + seq.f[t];
      if (x[t + 1] < 0.0 || y[t + 1] < 0.0)
        throw PreconditionError("tts_lemma_oracle: trajectory left the nonnegative orthant");
    }

    const auto taui = static_cast<std::size_t>(tau);
    double rhs = (x[taui] + A * seq.a[taui] / seq.d[taui] * y[taui]);
    for (std::size_t t = taui; t < static_cast<std::size_t>(k); ++t) rhs *= 1.0 - seq.a[t] / 2.0;
    for (std::size_t l = taui; l < static_cast<std::size_t>(k); ++l) {
      double term = seq.c[l] + A * seq.a[l] * seq.f[l] / seq.d[l];
      for (std::size_t t = l + 1; t < static_cast<std::size_t>(k); ++t)
        term *= 1.0 - seq.a[t] / 2.0;
      rhs += term;
    }

    TtsLemmaResult out;
    out.lhs = x[static_cast<std::size_t>(k)];
    out.rhs = rhs;
    out.bound_holds = out.lhs <= out.rhs + 1e-12;
    return out;
  }

  // Case B. Run the expansive equality recursion up to tau, then evaluate the
  // two adversarial continuations.
  const auto taui = static_cast<std::size_t>(tau);
  double x_tau = x0, y_tau = y0;
  for (std::size_t t = 0; t < taui; ++t) {
    const double xn = (1.0 + seq.a[t]) * x_tau + seq.b[t] * y_tau + seq.c[t];
    const double yn = (1.0 - seq.d[t]) * y_tau + seq.e[t] * x_tau + seq.f[t];
    x_tau = xn;
    y_tau = yn;
  }

  // Variant 1: hold x constant at x_tau; u_t saturates its bound.
  double sum_hold = 0.0;
  {
    double y = y_tau;
    for (std::size_t t = taui; t <= static_cast<std::size_t>(k); ++t) {
      sum_hold += seq.a[t] * x_tau + seq.b[t] * y + seq.c[t];
      y = (1.0 - seq.d[t]) * y + seq.e[t] * x_tau + seq.f[t];
    }
  }
  // Variant 2: drop x to zero immediately after tau.
  double sum_drop = 0.0;
  {
    double y = y_tau;
    double x = x_tau;
    for (std::size_t t = taui; t <= static_cast<std::size_t>(k); ++t) {
      sum_drop += (1.0 + seq.a[t]) * x + seq.b[t] * y + seq.c[t];
      y = (1.0 - seq.d[t]) * y + seq.e[t] * x + seq.f[t];
      x = 0.0;
    }
  }

  double S = 0.0, tail = 0.0;
  for (std::size_t t = taui; t <= static_cast<std::size_t>(k); ++t) {
    S += seq.a[t] + seq.b[t] * seq.e[t] / seq.d[t];
    tail += seq.c[t] + seq.b[t] * seq.f[t] / seq.d[t];
  }
  const double rhs =
      (1.0 + S * std::exp(S)) * (x_tau + seq.b[taui] * y_tau / seq.d[taui] + tail);

  TtsLemmaResult out;
  out.lhs = std::max(sum_hold, sum_drop);
  out.rhs = rhs;
  out.bound_holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Numeric check of the sum-vs-integral bounds on S = sum_{t=0}^{k} (t+1)^{-u}:
//   u in (0,1): C_u (k+1)^{1-u}/(1-u) <= S <= (k+1)^{1-u}/(1-u), C_u = 1-2^{u-1}
//   u = 1:      S <= log(k+2)/log(2)
//   u > 1:      S <= u/(u-1), and the log^2 variant
//               sum log^2(t+1)/(t+1)^u <= ((u-1)^3 + 2)/(u-1)^3.
// ---------------------------------------------------------------------------

inline bool sum_integral_bound_check(double u, std::int64_t k) {
  if (!(u > 0.0)) throw PreconditionError("sum_integral_bound_check: unsupported exponent");
  double s = 0.0;
  double s_log2 = 0.0;
  for (std::int64_t t = 0; t <= k; ++t) {
    const double tp1 = static_cast<double>(t) + 1.0;
    const double term = std::pow(tp1, -u);
    s += term;
    const double lg = std::log(tp1);
    s_log2 += lg * lg * term;
  }
  const double kp1 = static_cast<double>(k) + 1.0;
  const double fp_slack = 1e-12 * std::max(1.0, s);
  if (u < 1.0) {
    const double cu = 1.0 - std::pow(2.0, u - 1.0);
    const double lower = cu * std::pow(kp1, 1.0 - u) / (1.0 - u);
    const double upper = std::pow(kp1, 1.0 - u) / (1.0 - u);
    return lower <= s + fp_slack && s <= upper + fp_slack;
  }
  if (u == 1.0) {
    return s <= std::log(kp1 + 1.0) / std::log(2.0) + fp_slack;
  }
  const double upper = u / (u - 1.0);
  const double um1 = u - 1.0;
  const double upper_log2 = (um1 * um1 * um1 + 2.0) / (um1 * um1 * um1);
  return s <= upper + fp_slack && s_log2 <= upper_log2 + fp_slack;
}

}  // namespace tts
