#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "tts/common.hpp"

namespace tts {

enum class ScheduleKind { PowerLaw, HorizonConstant };

// Function regime selecting the step-size exponents.
enum class Regime { StronglyConvex, Convex, PL, NonConvex };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::StronglyConvex: return "strongly_convex";
    case Regime::Convex: return "convex";
    case Regime::PL: return "pl";
    case Regime::NonConvex: return "nonconvex";
  }
  return "?";
}

// Step-size pair (alpha_k, beta_k) plus the mixing-time rule tau(alpha).
//
// PowerLaw:        alpha_k = alpha0/(k+1)^a,  beta_k = beta0/(k+1)^b
// HorizonConstant: alpha_k = alpha0,          beta_k = beta0       (all k)
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::PowerLaw;
  double a = 1.0;
  double b = 2.0 / 3.0;
  double alpha0 = 0.0;
  double beta0 = 0.0;
  std::optional<double> horizon;  // HorizonConstant metadata
  double mix_c = 1.0;             // C in tau(alpha) <= C log(1/alpha)
  double mix_rho = 0.5;           // ergodicity rate, informational only

  double alpha(std::int64_t k) const {
    if (kind == ScheduleKind::HorizonConstant) return alpha0;
    return alpha0 / std::pow(static_cast<double>(k) + 1.0, a);
  }

  double beta(std::int64_t k) const {
    if (kind == ScheduleKind::HorizonConstant) return beta0;
    return beta0 / std::pow(static_cast<double>(k) + 1.0, b);
  }

  // tau_k = max(1, ceil(C log(1/alpha_k))). Floored at 1 so the reference
  // chain always takes at least one step.
  std::int64_t mixing_time(std::int64_t k) const {
    const double al = alpha(k);
    if (!(al > 0.0)) throw PreconditionError("mixing_time: alpha_k must be positive");
    const double t = mix_c * std::log(1.0 / al);
    const auto ceiled = static_cast<std::int64_t>(std::ceil(t));
    return ceiled < 1 ? 1 : ceiled;
  }

  void validate() const {
    if (!(alpha0 > 0.0) || !(beta0 > 0.0))
      throw ConfigError("schedule: alpha0 and beta0 must be positive");
    if (!(mix_c > 0.0)) throw ConfigError("schedule: mix_c must be positive");
    if (!(mix_rho > 0.0 && mix_rho < 1.0))
      throw ConfigError("schedule: mix_rho must lie in (0,1)");
    if (kind == ScheduleKind::PowerLaw) {
      if (!(b > 0.0 && b <= a && a <= 1.0))
        throw ConfigError("schedule: power-law exponents must satisfy 0 < b <= a <= 1");
      if (!(alpha0 <= beta0))
        throw ConfigError("schedule: power-law requires alpha0 <= beta0");
    } else {
      if (!(alpha0 <= beta0))
        throw ConfigError("schedule: horizon-constant requires alpha0 <= beta0");
      if (!horizon || !(*horizon >= 3.0))
        throw ConfigError("schedule: horizon-constant requires T >= 3");
    }
  }
};

// Step sizes for the four regimes. For StronglyConvex/PL/NonConvex, alpha0
// and beta0 are the leading constants of the power laws. For Convex they act
// as proportionality constants in front of the horizon-aware magnitudes
//   alpha0' = alpha0 / (log^{3/4}(T) T^{3/4}),
//   beta0'  = beta0  / (log^{1/2}(T) T^{1/2}),
// since the theoretical constants are not computable from problem data.
inline StepSchedule regime_schedule(Regime regime, double alpha0, double beta0,
                                    std::optional<double> T = std::nullopt) {
  StepSchedule s;
  s.alpha0 = alpha0;
  s.beta0 = beta0;
  switch (regime) {
    case Regime::StronglyConvex:
    case Regime::PL:
      s.kind = ScheduleKind::PowerLaw;
      s.a = 1.0;
      s.b = 2.0 / 3.0;
      break;
    case Regime::NonConvex:
      s.kind = ScheduleKind::PowerLaw;
      s.a = 3.0 / 5.0;
      s.b = 2.0 / 5.0;
      break;
    case Regime::Convex: {
      if (!T) throw ConfigError("regime_schedule: convex regime requires a horizon T");
      const double Td = *T;
      if (!(Td >= 3.0)) throw ConfigError("regime_schedule: horizon T must be >= 3");
      const double lt = std::log(Td);
      s.kind = ScheduleKind::HorizonConstant;
      s.alpha0 = alpha0 / (std::pow(lt, 0.75) * std::pow(Td, 0.75));
      s.beta0 = beta0 / (std::sqrt(lt) * std::sqrt(Td));
      s.horizon = Td;
      break;
    }
  }
  s.validate();
  return s;
}

}  // namespace tts
