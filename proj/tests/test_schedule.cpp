#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tts/schedule.hpp"

using namespace tts;

TEST_CASE("power-law step sizes") {
  StepSchedule s;
  s.kind = ScheduleKind::PowerLaw;
  s.a = 1.0;
  s.b = 2.0 / 3.0;
  s.alpha0 = 0.025;
  s.beta0 = 0.05;
  s.validate();

  CHECK(s.alpha(0) == 0.025);
  // 8^{2/3} = 4 exactly
  CHECK(s.beta(7) == Catch::Approx(0.05 / 4.0).epsilon(1e-15));
  CHECK(s.alpha(999) == Catch::Approx(0.025 / 1000.0).epsilon(1e-15));
}

TEST_CASE("alpha equals beta for symmetric parameters") {
  StepSchedule s;
  s.a = s.b = 0.75;
  s.alpha0 = s.beta0 = 0.3;
  s.validate();
  for (std::int64_t k : {0, 3, 17, 1000}) CHECK(s.alpha(k) == s.beta(k));
}

TEST_CASE("schedule invariants hold for every constructed schedule") {
  const auto check_schedule = [](const StepSchedule& s) {
    double prev_alpha = std::numeric_limits<double>::infinity();
    double prev_beta = prev_alpha;
    double prev_ratio = prev_alpha;
    std::int64_t prev_tau = 0;
    for (std::int64_t k = 0; k < 2000; ++k) {
      const double a = s.alpha(k), b = s.beta(k);
      CHECK(a <= b * (1 + 1e-15));
      CHECK(a <= prev_alpha);
      CHECK(b <= prev_beta);
      CHECK(a / b <= prev_ratio * (1 + 1e-12));
      if (s.kind == ScheduleKind::PowerLaw) {
        const std::int64_t tau = s.mixing_time(k);
        CHECK(tau >= prev_tau);
        prev_tau = tau;
      }
      prev_alpha = a;
      prev_beta = b;
      prev_ratio = a / b;
    }
  };
  check_schedule(regime_schedule(Regime::StronglyConvex, 0.025, 0.05));
  check_schedule(regime_schedule(Regime::NonConvex, 0.1, 0.25));
  check_schedule(regime_schedule(Regime::Convex, 1.0, 1.0, 1e5));
}

TEST_CASE("regime exponents") {
  const StepSchedule sc = regime_schedule(Regime::StronglyConvex, 0.5, 1.0);
  CHECK(sc.a == 1.0);
  CHECK(sc.b == Catch::Approx(2.0 / 3.0));

  const StepSchedule pl = regime_schedule(Regime::PL, 0.5, 1.0);
  CHECK(pl.a == 1.0);
  CHECK(pl.b == Catch::Approx(2.0 / 3.0));

  const StepSchedule nc = regime_schedule(Regime::NonConvex, 0.5, 1.0);
  CHECK(nc.a == Catch::Approx(3.0 / 5.0));
  CHECK(nc.b == Catch::Approx(2.0 / 5.0));
}

TEST_CASE("convex horizon-aware constants") {
  // T = e^3 with unit proportionality constants:
  //   alpha0 = 3^{-3/4} e^{-9/4},  beta0 = 3^{-1/2} e^{-3/2}
  const double T = std::exp(3.0);
  const StepSchedule s = regime_schedule(Regime::Convex, 1.0, 1.0, T);
  CHECK(s.kind == ScheduleKind::HorizonConstant);
  CHECK(s.alpha0 ==
        Catch::Approx(std::pow(3.0, -0.75) * std::exp(-2.25)).epsilon(1e-14));
  CHECK(s.beta0 ==
        Catch::Approx(std::pow(3.0, -0.5) * std::exp(-1.5)).epsilon(1e-14));
  CHECK(s.alpha(0) == s.alpha(12345));
  CHECK(s.beta(3) == s.beta0);
}

TEST_CASE("convex regime requires a horizon") {
  CHECK_THROWS_AS(regime_schedule(Regime::Convex, 1.0, 1.0), ConfigError);
}

TEST_CASE("mixing time rule") {
  StepSchedule s;
  s.kind = ScheduleKind::HorizonConstant;
  s.horizon = 100.0;
  s.mix_c = 1.0;

  s.alpha0 = std::exp(-3.0);
  s.beta0 = 1.0;
  CHECK(s.mixing_time(0) == 3);

  s.alpha0 = 1.0;
  CHECK(s.mixing_time(0) == 1);  // floored at one step

  s.mix_c = 2.5;
  s.alpha0 = 0.01;
  CHECK(s.mixing_time(0) == 12);  // ceil(2.5 ln 100) = ceil(11.51)
}

TEST_CASE("invalid schedules are rejected") {
  StepSchedule s;
  s.kind = ScheduleKind::PowerLaw;
  s.a = 0.5;
  s.b = 0.7;  // b > a
  s.alpha0 = 0.1;
  s.beta0 = 0.2;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  s.b = 0.5;
  s.alpha0 = 0.5;
  s.beta0 = 0.2;  // alpha0 > beta0
  CHECK_THROWS_AS(s.validate(), ConfigError);

  StepSchedule h;
  h.kind = ScheduleKind::HorizonConstant;
  h.alpha0 = 0.1;
  h.beta0 = 0.2;
  h.horizon = 2.0;  // below the T >= 3 floor
  CHECK_THROWS_AS(h.validate(), ConfigError);
}
