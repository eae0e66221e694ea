#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tts/common.hpp"
#include "tts/engine.hpp"
#include "tts/lqr.hpp"
#include "tts/mdp.hpp"
#include "tts/schedule.hpp"
#include "tts/testbeds.hpp"

namespace tts {

using Json = nlohmann::json;

namespace cfg_detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError(where + ": unknown field '" + it.key() + "'");
  }
}

inline const Json& require(const Json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

inline double as_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline std::int64_t as_integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<std::int64_t>();
}

inline std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

// Matrices are row-major nested arrays; every row must have equal length.
inline Mat as_matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty())
    throw ConfigError(where + ": expected nested arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(where + ": ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = as_number(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

}  // namespace cfg_detail

enum class ProblemKind { Lqr, Mdp, Quadratic, Convex, Pl, NonConvex };

inline ProblemKind problem_kind_from(const std::string& s) {
  if (s == "lqr") return ProblemKind::Lqr;
  if (s == "mdp") return ProblemKind::Mdp;
  if (s == "quadratic") return ProblemKind::Quadratic;
  if (s == "convex") return ProblemKind::Convex;
  if (s == "pl") return ProblemKind::Pl;
  if (s == "nonconvex") return ProblemKind::NonConvex;
  throw ConfigError("unknown problem kind '" + s + "'");
}

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Quadratic;

  // lqr payload
  LqrInstance lqr;
  CriticForm critic_form = CriticForm::Bellman;
  double critic_j_init = 1.0;
  double critic_omega_init = 1.0;
  std::optional<Mat> init_K;

  // mdp payload
  std::shared_ptr<TabularMdp> mdp;

  // regime testbed payload
  int d = 4;
  int r = 2;
  std::uint64_t testbed_seed = 1;
  double noise_scale = 1.0;
  double coupling = 1.0;
  double init_scale = 1.0;

  Regime regime() const {
    switch (kind) {
      case ProblemKind::Quadratic: return Regime::StronglyConvex;
      case ProblemKind::Convex: return Regime::Convex;
      case ProblemKind::Pl: return Regime::PL;
      case ProblemKind::NonConvex: return Regime::NonConvex;
      default: throw ConfigError("regime(): not a testbed problem");
    }
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemConfig problem;
  StepSchedule schedule;
  std::int64_t n_iters = 0;
  std::vector<std::uint64_t> seeds;
  std::int64_t eval_stride = 1;
  std::string output_dir = "out";
  Safeguard safeguard = Safeguard::Abort;
  std::optional<std::int64_t> burn_in;
};

inline StepSchedule parse_schedule(const Json& j) {
  using namespace cfg_detail;
  const std::string where = "schedule";
  const std::string kind = as_string(require(j, "kind", where), where + ".kind");
  StepSchedule s;
  if (kind == "power_law") {
    reject_unknown(j, {"kind", "a", "b", "alpha0", "beta0", "mix_c", "mix_rho"}, where);
    s.kind = ScheduleKind::PowerLaw;
    s.a = as_number(require(j, "a", where), where + ".a");
    s.b = as_number(require(j, "b", where), where + ".b");
    s.alpha0 = as_number(require(j, "alpha0", where), where + ".alpha0");
    s.beta0 = as_number(require(j, "beta0", where), where + ".beta0");
  } else if (kind == "horizon_constant") {
    reject_unknown(j, {"kind", "alpha0", "beta0", "horizon", "mix_c", "mix_rho"}, where);
    s.kind = ScheduleKind::HorizonConstant;
    s.alpha0 = as_number(require(j, "alpha0", where), where + ".alpha0");
    s.beta0 = as_number(require(j, "beta0", where), where + ".beta0");
    s.horizon = as_number(require(j, "horizon", where), where + ".horizon");
  } else if (kind == "regime") {
    reject_unknown(j, {"kind", "regime", "alpha0", "beta0", "horizon", "mix_c", "mix_rho"},
                   where);
    const std::string rs = as_string(require(j, "regime", where), where + ".regime");
    Regime regime;
    if (rs == "strongly_convex") regime = Regime::StronglyConvex;
    else if (rs == "convex") regime = Regime::Convex;
    else if (rs == "pl") regime = Regime::PL;
    else if (rs == "nonconvex") regime = Regime::NonConvex;
    else throw ConfigError("schedule.regime: unknown regime '" + rs + "'");
    std::optional<double> horizon;
    if (j.contains("horizon")) horizon = as_number(j["horizon"], where + ".horizon");
    const double a0 = as_number(require(j, "alpha0", where), where + ".alpha0");
    const double b0 = as_number(require(j, "beta0", where), where + ".beta0");
    s = regime_schedule(regime, a0, b0, horizon);
  } else {
    throw ConfigError("schedule.kind: unknown kind '" + kind + "'");
  }
  if (j.contains("mix_c")) s.mix_c = as_number(j["mix_c"], where + ".mix_c");
  if (j.contains("mix_rho")) s.mix_rho = as_number(j["mix_rho"], where + ".mix_rho");
  s.validate();
  return s;
}

inline ProblemConfig parse_problem(const Json& j) {
  using namespace cfg_detail;
  const std::string where = "problem";
  ProblemConfig p;
  const std::string kind = as_string(require(j, "kind", where), where + ".kind");
  p.kind = problem_kind_from(kind);
  switch (p.kind) {
    case ProblemKind::Lqr: {
      reject_unknown(j,
                     {"kind", "A", "B", "Q", "R", "Psi", "sigma", "rho", "critic_form",
                      "critic_j_init", "critic_omega_init", "init_k"},
                     where);
      p.lqr.A = as_matrix(require(j, "A", where), where + ".A");
      p.lqr.B = as_matrix(require(j, "B", where), where + ".B");
      p.lqr.Q = as_matrix(require(j, "Q", where), where + ".Q");
      p.lqr.R = as_matrix(require(j, "R", where), where + ".R");
      p.lqr.Psi = as_matrix(require(j, "Psi", where), where + ".Psi");
      p.lqr.sigma = as_number(require(j, "sigma", where), where + ".sigma");
      p.lqr.rho = as_number(require(j, "rho", where), where + ".rho");
      if (j.contains("critic_form")) {
        const std::string f = as_string(j["critic_form"], where + ".critic_form");
        if (f == "bellman") p.critic_form = CriticForm::Bellman;
        else if (f == "simplified") p.critic_form = CriticForm::SimplifiedAlg2;
        else throw ConfigError(where + ".critic_form: expected 'bellman' or 'simplified'");
      }
      if (j.contains("critic_j_init"))
        p.critic_j_init = as_number(j["critic_j_init"], where + ".critic_j_init");
      if (j.contains("critic_omega_init"))
        p.critic_omega_init = as_number(j["critic_omega_init"], where + ".critic_omega_init");
      if (j.contains("init_k")) p.init_K = as_matrix(j["init_k"], where + ".init_k");
      p.lqr.validate();
      break;
    }
    case ProblemKind::Mdp: {
      reject_unknown(j, {"kind", "transitions", "rewards", "features"}, where);
      auto mdp = std::make_shared<TabularMdp>();
      const Json& tj = require(j, "transitions", where);
      if (!tj.is_array() || tj.empty()) throw ConfigError(where + ".transitions: expected array");
      mdp->n_states = static_cast<int>(tj.size());
      const Json& first = tj[0];
      if (!first.is_array() || first.empty())
        throw ConfigError(where + ".transitions: expected [s][a][s'] nesting");
      mdp->n_actions = static_cast<int>(first.size());
      mdp->transitions.resize(static_cast<Eigen::Index>(mdp->n_states) * mdp->n_actions,
                              mdp->n_states);
      for (int s = 0; s < mdp->n_states; ++s) {
        const Json& per_state = tj[static_cast<std::size_t>(s)];
        if (!per_state.is_array() ||
            static_cast<int>(per_state.size()) != mdp->n_actions)
          throw ConfigError(where + ".transitions: ragged action dimension");
        for (int a = 0; a < mdp->n_actions; ++a) {
          const Json& row = per_state[static_cast<std::size_t>(a)];
          if (!row.is_array() || static_cast<int>(row.size()) != mdp->n_states)
            throw ConfigError(where + ".transitions: ragged state dimension");
          for (int sn = 0; sn < mdp->n_states; ++sn)
            mdp->transitions(mdp->row(s, a), sn) =
                as_number(row[static_cast<std::size_t>(sn)], where + ".transitions");
        }
      }
      mdp->rewards = as_matrix(require(j, "rewards", where), where + ".rewards");
      mdp->features = as_matrix(require(j, "features", where), where + ".features");
      mdp->validate();
      p.mdp = std::move(mdp);
      break;
    }
    default: {
      reject_unknown(j, {"kind", "d", "r", "testbed_seed", "noise_scale", "coupling",
                         "init_scale"},
                     where);
      p.d = static_cast<int>(as_integer(require(j, "d", where), where + ".d"));
      p.r = static_cast<int>(as_integer(require(j, "r", where), where + ".r"));
      if (j.contains("testbed_seed"))
        p.testbed_seed =
            static_cast<std::uint64_t>(as_integer(j["testbed_seed"], where + ".testbed_seed"));
      if (j.contains("noise_scale"))
        p.noise_scale = as_number(j["noise_scale"], where + ".noise_scale");
      if (j.contains("coupling")) p.coupling = as_number(j["coupling"], where + ".coupling");
      if (j.contains("init_scale"))
        p.init_scale = as_number(j["init_scale"], where + ".init_scale");
      if (p.d < 1 || p.r < 1) throw ConfigError(where + ": d and r must be >= 1");
      break;
    }
  }
  return p;
}

inline ExperimentConfig parse_config(const Json& j) {
  using namespace cfg_detail;
  const std::string where = "config";
  reject_unknown(j,
                 {"name", "problem", "schedule", "n_iters", "seeds", "eval_stride",
                  "output_dir", "safeguard", "burn_in"},
                 where);
  ExperimentConfig c;
  if (j.contains("name")) c.name = as_string(j["name"], where + ".name");
  c.problem = parse_problem(require(j, "problem", where));
  c.schedule = parse_schedule(require(j, "schedule", where));
  c.n_iters = as_integer(require(j, "n_iters", where), where + ".n_iters");
  if (c.n_iters < 1) throw ConfigError("config.n_iters: must be >= 1");
  const Json& seeds = require(j, "seeds", where);
  if (!seeds.is_array() || seeds.empty())
    throw ConfigError("config.seeds: expected a non-empty array");
  for (const Json& s : seeds)
    c.seeds.push_back(static_cast<std::uint64_t>(as_integer(s, where + ".seeds")));
  if (j.contains("eval_stride")) {
    c.eval_stride = as_integer(j["eval_stride"], where + ".eval_stride");
    if (c.eval_stride < 1) throw ConfigError("config.eval_stride: must be >= 1");
  }
  if (j.contains("output_dir")) c.output_dir = as_string(j["output_dir"], where + ".output_dir");
  if (j.contains("safeguard")) {
    const std::string s = as_string(j["safeguard"], where + ".safeguard");
    if (s == "abort") c.safeguard = Safeguard::Abort;
    else if (s == "log") c.safeguard = Safeguard::Log;
    else throw ConfigError("config.safeguard: expected 'abort' or 'log'");
  }
  if (j.contains("burn_in")) c.burn_in = as_integer(j["burn_in"], where + ".burn_in");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
  return parse_config(j);
}

struct SeedRunOutput {
  std::vector<RunRecord> records;
  std::optional<std::int64_t> aborted_at;
};

// One seeded run of whatever the config describes. This is the single code
// path behind both the CLI and the acceptance suite, so determinism of the
// CSV bytes follows from determinism here.
inline SeedRunOutput run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRunOutput out;
  switch (cfg.problem.kind) {
    case ProblemKind::Lqr: {
      LqrAcOptions opt;
      opt.init_K = cfg.problem.init_K;
      opt.safeguard = cfg.safeguard;
      opt.critic_form = cfg.problem.critic_form;
      opt.eval_stride = cfg.eval_stride;
      opt.critic_j_init = cfg.problem.critic_j_init;
      opt.critic_omega_init = cfg.problem.critic_omega_init;
      LqrAcResult res = run_lqr_ac(cfg.problem.lqr, cfg.schedule, cfg.n_iters, seed, opt);
      out.records = std::move(res.records);
      out.aborted_at = res.aborted_at;
      break;
    }
    case ProblemKind::Mdp: {
      std::shared_ptr<const TabularMdp> mdp = cfg.problem.mdp;
      TwoTimescaleProblem<MdpSample> problem = make_ac_problem(mdp);
      RandomSource rng(seed);
      OptState<MdpSample> init;
      init.theta = Vec::Zero(mdp->param_dim());
      init.omega = Vec::Zero(1 + mdp->feature_dim());
      init.sample = initial_mdp_sample(*mdp, init.theta, rng);
      Monitor<MdpSample> monitor = make_mdp_monitor(mdp, cfg.eval_stride);
      RunResult<MdpSample> res =
          run(problem, cfg.schedule, std::move(init), cfg.n_iters, monitor, rng);
      out.records = std::move(res.records);
      out.aborted_at = res.aborted_at;
      break;
    }
    default: {
      RegimeProblem rp = make_regime_testbed(cfg.problem.regime(), cfg.problem.d, cfg.problem.r,
                                             cfg.problem.testbed_seed, cfg.problem.noise_scale,
                                             cfg.problem.coupling);
      RandomSource rng(seed);
      OptState<int> init;
      init.theta = cfg.problem.init_scale * rng.gauss_vec(cfg.problem.d);
      init.omega = cfg.problem.init_scale * rng.gauss_vec(cfg.problem.r);
      init.sample = static_cast<int>(rng.raw() % 2);
      Monitor<int> monitor = make_regime_monitor(rp, cfg.schedule);
      RunResult<int> res =
          run(rp.problem, cfg.schedule, std::move(init), cfg.n_iters, monitor, rng);
      out.records = std::move(res.records);
      out.aborted_at = res.aborted_at;
      break;
    }
  }
  return out;
}

}  // namespace tts
