#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cewa/automaton.hpp"
#include "cewa/config.hpp"
#include "cewa/continuum.hpp"
#include "cewa/environment.hpp"
#include "cewa/errors.hpp"
#include "cewa/global_loss.hpp"
#include "cewa/lattice.hpp"
#include "cewa/oracle.hpp"
#include "cewa/tracking.hpp"

namespace cewa {

// 17 significant digits round-trip doubles exactly.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ReplicaResult {
  int replica = 0;
  std::uint64_t seed = 0;
  std::vector<double> round_losses;
  double forecaster_loss = 0.0;
  double comparator_loss = 0.0;
  double regret = 0.0;
  double bound = 0.0;
  double eta = 0.0;
  std::uint64_t op_count = 0;  // edge relaxations (forward passes in tracking)
  // Continuum extras; NaN/0 in other modes.
  double best_unrestricted_loss = std::numeric_limits<double>::quiet_NaN();
  double discretization_slack = 0.0;
};

struct RunResult {
  Config config;
  double log_legal_count = 0.0;
  std::vector<ReplicaResult> replicas;
};

inline ActionSet config_actions(const Config& cfg) {
  return cfg.action_values.empty() ? ActionSet::iota(cfg.actions)
                                   : ActionSet(cfg.action_values);
}

inline ConstraintAutomaton build_automaton(const Config& cfg) {
  return parse_constraint(cfg.constraint, config_actions(cfg), cfg.tasks);
}

namespace detail {

inline double matrix_loss(const ConstraintAutomaton& a,
                          const std::vector<double>& matrix,
                          const std::vector<int>& indices) {
  double acc = 0;
  for (int j = 0; j < a.task_count(); ++j) {
    int k = indices[static_cast<std::size_t>(j)];
    if (a.is_play_symbol(k))
      acc += matrix[static_cast<std::size_t>(j) * a.play_actions() + k];
  }
  return acc;
}

inline double confidence_term(std::int64_t n, double delta) {
  return std::sqrt(double(n) / 2.0 * std::log(1.0 / delta));
}

// Common-loss mode replicates task 0's row across every task.
inline void apply_common_losses(const Config& cfg, const ConstraintAutomaton& a,
                                std::vector<double>& y) {
  if (!cfg.common_losses) return;
  for (int j = 1; j < a.task_count(); ++j)
    for (int k = 0; k < a.play_actions(); ++k)
      y[static_cast<std::size_t>(j) * a.play_actions() + k] =
          y[static_cast<std::size_t>(k)];
}

inline double parse_eta_or(const Config& cfg, double auto_value) {
  if (cfg.eta == "auto") return auto_value;
  return std::stod(cfg.eta);
}

inline ReplicaResult run_standard_replica(const Config& cfg,
                                          const ConstraintAutomaton& a,
                                          double log_count, int replica) {
  ReplicaResult r;
  r.replica = replica;
  r.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(replica));
  auto env = make_environment(cfg.env_kind, a.task_count(), a.play_actions(),
                              split_seed(r.seed, 0), cfg.change_points);
  Rng sampler(split_seed(r.seed, 1));
  const std::int64_t n = cfg.rounds;
  if (n == 0) return r;
  EtaRate rate = cfg.eta_rate == "log_action_count" ? EtaRate::LogActionCount
                                                    : EtaRate::LogLegalSet;
  r.eta = parse_eta_or(cfg, eta_default(n, a, rate));

  LossTable cum(a.task_count(), a.play_actions());
  for (std::int64_t t = 1; t <= n; ++t) {
    WeightLattice lat(a, cum, r.eta);
    r.op_count += lat.relaxations();
    PlaySample x = lat.sample(sampler);
    if (!a.is_legal(x.indices))
      throw InternalError("run: sampled an illegal play");
    auto y = env->round_losses(t);
    apply_common_losses(cfg, a, y);
    double loss = matrix_loss(a, y, x.indices);
    r.round_losses.push_back(loss);
    r.forecaster_loss += loss;
    cum.accumulate(y);
  }
  r.comparator_loss = best_fixed(a, cum).loss;
  r.regret = r.forecaster_loss - r.comparator_loss;
  double m = a.task_count();
  r.bound = m * (std::sqrt(double(n) * std::max(log_count, 0.0) / 2.0) +
                 confidence_term(n, cfg.delta));
  return r;
}

inline ReplicaResult run_tracking_replica(const Config& cfg,
                                          const ConstraintAutomaton& a,
                                          double log_count, int replica) {
  ReplicaResult r;
  r.replica = replica;
  r.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(replica));
  auto env = make_environment(cfg.env_kind, a.task_count(), a.play_actions(),
                              split_seed(r.seed, 0), cfg.change_points);
  Rng sampler(split_seed(r.seed, 1));
  const std::int64_t n = cfg.rounds;
  if (n == 0) return r;
  const int kk = cfg.track_switches;
  r.eta = parse_eta_or(cfg, tracking_eta_default(n, a, kk));

  TrackingForecaster fc(a, kk, n, r.eta);
  std::vector<std::vector<double>> history;
  for (std::int64_t t = 1; t <= n; ++t) {
    PlaySample x = fc.sample(sampler);
    if (!a.is_legal(x.indices))
      throw InternalError("run: sampled an illegal play");
    auto y = env->round_losses(t);
    apply_common_losses(cfg, a, y);
    double loss = matrix_loss(a, y, x.indices);
    r.round_losses.push_back(loss);
    r.forecaster_loss += loss;
    fc.observe(y);
    history.push_back(std::move(y));
  }
  r.op_count = fc.forward_passes();
  r.comparator_loss = tracking_comparator_loss(a, history, kk);
  r.regret = r.forecaster_loss - r.comparator_loss;
  double m = a.task_count();
  if (kk == 0) {
    r.bound = m * (std::sqrt(double(n) * std::max(log_count, 0.0) / 2.0) +
                   confidence_term(n, cfg.delta));
  } else {
    double inner = double(kk) * std::max(log_count, 0.0) +
                   double(kk) * std::log(double(n) / double(kk));
    r.bound = m * std::sqrt(double(n) * inner) + m * confidence_term(n, cfg.delta);
  }
  return r;
}

inline ReplicaResult run_global_replica(const Config& cfg,
                                        const ConstraintAutomaton& a,
                                        double log_count, int replica) {
  ReplicaResult r;
  r.replica = replica;
  r.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(replica));
  auto env = make_environment(cfg.env_kind, a.task_count(), a.play_actions(),
                              split_seed(r.seed, 0), cfg.change_points);
  Rng sampler(split_seed(r.seed, 1));
  const std::int64_t n = cfg.rounds;
  if (n == 0) return r;
  Aggregator agg = cfg.global_agg == "max"   ? Aggregator::Max
                   : cfg.global_agg == "min" ? Aggregator::Min
                                             : Aggregator::Sum;
  r.eta = parse_eta_or(cfg, eta_global_default(n, a, agg));

  GlobalForecaster fc(a, agg, r.eta);
  for (std::int64_t t = 1; t <= n; ++t) {
    PlaySample x = fc.sample(sampler);
    if (!a.is_legal(x.indices))
      throw InternalError("run: sampled an illegal play");
    // Identical-loss regime: the common per-action row is task 0's row.
    auto y = env->round_losses(t);
    std::vector<double> c(y.begin(), y.begin() + a.play_actions());
    double loss = fc.play_loss(c, x.indices);
    r.round_losses.push_back(loss);
    r.forecaster_loss += loss;
    fc.observe_common(c);
  }
  r.op_count = fc.op_count();
  r.comparator_loss = fc.best_fixed_global().loss;
  r.regret = r.forecaster_loss - r.comparator_loss;
  double range = agg == Aggregator::Sum ? double(a.task_count()) : 1.0;
  r.bound = range * (std::sqrt(double(n) * std::max(log_count, 0.0) / 2.0) +
                     confidence_term(n, cfg.delta));
  return r;
}

inline ReplicaResult run_continuum_replica(const Config& cfg, int replica) {
  ReplicaResult r;
  r.replica = replica;
  r.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(replica));
  ActionSet acts = config_actions(cfg);
  SuperTaskGrid grid(cfg.continuum_eps);
  const int m = cfg.continuum_shifts;
  StepContinuumEnvironment env(acts.size(), cfg.env_pieces,
                               split_seed(r.seed, 0));
  Rng sampler(split_seed(r.seed, 1));
  const std::int64_t n = cfg.rounds;
  if (n == 0) return r;

  r.eta = parse_eta_or(
      cfg, eta_continuum_default(
               n, make_constancy(acts, m, grid.cells())));
  ContinuumForecaster fc(acts, grid, m, r.eta);

  std::vector<std::vector<StepFunction>> history;
  for (std::int64_t t = 1; t <= n; ++t) {
    ContinuumPlay play = fc.sample(sampler);
    if (!fc.automaton().is_legal(play.cells.indices))
      throw InternalError("run: sampled an illegal play");
    auto psi = env.round_functions(t);
    double loss = fc.round_loss(psi, play.cells.indices);
    r.round_losses.push_back(loss);
    r.forecaster_loss += loss;
    fc.observe(psi);
    history.push_back(std::move(psi));
  }
  r.op_count = fc.op_count();
  auto creg = continuum_regret(r.round_losses, history, acts, grid, m);
  r.comparator_loss = creg.best_discrete_loss;
  r.regret = creg.regret_vs_discrete();
  r.discretization_slack = creg.discretization_slack;
  r.best_unrestricted_loss = best_unrestricted_loss(history, acts, m);
  double cells = grid.cells();
  r.bound = std::sqrt(double(n) * double(m) *
                      std::log(double(acts.size()) * cells) / 2.0) +
            double(m) * double(n) * grid.eps() / 2.0 +
            confidence_term(n, cfg.delta);
  return r;
}

}  // namespace detail

// Full experiment: per-replica game loops with split seeds, concurrent
// replicas, deterministic output order.
inline RunResult run(const Config& cfg) {
  validate_config(cfg);
  RunResult out;
  out.config = cfg;

  std::optional<ConstraintAutomaton> a;
  if (cfg.mode != "continuum") {
    a.emplace(build_automaton(cfg));
    auto cnt = count_legal(*a);
    if (cnt.log_count == kNegInf)
      throw ParameterError("run: the configured legal set is empty");
    out.log_legal_count = cnt.log_count;
  } else {
    SuperTaskGrid grid(cfg.continuum_eps);
    if (cfg.continuum_shifts > grid.cells() - 1)
      throw ParameterError("run: continuum shifts must be < grid cells");
    auto tmp = make_constancy(config_actions(cfg), cfg.continuum_shifts,
                              grid.cells());
    out.log_legal_count = count_legal(tmp).log_count;
  }

  out.replicas.resize(static_cast<std::size_t>(cfg.replicas));
  auto worker_body = [&](int i) {
    if (cfg.mode == "standard")
      out.replicas[static_cast<std::size_t>(i)] =
          detail::run_standard_replica(cfg, *a, out.log_legal_count, i);
    else if (cfg.mode == "tracking")
      out.replicas[static_cast<std::size_t>(i)] =
          detail::run_tracking_replica(cfg, *a, out.log_legal_count, i);
    else if (cfg.mode == "global")
      out.replicas[static_cast<std::size_t>(i)] =
          detail::run_global_replica(cfg, *a, out.log_legal_count, i);
    else
      out.replicas[static_cast<std::size_t>(i)] =
          detail::run_continuum_replica(cfg, i);
  };

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(cfg.replicas));
  if (workers <= 1) {
    for (int i = 0; i < cfg.replicas; ++i) worker_body(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (;;) {
            int i = next.fetch_add(1);
            if (i >= cfg.replicas) break;
            worker_body(i);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

// One row per round; floats carry 17 significant digits.
inline std::string to_csv(const RunResult& r) {
  std::string out = "replica,seed,round,loss,cum_loss\n";
  for (const auto& rep : r.replicas) {
    double cum = 0;
    for (std::size_t t = 0; t < rep.round_losses.size(); ++t) {
      cum += rep.round_losses[t];
      out += std::to_string(rep.replica);
      out += ',';
      out += std::to_string(rep.seed);
      out += ',';
      out += std::to_string(t + 1);
      out += ',';
      out += fmt17(rep.round_losses[t]);
      out += ',';
      out += fmt17(cum);
      out += '\n';
    }
  }
  return out;
}

inline std::string to_json_summary(const RunResult& r) {
  nlohmann::json j;
  j["schema_version"] = r.config.schema_version;
  j["constraint"] = r.config.constraint;
  j["mode"] = r.config.mode;
  j["tasks"] = r.config.tasks;
  j["actions"] = r.config.actions;
  j["rounds"] = r.config.rounds;
  j["seed"] = r.config.seed;
  j["delta"] = r.config.delta;
  j["log_legal_count"] = r.log_legal_count;
  j["replicas"] = nlohmann::json::array();
  for (const auto& rep : r.replicas) {
    nlohmann::json x;
    x["replica"] = rep.replica;
    x["seed"] = rep.seed;
    x["forecaster_loss"] = rep.forecaster_loss;
    x["comparator_loss"] = rep.comparator_loss;
    x["regret"] = rep.regret;
    x["bound"] = rep.bound;
    x["eta"] = rep.eta;
    x["op_count"] = rep.op_count;
    if (r.config.mode == "continuum") {
      x["best_unrestricted_loss"] = rep.best_unrestricted_loss;
      x["discretization_slack"] = rep.discretization_slack;
    }
    j["replicas"].push_back(std::move(x));
  }
  return j.dump(2) + "\n";
}

inline void write_output(const RunResult& r, std::ostream& fallback) {
  std::string body =
      r.config.out_format == "json" ? to_json_summary(r) : to_csv(r);
  if (r.config.out_path.empty()) {
    fallback << body;
    return;
  }
  std::ofstream f(r.config.out_path, std::ios::binary);
  if (!f) throw InputError("cannot open output file '" + r.config.out_path + "'");
  f << body;
}

}  // namespace cewa
