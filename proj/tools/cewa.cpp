// Command-line front end: run experiments, verify against the brute-force
// oracles, and benchmark the forward-pass complexity.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cewa/bench.hpp"
#include "cewa/config.hpp"
#include "cewa/harness.hpp"
#include "cewa/verify.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string constraint, eta, eta_rate, env, out, format, global_agg;
  std::string track, continuum;
  int tasks = -1, actions = -1, replicas = -1, pieces = -1;
  std::int64_t rounds = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double delta = -1;
  bool common_losses = false;
  std::vector<std::int64_t> change_points;
  std::vector<double> action_values;
};

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (flags override)");
  cmd->add_option("--constraint", o.constraint,
                  "coherence:gamma=<r> | escalation | constancy:m=<i> | "
                  "budget:B=<r> | subset:m=<i>");
  cmd->add_option("--tasks", o.tasks, "number of tasks M");
  cmd->add_option("--actions", o.actions, "number of actions N");
  cmd->add_option("--action-values", o.action_values,
                  "explicit action values (default 1..N)");
  cmd->add_option("--rounds", o.rounds, "horizon n");
  cmd->add_option("--eta", o.eta, "'auto' or a positive real");
  cmd->add_option("--eta-rate", o.eta_rate, "log_legal_set | log_action_count");
  auto* s = cmd->add_option("--seed", o.seed, "master seed");
  s->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--replicas", o.replicas, "independent replicas");
  cmd->add_option("--delta", o.delta, "confidence level for bound reporting");
  cmd->add_option("--env", o.env, "zero | iid | rotating | piecewise | steps");
  cmd->add_option("--change-points", o.change_points,
                  "piecewise environment change rounds");
  cmd->add_option("--pieces", o.pieces, "steps environment pieces per function");
  cmd->add_flag("--common-losses", o.common_losses,
                "replicate task 0's losses across all tasks");
  cmd->add_option("--track", o.track, "K=<int>: track the best K-switch sequence");
  cmd->add_option("--global", o.global_agg, "max | min | sum global loss");
  cmd->add_option("--continuum", o.continuum,
                  "eps=<real>,m=<int>: discretized task continuum");
  cmd->add_option("--out", o.out, "output path (default stdout)");
  cmd->add_option("--format", o.format, "csv | json");
}

int parse_key_int(const std::string& text, const std::string& key,
                  const std::string& flag) {
  std::string body = text;
  if (body.rfind(key + "=", 0) == 0) body = body.substr(key.size() + 1);
  try {
    std::size_t pos = 0;
    int v = std::stoi(body, &pos);
    if (pos != body.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw cewa::InputError("flag " + flag + ": expected " + key + "=<int>");
  }
}

cewa::Config assemble(const CliOverrides& o) {
  cewa::Config cfg;
  if (!o.config_path.empty()) cfg = cewa::load_config_file(o.config_path);
  if (!o.constraint.empty()) cfg.constraint = o.constraint;
  if (o.tasks >= 0) cfg.tasks = o.tasks;
  if (o.actions >= 0) cfg.actions = o.actions;
  if (!o.action_values.empty()) cfg.action_values = o.action_values;
  if (o.rounds >= 0) cfg.rounds = o.rounds;
  if (!o.eta.empty()) cfg.eta = o.eta;
  if (!o.eta_rate.empty()) cfg.eta_rate = o.eta_rate;
  if (o.seed_set) cfg.seed = o.seed;
  if (o.replicas >= 0) cfg.replicas = o.replicas;
  if (o.delta >= 0) cfg.delta = o.delta;
  if (!o.env.empty()) cfg.env_kind = o.env;
  if (!o.change_points.empty()) cfg.change_points = o.change_points;
  if (o.pieces >= 0) cfg.env_pieces = o.pieces;
  if (o.common_losses) cfg.common_losses = true;
  if (!o.out.empty()) cfg.out_path = o.out;
  if (!o.format.empty()) cfg.out_format = o.format;

  int modes = 0;
  if (!o.track.empty()) {
    cfg.mode = "tracking";
    cfg.track_switches = parse_key_int(o.track, "K", "--track");
    ++modes;
  }
  if (!o.global_agg.empty()) {
    cfg.mode = "global";
    cfg.global_agg = o.global_agg;
    ++modes;
  }
  if (!o.continuum.empty()) {
    cfg.mode = "continuum";
    auto comma = o.continuum.find(',');
    std::string eps_part = o.continuum.substr(0, comma);
    std::string m_part =
        comma == std::string::npos ? "" : o.continuum.substr(comma + 1);
    if (eps_part.rfind("eps=", 0) != 0 || m_part.rfind("m=", 0) != 0)
      throw cewa::InputError("flag --continuum: expected eps=<real>,m=<int>");
    cfg.continuum_eps = std::stod(eps_part.substr(4));
    cfg.continuum_shifts = parse_key_int(m_part, "m", "--continuum");
    if (o.env.empty()) cfg.env_kind = "steps";
    ++modes;
  }
  if (modes > 1)
    throw cewa::InputError(
        "flags --track, --global and --continuum are mutually exclusive");
  cewa::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained multi-task exponentially-weighted-average simulator"};
  app.require_subcommand(1);

  CliOverrides run_o, verify_o;
  auto* run_cmd = app.add_subcommand("run", "play the full-information game loop");
  add_common_flags(run_cmd, run_o);
  auto* verify_cmd =
      app.add_subcommand("verify", "oracle-vs-lattice equivalence suite");
  add_common_flags(verify_cmd, verify_o);
  auto* bench_cmd =
      app.add_subcommand("bench", "forward-pass complexity counters and bounds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      auto cfg = assemble(run_o);
      auto result = cewa::run(cfg);
      cewa::write_output(result, std::cout);
      return 0;
    }
    if (verify_cmd->parsed()) {
      auto cfg = assemble(verify_o);
      return cewa::verify(cfg, std::cout) == 0 ? 0 : 1;
    }
    if (bench_cmd->parsed()) return cewa::bench(std::cout) == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
