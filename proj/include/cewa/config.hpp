#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cewa/errors.hpp"

namespace cewa {

inline constexpr int kConfigSchemaVersion = 1;

// A full experiment description. Parsed from JSON with exact field paths in
// error messages; CLI flags override individual fields afterwards.
struct Config {
  int schema_version = kConfigSchemaVersion;

  std::string constraint = "escalation";
  int tasks = 3;
  int actions = 3;
  std::vector<double> action_values;  // empty: use 1..actions

  std::int64_t rounds = 100;
  std::string eta = "auto";  // "auto" or a positive real
  std::string eta_rate = "log_legal_set";  // or "log_action_count"
  std::uint64_t seed = 1;
  int replicas = 1;
  double delta = 0.05;

  std::string env_kind = "iid";  // zero | iid | rotating | piecewise | steps
  std::vector<std::int64_t> change_points;
  int env_pieces = 3;
  bool common_losses = false;  // replicate task 0's losses across all tasks

  std::string mode = "standard";  // standard | tracking | global | continuum
  int track_switches = 0;
  std::string global_agg = "max";  // max | min | sum
  double continuum_eps = 0.1;
  int continuum_shifts = 1;

  std::string out_path;            // empty: stdout
  std::string out_format = "csv";  // csv | json
};

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& path,
            const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config field '" + path + key + "': " + e.what());
  }
}

}  // namespace detail

// Validates ranges and cross-field consistency; throws InputError with the
// offending field path.
inline void validate_config(const Config& c) {
  auto fail = [](const std::string& path, const std::string& what) {
    throw InputError("config field '" + path + "': " + what);
  };
  if (c.schema_version != kConfigSchemaVersion)
    fail("schema_version", "unsupported version");
  if (c.tasks < 1) fail("tasks", "must be >= 1");
  if (c.actions < 1) fail("actions", "must be >= 1");
  if (!c.action_values.empty() &&
      static_cast<int>(c.action_values.size()) != c.actions)
    fail("action_values", "size must equal 'actions'");
  if (c.rounds < 0) fail("rounds", "must be >= 0");
  if (c.replicas < 1) fail("replicas", "must be >= 1");
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta", "must lie in (0, 1)");
  if (c.eta != "auto") {
    try {
      std::size_t pos = 0;
      double v = std::stod(c.eta, &pos);
      if (pos != c.eta.size() || !(v > 0)) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("eta", "must be 'auto' or a positive real");
    }
  }
  if (c.eta_rate != "log_legal_set" && c.eta_rate != "log_action_count")
    fail("eta_rate", "must be 'log_legal_set' or 'log_action_count'");
  if (c.env_kind != "zero" && c.env_kind != "iid" && c.env_kind != "rotating" &&
      c.env_kind != "piecewise" && c.env_kind != "steps")
    fail("env.kind", "must be zero, iid, rotating, piecewise or steps");
  for (auto t : c.change_points)
    if (t < 1 || t > c.rounds) fail("env.change_points", "must lie in [1, rounds]");
  if (c.env_pieces < 1) fail("env.pieces", "must be >= 1");
  if (c.mode != "standard" && c.mode != "tracking" && c.mode != "global" &&
      c.mode != "continuum")
    fail("forecaster.mode", "must be standard, tracking, global or continuum");
  if (c.track_switches < 0) fail("forecaster.track_switches", "must be >= 0");
  if (c.global_agg != "max" && c.global_agg != "min" && c.global_agg != "sum")
    fail("forecaster.global", "must be max, min or sum");
  if (!(c.continuum_eps > 0.0 && c.continuum_eps <= 1.0))
    fail("forecaster.continuum.eps", "must lie in (0, 1]");
  if (c.continuum_shifts < 0) fail("forecaster.continuum.shifts", "must be >= 0");
  if (c.mode == "continuum" && c.env_kind != "steps")
    fail("env.kind", "continuum mode requires the 'steps' environment");
  if (c.mode != "continuum" && c.env_kind == "steps")
    fail("env.kind", "the 'steps' environment requires continuum mode");
  if (c.out_format != "csv" && c.out_format != "json")
    fail("output.format", "must be csv or json");
}

inline Config parse_config(const nlohmann::json& j) {
  using detail::get_field;
  if (!j.is_object()) throw InputError("config root must be a JSON object");
  Config c;
  c.schema_version = get_field(j, "", "schema_version", c.schema_version);
  c.constraint = get_field(j, "", "constraint", c.constraint);
  c.tasks = get_field(j, "", "tasks", c.tasks);
  c.actions = get_field(j, "", "actions", c.actions);
  c.action_values = get_field(j, "", "action_values", c.action_values);
  c.rounds = get_field(j, "", "rounds", c.rounds);
  if (j.contains("eta") && j.at("eta").is_number())
    c.eta = std::to_string(j.at("eta").get<double>());
  else
    c.eta = get_field(j, "", "eta", c.eta);
  c.eta_rate = get_field(j, "", "eta_rate", c.eta_rate);
  c.seed = get_field(j, "", "seed", c.seed);
  c.replicas = get_field(j, "", "replicas", c.replicas);
  c.delta = get_field(j, "", "delta", c.delta);
  if (j.contains("env")) {
    const auto& e = j.at("env");
    if (!e.is_object()) throw InputError("config field 'env': must be an object");
    c.env_kind = get_field(e, "env.", "kind", c.env_kind);
    c.change_points = get_field(e, "env.", "change_points", c.change_points);
    c.env_pieces = get_field(e, "env.", "pieces", c.env_pieces);
    c.common_losses = get_field(e, "env.", "common_losses", c.common_losses);
  }
  if (j.contains("forecaster")) {
    const auto& f = j.at("forecaster");
    if (!f.is_object())
      throw InputError("config field 'forecaster': must be an object");
    c.mode = get_field(f, "forecaster.", "mode", c.mode);
    c.track_switches =
        get_field(f, "forecaster.", "track_switches", c.track_switches);
    c.global_agg = get_field(f, "forecaster.", "global", c.global_agg);
    if (f.contains("continuum")) {
      const auto& cc = f.at("continuum");
      if (!cc.is_object())
        throw InputError("config field 'forecaster.continuum': must be an object");
      c.continuum_eps =
          get_field(cc, "forecaster.continuum.", "eps", c.continuum_eps);
      c.continuum_shifts =
          get_field(cc, "forecaster.continuum.", "shifts", c.continuum_shifts);
    }
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (!o.is_object())
      throw InputError("config field 'output': must be an object");
    c.out_path = get_field(o, "output.", "path", c.out_path);
    c.out_format = get_field(o, "output.", "format", c.out_format);
  }
  validate_config(c);
  return c;
}

inline Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config file '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace cewa
