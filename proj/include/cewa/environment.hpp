#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cewa/continuum.hpp"
#include "cewa/errors.hpp"
#include "cewa/rng.hpp"

namespace cewa {

// Loss generators. Each is deterministic given (seed, round): round t's
// randomness comes from a fresh generator seeded by split_seed(seed, t), so
// rounds can be queried in any order and replicas never share streams.
// None of them ever sees the forecaster's realized draw.
class Environment {
 public:
  Environment(int tasks, int actions, std::uint64_t seed)
      : tasks_(tasks), actions_(actions), seed_(seed) {}
  virtual ~Environment() = default;

  int tasks() const { return tasks_; }
  int actions() const { return actions_; }

  // Loss matrix of round t (1-based), tasks x actions, entries in [0, 1].
  virtual std::vector<double> round_losses(std::int64_t t) = 0;

 protected:
  Rng round_rng(std::int64_t t) const {
    return Rng(split_seed(seed_, static_cast<std::uint64_t>(t)));
  }

  int tasks_;
  int actions_;
  std::uint64_t seed_;
};

// All-zero losses; every forecaster has exactly zero regret against it.
class ZeroEnvironment : public Environment {
 public:
  using Environment::Environment;
  std::vector<double> round_losses(std::int64_t) override {
    return std::vector<double>(static_cast<std::size_t>(tasks_) * actions_, 0.0);
  }
};

// Bernoulli losses around fixed per-(task, action) means.
class IidEnvironment : public Environment {
 public:
  IidEnvironment(int tasks, int actions, std::uint64_t seed)
      : Environment(tasks, actions, seed) {
    Rng mean_rng(split_seed(seed, 0));
    means_.resize(static_cast<std::size_t>(tasks) * actions);
    for (auto& m : means_) m = 0.1 + 0.8 * mean_rng.uniform();
  }

  std::vector<double> round_losses(std::int64_t t) override {
    Rng rng = round_rng(t);
    std::vector<double> out(means_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = rng.uniform() < means_[i] ? 1.0 : 0.0;
    return out;
  }

  const std::vector<double>& means() const { return means_; }

 private:
  std::vector<double> means_;
};

// Deterministic rotation of the cheap action across tasks; stresses
// constraints because neighboring tasks want different actions.
class RotatingEnvironment : public Environment {
 public:
  using Environment::Environment;

  std::vector<double> round_losses(std::int64_t t) override {
    std::vector<double> out(static_cast<std::size_t>(tasks_) * actions_, 0.95);
    for (int j = 0; j < tasks_; ++j) {
      int best = static_cast<int>((t + j) % actions_);
      out[static_cast<std::size_t>(j) * actions_ + best] = 0.05;
    }
    return out;
  }
};

// Bernoulli losses whose mean matrix is redrawn at each change point.
class PiecewiseStationaryEnvironment : public Environment {
 public:
  PiecewiseStationaryEnvironment(int tasks, int actions, std::uint64_t seed,
                                 std::vector<std::int64_t> change_points)
      : Environment(tasks, actions, seed),
        change_points_(std::move(change_points)) {
    std::sort(change_points_.begin(), change_points_.end());
    for (std::size_t seg = 0; seg <= change_points_.size(); ++seg) {
      Rng mean_rng(split_seed(split_seed(seed, 0), seg));
      std::vector<double> m(static_cast<std::size_t>(tasks) * actions);
      for (auto& v : m) v = 0.05 + 0.9 * mean_rng.uniform();
      means_.push_back(std::move(m));
    }
  }

  std::vector<double> round_losses(std::int64_t t) override {
    std::size_t seg = 0;
    while (seg < change_points_.size() && t > change_points_[seg]) ++seg;
    Rng rng = round_rng(t);
    const auto& m = means_[seg];
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = rng.uniform() < m[i] ? 1.0 : 0.0;
    return out;
  }

  const std::vector<std::int64_t>& change_points() const {
    return change_points_;
  }

 private:
  std::vector<std::int64_t> change_points_;
  std::vector<std::vector<double>> means_;
};

// Step-function adversary for the task continuum: per round and action, a
// piecewise-constant loss over [0, 1] with random breakpoints and values.
class StepContinuumEnvironment {
 public:
  StepContinuumEnvironment(int actions, int pieces, std::uint64_t seed)
      : actions_(actions), pieces_(pieces), seed_(seed) {
    if (pieces < 1)
      throw ParameterError("continuum environment: pieces must be >= 1");
  }

  int actions() const { return actions_; }

  std::vector<StepFunction> round_functions(std::int64_t t) const {
    Rng rng(split_seed(seed_, static_cast<std::uint64_t>(t)));
    std::vector<StepFunction> out;
    out.reserve(static_cast<std::size_t>(actions_));
    for (int k = 0; k < actions_; ++k) {
      std::vector<double> b{0.0};
      for (int i = 1; i < pieces_; ++i) b.push_back(rng.uniform());
      std::sort(b.begin(), b.end());
      b.erase(std::unique(b.begin(), b.end()), b.end());
      std::vector<double> v(b.size());
      for (auto& x : v) x = rng.uniform();
      out.emplace_back(std::move(b), std::move(v));
    }
    return out;
  }

 private:
  int actions_;
  int pieces_;
  std::uint64_t seed_;
};

inline std::unique_ptr<Environment> make_environment(
    const std::string& kind, int tasks, int actions, std::uint64_t seed,
    const std::vector<std::int64_t>& change_points) {
  if (kind == "zero") return std::make_unique<ZeroEnvironment>(tasks, actions, seed);
  if (kind == "iid") return std::make_unique<IidEnvironment>(tasks, actions, seed);
  if (kind == "rotating")
    return std::make_unique<RotatingEnvironment>(tasks, actions, seed);
  if (kind == "piecewise")
    return std::make_unique<PiecewiseStationaryEnvironment>(tasks, actions, seed,
                                                            change_points);
  throw InputError("unknown environment kind '" + kind + "'");
}

}  // namespace cewa
