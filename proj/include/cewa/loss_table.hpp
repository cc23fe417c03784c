#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cewa/errors.hpp"

namespace cewa {

// Cumulative per-task per-action losses L^{(j)}_t(x_k), row-major over
// tasks. Per-round increments must lie in [0, 1].
class LossTable {
 public:
  LossTable(int tasks, int actions)
      : tasks_(tasks),
        actions_(actions),
        cum_(static_cast<std::size_t>(tasks) * actions, 0.0) {
    if (tasks < 1 || actions < 1)
      throw ParameterError("LossTable: tasks and actions must be >= 1");
  }

  static LossTable from_cumulative(int tasks, int actions,
                                   std::vector<double> cum,
                                   std::int64_t rounds) {
    LossTable t(tasks, actions);
    if (cum.size() != t.cum_.size())
      throw InputError("LossTable::from_cumulative: size mismatch");
    for (double v : cum)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InputError("LossTable::from_cumulative: negative or non-finite entry");
    t.cum_ = std::move(cum);
    t.round_ = rounds;
    return t;
  }

  int tasks() const { return tasks_; }
  int actions() const { return actions_; }
  std::int64_t rounds() const { return round_; }
  const std::vector<double>& data() const { return cum_; }

  double at(int task, int action) const {
    return cum_[static_cast<std::size_t>(task) * actions_ + action];
  }

  // Adds one round of losses (tasks x actions, row-major), each in [0, 1].
  void accumulate(std::span<const double> round_losses) {
    if (round_losses.size() != cum_.size())
      throw InputError("accumulate: loss matrix has wrong shape");
    for (double v : round_losses)
      if (!(v >= 0.0 && v <= 1.0))
        throw InputError("accumulate: loss entries must lie in [0, 1]");
    for (std::size_t i = 0; i < cum_.size(); ++i) cum_[i] += round_losses[i];
    ++round_;
  }
  void accumulate(const std::vector<double>& round_losses) {
    accumulate(std::span<const double>(round_losses));
  }

 private:
  int tasks_;
  int actions_;
  std::vector<double> cum_;
  std::int64_t round_ = 0;
};

}  // namespace cewa
