#pragma once

#include <cmath>
#include <vector>

#include "cewa/automaton.hpp"
#include "cewa/loss_table.hpp"
#include "cewa/rng.hpp"

namespace testutil {

// Random action set of n strictly increasing values in (0, n].
inline cewa::ActionSet random_actions(cewa::Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  double x = 0.0;
  for (int i = 0; i < n; ++i) {
    x += 0.2 + rng.uniform();
    v[static_cast<std::size_t>(i)] = x;
  }
  return cewa::ActionSet(std::move(v));
}

// One instance from each of the five built-in families, with parameters
// drawn to keep the legal set non-empty and oracle-enumerable.
inline cewa::ConstraintAutomaton random_instance(cewa::Rng& rng, int family,
                                                 int tasks, int n) {
  using namespace cewa;
  switch (family % 5) {
    case 0: {
      auto acts = random_actions(rng, n);
      double gamma = 0.25 + rng.uniform() * (acts.span() + 0.5);
      return make_coherence(std::move(acts), gamma, tasks);
    }
    case 1:
      return make_escalation(random_actions(rng, n), tasks);
    case 2: {
      int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(tasks)));
      return make_constancy(random_actions(rng, n), m, tasks);
    }
    case 3: {
      auto acts = ActionSet::iota(n);
      double lo = double(tasks) * acts.value(0);
      double hi = double(tasks) * acts.value(n - 1);
      double budget = lo + rng.uniform() * (hi - lo);
      return make_budget(std::move(acts), budget, tasks);
    }
    default: {
      int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(tasks)));
      return make_task_subset(random_actions(rng, n), m, tasks);
    }
  }
}

// Loss table after `rounds` random rounds with entries in [0, 1].
inline cewa::LossTable random_losses(cewa::Rng& rng,
                                     const cewa::ConstraintAutomaton& a,
                                     int rounds) {
  cewa::LossTable t(a.task_count(), a.play_actions());
  std::vector<double> row(
      static_cast<std::size_t>(a.task_count()) * a.play_actions());
  for (int r = 0; r < rounds; ++r) {
    for (auto& v : row) v = rng.uniform();
    t.accumulate(row);
  }
  return t;
}

// Independent check of enumerate_legal: full odometer scan over all
// symbol sequences filtered by is_legal.
inline std::vector<std::vector<int>> full_scan_legal(
    const cewa::ConstraintAutomaton& a) {
  std::vector<std::vector<int>> out;
  std::vector<int> seq(static_cast<std::size_t>(a.task_count()), 0);
  for (;;) {
    if (a.is_legal(seq)) out.push_back(seq);
    int j = a.task_count() - 1;
    while (j >= 0 && ++seq[static_cast<std::size_t>(j)] == a.symbols()) {
      seq[static_cast<std::size_t>(j)] = 0;
      --j;
    }
    if (j < 0) break;
  }
  return out;
}

}  // namespace testutil
