#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cewa/automaton.hpp"
#include "cewa/errors.hpp"
#include "cewa/lattice.hpp"
#include "cewa/loss_table.hpp"
#include "cewa/numeric.hpp"

// Exhaustive reference implementations. Deliberately naive: they exist to
// check the lattice, never to be fast. Every routine refuses instances
// above its cap instead of truncating.

namespace cewa::oracle {

struct EnumeratedSet {
  // Legal sequences in lexicographic order of action indices.
  std::vector<std::vector<int>> sequences;
  std::size_t cardinality() const { return sequences.size(); }
};

inline EnumeratedSet enumerate_legal(const ConstraintAutomaton& a,
                                     double cap = 1e7) {
  if (std::pow(double(a.symbols()), double(a.task_count())) > cap)
    throw CapError("enumerate_legal: N^M exceeds cap; use the lattice instead");
  EnumeratedSet out;
  std::vector<int> seq;
  seq.reserve(static_cast<std::size_t>(a.task_count()));
  // Depth-first fold over step, pruning dead prefixes.
  auto rec = [&](auto&& self, int state) -> void {
    if (static_cast<int>(seq.size()) == a.task_count()) {
      if (a.accepting(state)) out.sequences.push_back(seq);
      return;
    }
    for (int kp = 0; kp < a.symbols(); ++kp) {
      int sp = seq.empty() ? a.initial(kp) : a.step(seq.back(), state, kp);
      if (sp == ConstraintState::kDead) continue;
      seq.push_back(kp);
      self(self, sp);
      seq.pop_back();
    }
  };
  rec(rec, ConstraintState::kDead);
  return out;
}

inline std::uint64_t oracle_count(const EnumeratedSet& set) {
  return set.cardinality();
}

// Exponentially-weighted masses exp(-eta L(x)) / Z over the enumerated set,
// computed in the log domain then normalized.
inline std::vector<double> oracle_distribution(const EnumeratedSet& set,
                                               const ConstraintAutomaton& a,
                                               const LossTable& t, double eta) {
  if (set.sequences.empty())
    throw InputError("oracle_distribution: empty set");
  std::vector<double> lw(set.sequences.size());
  for (std::size_t i = 0; i < set.sequences.size(); ++i) {
    double loss = 0.0;
    for (int j = 0; j < a.task_count(); ++j)
      loss += detail::symbol_loss(a, t, j, set.sequences[i][static_cast<std::size_t>(j)]);
    lw[i] = -eta * loss;
  }
  double z = log_sum_exp(lw);
  std::vector<double> mass(lw.size());
  for (std::size_t i = 0; i < lw.size(); ++i) mass[i] = std::exp(lw[i] - z);
  return mass;
}

// Exact argmin over the enumerated set with the lexicographic tie-break.
inline std::pair<std::vector<int>, double> oracle_best_fixed(
    const EnumeratedSet& set, const ConstraintAutomaton& a, const LossTable& t) {
  if (set.sequences.empty()) throw InputError("oracle_best_fixed: empty set");
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.sequences.size(); ++i) {
    double loss = 0.0;
    for (int j = 0; j < a.task_count(); ++j)
      loss += detail::symbol_loss(a, t, j, set.sequences[i][static_cast<std::size_t>(j)]);
    // Sequences are already in lexicographic order: strict improvement only.
    if (loss < best_loss) {
      best_loss = loss;
      best = i;
    }
  }
  return {set.sequences[best], best_loss};
}

// All sequences (x_1..x_n) of legal vectors with at most `max_switches`
// value changes, as indices into `set`. Class size precomputed exactly for
// the cap check.
inline std::vector<std::vector<int>> enumerate_switching(
    const EnumeratedSet& set, int rounds, int max_switches, double cap = 2e6) {
  if (rounds < 1) throw InputError("enumerate_switching: rounds must be >= 1");
  if (max_switches < 0)
    throw InputError("enumerate_switching: max_switches must be >= 0");
  const double na = double(set.cardinality());
  double total = 0;
  for (int i = 0; i <= std::min(max_switches, rounds - 1); ++i)
    total += std::exp(log_choose(rounds - 1, i)) * na * std::pow(na - 1, i);
  if (total > cap)
    throw CapError("enumerate_switching: class size exceeds cap");

  std::vector<std::vector<int>> out;
  std::vector<int> seq;
  seq.reserve(static_cast<std::size_t>(rounds));
  auto rec = [&](auto&& self, int switches) -> void {
    if (static_cast<int>(seq.size()) == rounds) {
      out.push_back(seq);
      return;
    }
    for (int v = 0; v < static_cast<int>(set.cardinality()); ++v) {
      int sw = switches + (!seq.empty() && seq.back() != v ? 1 : 0);
      if (sw > max_switches) continue;
      seq.push_back(v);
      self(self, sw);
      seq.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace cewa::oracle
