#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cewa/automaton.hpp"
#include "cewa/errors.hpp"
#include "cewa/lattice.hpp"
#include "cewa/loss_table.hpp"
#include "cewa/numeric.hpp"
#include "cewa/rng.hpp"

namespace cewa {

// Right-continuous step function on [0, 1]: value values[i] on
// [breakpoints[i], breakpoints[i+1]), the last piece extending to 1.
class StepFunction {
 public:
  StepFunction(std::vector<double> breakpoints, std::vector<double> values)
      : b_(std::move(breakpoints)), v_(std::move(values)) {
    if (b_.empty() || b_.size() != v_.size())
      throw InputError("StepFunction: breakpoints/values size mismatch");
    if (b_.front() != 0.0)
      throw InputError("StepFunction: first breakpoint must be 0");
    for (std::size_t i = 0; i + 1 < b_.size(); ++i)
      if (!(b_[i] < b_[i + 1]))
        throw InputError("StepFunction: breakpoints must be strictly increasing");
    if (b_.back() >= 1.0 && b_.size() > 1)
      throw InputError("StepFunction: breakpoints must lie in [0, 1)");
  }

  static StepFunction constant(double v) { return StepFunction({0.0}, {v}); }

  const std::vector<double>& breakpoints() const { return b_; }
  const std::vector<double>& values() const { return v_; }

  double at(double g) const {
    auto it = std::upper_bound(b_.begin(), b_.end(), g);
    return v_[static_cast<std::size_t>(it - b_.begin()) - 1];
  }

  // Exact integral over [lo, hi): sum of value * overlap length.
  double integrate(double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < b_.size(); ++i) {
      double seg_lo = b_[i];
      double seg_hi = i + 1 < b_.size() ? b_[i + 1] : 1.0;
      double ov = std::min(hi, seg_hi) - std::max(lo, seg_lo);
      if (ov > 0) acc += v_[i] * ov;
    }
    return acc;
  }

  bool values_in_unit_interval() const {
    for (double x : v_)
      if (!(x >= 0.0 && x <= 1.0)) return false;
    return true;
  }

 private:
  std::vector<double> b_;
  std::vector<double> v_;
};

// Partition of [0, 1] into ceil(1/eps) cells of length eps, the last cell
// absorbing the remainder.
class SuperTaskGrid {
 public:
  explicit SuperTaskGrid(double eps) : eps_(eps) {
    if (!(eps > 0.0 && eps <= 1.0))
      throw ParameterError("grid: eps must lie in (0, 1]");
    cells_ = static_cast<int>(std::ceil(1.0 / eps - 1e-12));
    if (double(cells_) * eps + 1e-12 < 1.0) ++cells_;
  }

  double eps() const { return eps_; }
  int cells() const { return cells_; }
  double lower(int j) const { return std::min(double(j) * eps_, 1.0); }
  double upper(int j) const {
    return j + 1 == cells_ ? 1.0 : std::min(double(j + 1) * eps_, 1.0);
  }
  double width(int j) const { return upper(j) - lower(j); }

 private:
  double eps_;
  int cells_;
};

inline SuperTaskGrid discretize(double eps) { return SuperTaskGrid(eps); }

// Exact per-super-task losses: entry (j, k) = integral of psi(., x_k) over
// cell j. One step function per action; entries land in [0, cell width].
inline std::vector<double> integrate_losses(
    const std::vector<StepFunction>& psi_per_action, const SuperTaskGrid& grid) {
  std::vector<double> out(static_cast<std::size_t>(grid.cells()) *
                          psi_per_action.size());
  for (std::size_t k = 0; k < psi_per_action.size(); ++k) {
    if (!psi_per_action[k].values_in_unit_interval())
      throw InputError("integrate_losses: step values must lie in [0, 1]");
    for (int j = 0; j < grid.cells(); ++j)
      out[static_cast<std::size_t>(j) * psi_per_action.size() + k] =
          psi_per_action[k].integrate(grid.lower(j), grid.upper(j));
  }
  return out;
}

// A sampled continuum play: the per-super-task draw plus its rendering as a
// right-continuous step function over [0, 1] with shifts at grid points.
struct ContinuumPlay {
  PlaySample cells;
  StepFunction function = StepFunction::constant(0.0);
};

// Constancy-constrained forecaster over the discretized task continuum:
// at most max_shifts action changes along [0, 1], all at grid points.
class ContinuumForecaster {
 public:
  ContinuumForecaster(ActionSet actions, SuperTaskGrid grid, int max_shifts,
                      double eta)
      : grid_(grid),
        automaton_(make_constancy(std::move(actions), max_shifts, grid.cells())),
        table_(grid.cells(), automaton_.play_actions()),
        eta_(eta) {
    if (!(eta > 0)) throw ParameterError("continuum: eta must be > 0");
  }

  const SuperTaskGrid& grid() const { return grid_; }
  const ConstraintAutomaton& automaton() const { return automaton_; }
  const LossTable& cumulative() const { return table_; }
  double eta() const { return eta_; }
  std::int64_t rounds() const { return table_.rounds(); }
  std::uint64_t op_count() const { return op_count_; }

  // Integrated loss matrix of one adversary round (cells x actions).
  std::vector<double> integrate(const std::vector<StepFunction>& psi) const {
    if (static_cast<int>(psi.size()) != automaton_.play_actions())
      throw InputError("continuum observe: one step function per action");
    return integrate_losses(psi, grid_);
  }

  void observe(const std::vector<StepFunction>& psi) {
    auto row = integrate(psi);
    // Integrated entries live in [0, cell width] <= [0, 1].
    table_.accumulate(row);
    lattice_.reset();
  }

  ContinuumPlay sample(Rng& rng) {
    refresh();
    ContinuumPlay out;
    out.cells = lattice_->sample(rng);
    out.function = render(out.cells.indices);
    return out;
  }

  double prob_of(std::span<const int> cell_actions) {
    refresh();
    return lattice_->prob_of(cell_actions);
  }
  double prob_of(const std::vector<int>& cell_actions) {
    return prob_of(std::span<const int>(cell_actions));
  }

  // Loss the adversary round psi inflicts on a per-cell assignment.
  double round_loss(const std::vector<StepFunction>& psi,
                    std::span<const int> cell_actions) const {
    auto row = integrate(psi);
    double acc = 0;
    for (int j = 0; j < grid_.cells(); ++j)
      acc += row[static_cast<std::size_t>(j) * automaton_.play_actions() +
                 cell_actions[static_cast<std::size_t>(j)]];
    return acc;
  }

  StepFunction render(const std::vector<int>& cell_actions) const {
    std::vector<double> b{0.0};
    std::vector<double> v{
        automaton_.actions().value(cell_actions.front())};
    for (int j = 1; j < grid_.cells(); ++j) {
      double x = automaton_.actions().value(cell_actions[static_cast<std::size_t>(j)]);
      if (x != v.back()) {
        b.push_back(grid_.lower(j));
        v.push_back(x);
      }
    }
    return StepFunction(std::move(b), std::move(v));
  }

 private:
  void refresh() {
    if (!lattice_) {
      lattice_.emplace(automaton_, table_, eta_);
      op_count_ += lattice_->relaxations();
    }
  }

  SuperTaskGrid grid_;
  ConstraintAutomaton automaton_;
  LossTable table_;
  double eta_;
  std::optional<WeightLattice> lattice_;
  std::uint64_t op_count_ = 0;
};

// Exponential-weights tuning applied to the super-task instance: the
// per-round loss range is the sum of cell widths, i.e. exactly 1.
inline double eta_continuum_default(std::int64_t horizon,
                                    const ConstraintAutomaton& discretized) {
  if (horizon < 1) throw ParameterError("continuum eta: horizon must be >= 1");
  double lg = std::max(count_legal(discretized).log_count, 1e-12);
  return std::sqrt(8.0 * lg / double(horizon));
}

struct ContinuumRegret {
  double forecaster_loss = 0.0;
  double best_discrete_loss = 0.0;   // best grid-compatible play
  double discretization_slack = 0.0; // m * n * eps / 2
  double regret_vs_discrete() const {
    return forecaster_loss - best_discrete_loss;
  }
};

// Comparator over the grid-compatible class plus the additive slack that
// bounds how much better an unrestricted-shift play could have done.
inline ContinuumRegret continuum_regret(
    const std::vector<double>& forecaster_round_losses,
    const std::vector<std::vector<StepFunction>>& psi_history,
    const ActionSet& actions, const SuperTaskGrid& grid, int max_shifts) {
  ContinuumRegret out;
  for (double v : forecaster_round_losses) out.forecaster_loss += v;
  auto a = make_constancy(actions, max_shifts, grid.cells());
  LossTable cum(grid.cells(), actions.size());
  for (const auto& psi : psi_history)
    cum.accumulate(integrate_losses(psi, grid));
  out.best_discrete_loss = psi_history.empty() ? 0.0 : min_legal_loss(a, cum);
  out.discretization_slack = double(max_shifts) *
                             double(psi_history.size()) * grid.eps() / 2.0;
  return out;
}

// Best at-most-m-shift play with shifts anywhere in [0, 1], computed on the
// common refinement of all adversary breakpoints. Piecewise-constant losses
// make this exact: within a refinement cell every integrand is constant, so
// an optimal play never needs to shift in the interior of a cell. Per-cell
// cumulative values are accumulated through difference arrays, one binary
// search per original piece.
inline double best_unrestricted_loss(
    const std::vector<std::vector<StepFunction>>& psi_history,
    const ActionSet& actions, int max_shifts) {
  if (psi_history.empty()) return 0.0;
  std::vector<double> cuts{0.0};
  for (const auto& round : psi_history)
    for (const auto& f : round)
      for (double b : f.breakpoints()) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const int cells = static_cast<int>(cuts.size());
  const int n_actions = actions.size();

  // diff[k]: difference array of the summed step value per cut interval.
  std::vector<std::vector<double>> diff(
      static_cast<std::size_t>(n_actions),
      std::vector<double>(static_cast<std::size_t>(cells) + 1, 0.0));
  for (const auto& round : psi_history)
    for (int k = 0; k < n_actions; ++k) {
      const auto& f = round[static_cast<std::size_t>(k)];
      const auto& b = f.breakpoints();
      for (std::size_t i = 0; i < b.size(); ++i) {
        // Every piece boundary is a cut, so pieces align with cut cells.
        auto lo = std::lower_bound(cuts.begin(), cuts.end(), b[i]) - cuts.begin();
        auto hi = i + 1 < b.size()
                      ? std::lower_bound(cuts.begin(), cuts.end(), b[i + 1]) -
                            cuts.begin()
                      : cells;
        diff[static_cast<std::size_t>(k)][static_cast<std::size_t>(lo)] +=
            f.values()[i];
        diff[static_cast<std::size_t>(k)][static_cast<std::size_t>(hi)] -=
            f.values()[i];
      }
    }
  std::vector<double> cum(static_cast<std::size_t>(cells) * n_actions, 0.0);
  for (int k = 0; k < n_actions; ++k) {
    double level = 0.0;
    for (int j = 0; j < cells; ++j) {
      level += diff[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      double hi = j + 1 < cells ? cuts[static_cast<std::size_t>(j + 1)] : 1.0;
      cum[static_cast<std::size_t>(j) * n_actions + k] =
          level * (hi - cuts[static_cast<std::size_t>(j)]);
    }
  }
  int m = std::min(max_shifts, cells - 1);
  auto a = make_constancy(actions, m, cells);
  auto table = LossTable::from_cumulative(
      cells, n_actions, std::move(cum),
      static_cast<std::int64_t>(psi_history.size()));
  return min_legal_loss(a, table);
}

}  // namespace cewa
