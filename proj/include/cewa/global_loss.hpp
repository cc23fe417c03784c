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

enum class Aggregator { Max, Min, Sum };

inline const char* aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::Max: return "max";
    case Aggregator::Min: return "min";
    default: return "sum";
  }
}

// Identical-loss regime: every task sees the same per-action loss c_t. The
// per-round max/min global loss of a vector then depends only on the SET of
// per-task contributions, so the cumulative global loss is tracked exactly
// per nonempty subset. Subsets are bitmasks over the automaton's symbols;
// the no-play symbol contributes a constant zero.
class ActionSetTracker {
 public:
  static constexpr int kMaxSymbols = 12;

  ActionSetTracker(int symbols, int play_actions, Aggregator agg)
      : symbols_(symbols), play_actions_(play_actions), agg_(agg) {
    if (agg == Aggregator::Sum)
      throw ParameterError(
          "ActionSetTracker: sum aggregation is additive; use the standard "
          "forecaster");
    if (symbols > kMaxSymbols)
      throw ParameterError(
          "ActionSetTracker: more than 12 symbols; the subset state space "
          "would be intractable, reduce the action set");
    g_.assign(std::size_t(1) << symbols, 0.0);
  }

  int symbols() const { return symbols_; }
  Aggregator aggregator() const { return agg_; }
  std::int64_t rounds() const { return rounds_; }

  // Accumulates G(v) += agg_{k in v} c(k) for every nonempty subset v.
  void update(std::span<const double> common_losses) {
    if (static_cast<int>(common_losses.size()) != play_actions_)
      throw InputError("ActionSetTracker: expected one loss per action");
    for (double v : common_losses)
      if (!(v >= 0.0 && v <= 1.0))
        throw InputError("ActionSetTracker: losses must lie in [0, 1]");
    // Contribution of each symbol; trailing no-play symbol costs zero.
    std::vector<double> c(static_cast<std::size_t>(symbols_), 0.0);
    for (int k = 0; k < play_actions_; ++k) c[static_cast<std::size_t>(k)] = common_losses[static_cast<std::size_t>(k)];
    std::vector<double> agg(g_.size(), 0.0);
    for (std::uint32_t v = 1; v < g_.size(); ++v) {
      int low = __builtin_ctz(v);
      std::uint32_t rest = v & (v - 1);
      double x = c[static_cast<std::size_t>(low)];
      agg[v] = rest == 0 ? x
                         : (agg_ == Aggregator::Max ? std::max(agg[rest], x)
                                                    : std::min(agg[rest], x));
    }
    for (std::uint32_t v = 1; v < g_.size(); ++v) g_[v] += agg[v];
    ++rounds_;
  }
  void update(const std::vector<double>& c) {
    update(std::span<const double>(c));
  }

  // Cumulative global loss of the subset mask v over all observed rounds.
  double cumulative(std::uint32_t v) const { return g_[v]; }

 private:
  int symbols_;
  int play_actions_;
  Aggregator agg_;
  std::vector<double> g_;
  std::int64_t rounds_ = 0;
};

// The hidden-value automaton the global lattice runs on: values are subset
// masks, transitions grow the mask, the readout feeds the sink exponential.
struct AggregatorAutomaton {
  const ActionSetTracker* tracker;

  std::uint32_t initial(int k) const { return 1u << k; }
  std::uint32_t transition(std::uint32_t v, int k) const { return v | (1u << k); }
  double readout(std::uint32_t v) const { return tracker->cumulative(v); }
};

// Forecaster for non-additive global losses psi in {max, min} computed by
// the Markov aggregator, plus the degenerate sum case which routes through
// the standard additive lattice. Hard constraints compose freely: the
// lattice state is (action, constraint state, subset mask) and the loss
// exponential is applied only at the sink.
class GlobalForecaster {
 public:
  GlobalForecaster(const ConstraintAutomaton& a, Aggregator agg, double eta)
      : a_(&a), agg_(agg), eta_(eta) {
    if (!(eta > 0)) throw ParameterError("global: eta must be > 0");
    if (agg == Aggregator::Sum) {
      sum_table_.emplace(a.task_count(), a.play_actions());
    } else {
      tracker_.emplace(a.symbols(), a.play_actions(), agg);
    }
  }

  const ConstraintAutomaton& automaton() const { return *a_; }
  Aggregator aggregator() const { return agg_; }
  double eta() const { return eta_; }
  std::int64_t rounds() const { return rounds_; }
  std::uint64_t op_count() const { return op_count_; }

  // One round of common per-action losses c_t: X -> [0, 1].
  void observe_common(std::span<const double> c) {
    if (agg_ == Aggregator::Sum) {
      if (static_cast<int>(c.size()) != a_->play_actions())
        throw InputError("global observe: expected one loss per action");
      std::vector<double> row(
          static_cast<std::size_t>(a_->task_count()) * a_->play_actions());
      for (int j = 0; j < a_->task_count(); ++j)
        for (int k = 0; k < a_->play_actions(); ++k)
          row[static_cast<std::size_t>(j) * a_->play_actions() + k] =
              c[static_cast<std::size_t>(k)];
      sum_table_->accumulate(row);
    } else {
      tracker_->update(c);
    }
    ++rounds_;
    dirty_ = true;
  }
  void observe_common(const std::vector<double>& c) {
    observe_common(std::span<const double>(c));
  }

  // Per-round global loss of a play under the current aggregator.
  double play_loss(std::span<const double> c,
                   std::span<const int> indices) const {
    double acc = 0.0;
    bool first = true;
    for (int j = 0; j < a_->task_count(); ++j) {
      int k = indices[static_cast<std::size_t>(j)];
      double u = a_->is_play_symbol(k) ? c[static_cast<std::size_t>(k)] : 0.0;
      switch (agg_) {
        case Aggregator::Sum: acc += u; break;
        case Aggregator::Max: acc = first ? u : std::max(acc, u); break;
        case Aggregator::Min: acc = first ? u : std::min(acc, u); break;
      }
      first = false;
    }
    return acc;
  }

  double log_normalizer() {
    refresh();
    if (agg_ == Aggregator::Sum) return sum_lattice_->log_normalizer();
    if (log_normalizer_ == kNegInf)
      throw ParameterError("global log_normalizer: legal set is empty");
    return log_normalizer_;
  }

  PlaySample sample(Rng& rng) {
    refresh();
    if (agg_ == Aggregator::Sum) return sum_lattice_->sample(rng);
    const auto& a = *a_;
    const int m = a.task_count();
    log_normalizer();  // emptiness check
    PlaySample out;
    out.indices.assign(static_cast<std::size_t>(m), -1);
    out.states.assign(static_cast<std::size_t>(m), ConstraintState::kDead);
    out.values.assign(static_cast<std::size_t>(m), 0.0);

    std::vector<std::tuple<int, int, std::uint32_t>> cand;
    std::vector<double> w;
    auto draw = [&]() {
      double mx = kNegInf;
      for (double lw : w) mx = std::max(mx, lw);
      if (mx == kNegInf)
        throw InternalError("global sample: conditional mass vanished");
      std::vector<double> lin(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) lin[i] = std::exp(w[i] - mx);
      return cand[rng.categorical(lin)];
    };

    AggregatorAutomaton agg{&*tracker_};
    cand.clear();
    w.clear();
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s))
          for (std::uint32_t v = 0; v < masks(); ++v) {
            double lw = cell(m - 1, k, s, v);
            if (lw != kNegInf) {
              cand.emplace_back(k, s, v);
              w.push_back(lw - eta_ * agg.readout(v));
            }
          }
    auto [k0, s0, v0] = draw();
    out.indices[static_cast<std::size_t>(m - 1)] = k0;
    out.states[static_cast<std::size_t>(m - 1)] = s0;
    std::uint32_t vnext = v0;

    for (int j = m - 2; j >= 0; --j) {
      int knext = out.indices[static_cast<std::size_t>(j + 1)];
      int snext = out.states[static_cast<std::size_t>(j + 1)];
      cand.clear();
      w.clear();
      for (const auto& [pk, ps] : a.predecessors(knext, snext))
        for (std::uint32_t pv :
             {vnext, vnext & ~(std::uint32_t(1) << knext)}) {
          if (!(pv & (std::uint32_t(1) << pk))) continue;
          if (agg.transition(pv, knext) != vnext) continue;
          double lw = cell(j, pk, ps, pv);
          if (lw != kNegInf) {
            cand.emplace_back(pk, ps, pv);
            w.push_back(lw);
          }
        }
      auto [jk, js, jv] = draw();
      out.indices[static_cast<std::size_t>(j)] = jk;
      out.states[static_cast<std::size_t>(j)] = js;
      vnext = jv;
    }
    for (int j = 0; j < m; ++j)
      out.values[static_cast<std::size_t>(j)] =
          a.symbol_value(out.indices[static_cast<std::size_t>(j)]);
    return out;
  }

  // Mass of a legal sequence under the global-loss EWA distribution.
  double prob_of(std::span<const int> seq) {
    refresh();
    if (agg_ == Aggregator::Sum) return sum_lattice_->prob_of(seq);
    const auto& a = *a_;
    const int m = a.task_count();
    if (static_cast<int>(seq.size()) != m)
      throw InputError("global prob_of: sequence length must equal task_count");
    if (!a.is_legal(seq)) return 0.0;
    AggregatorAutomaton agg{&*tracker_};
    std::vector<int> states(static_cast<std::size_t>(m));
    std::vector<std::uint32_t> vs(static_cast<std::size_t>(m));
    int s = a.initial(seq[0]);
    std::uint32_t v = agg.initial(seq[0]);
    states[0] = s;
    vs[0] = v;
    for (int j = 1; j < m; ++j) {
      s = a.step(seq[static_cast<std::size_t>(j - 1)], s,
                 seq[static_cast<std::size_t>(j)]);
      v = agg.transition(v, seq[static_cast<std::size_t>(j)]);
      states[static_cast<std::size_t>(j)] = s;
      vs[static_cast<std::size_t>(j)] = v;
    }

    // Sink draw, then the backward conditional chain.
    std::vector<double> sink;
    for (int k = 0; k < a.symbols(); ++k)
      for (int st = 0; st < a.num_states(); ++st)
        if (a.accepting(st))
          for (std::uint32_t vv = 0; vv < masks(); ++vv) {
            double lw = cell(m - 1, k, st, vv);
            if (lw != kNegInf) sink.push_back(lw - eta_ * agg.readout(vv));
          }
    double lp = cell(m - 1, seq[static_cast<std::size_t>(m - 1)],
                     states[static_cast<std::size_t>(m - 1)],
                     vs[static_cast<std::size_t>(m - 1)]) -
                eta_ * agg.readout(vs[static_cast<std::size_t>(m - 1)]) -
                log_sum_exp(sink);
    for (int j = m - 2; j >= 0; --j) {
      int knext = seq[static_cast<std::size_t>(j + 1)];
      int snext = states[static_cast<std::size_t>(j + 1)];
      std::uint32_t vn = vs[static_cast<std::size_t>(j + 1)];
      std::vector<double> w;
      for (const auto& [pk, ps] : a.predecessors(knext, snext))
        for (std::uint32_t pv : {vn, vn & ~(std::uint32_t(1) << knext)}) {
          if (!(pv & (std::uint32_t(1) << pk))) continue;
          if ((pv | (std::uint32_t(1) << knext)) != vn) continue;
          double lw = cell(j, pk, ps, pv);
          if (lw != kNegInf) w.push_back(lw);
        }
      lp += cell(j, seq[static_cast<std::size_t>(j)],
                 states[static_cast<std::size_t>(j)],
                 vs[static_cast<std::size_t>(j)]) -
            log_sum_exp(w);
    }
    return std::exp(lp);
  }
  double prob_of(const std::vector<int>& seq) {
    return prob_of(std::span<const int>(seq));
  }

  // argmin over A of the cumulative global loss, lexicographic tie-break.
  BestFixed best_fixed_global() {
    refresh();
    if (agg_ == Aggregator::Sum) return best_fixed(*a_, *sum_table_);
    const auto& a = *a_;
    const int m = a.task_count();
    AggregatorAutomaton agg{&*tracker_};
    struct Cell {
      bool live = false;
      std::vector<int> seq;
    };
    std::vector<Cell> cur(cells_per_layer()), next;
    for (int k = 0; k < a.symbols(); ++k) {
      int s = a.initial(k);
      if (s == ConstraintState::kDead) continue;
      auto& c = cur[cell_index(k, s, agg.initial(k))];
      std::vector<int> seq{k};
      if (!c.live || seq < c.seq) {
        c.live = true;
        c.seq = std::move(seq);
      }
    }
    for (int j = 1; j < m; ++j) {
      next.assign(cells_per_layer(), Cell{});
      for (int k = 0; k < a.symbols(); ++k)
        for (int s = 0; s < a.num_states(); ++s)
          for (std::uint32_t v = 0; v < masks(); ++v) {
            const auto& c = cur[cell_index(k, s, v)];
            if (!c.live) continue;
            for (const auto& [kp, sp] : a.successors(k, s)) {
              auto& nc = next[cell_index(kp, sp, agg.transition(v, kp))];
              std::vector<int> seq = c.seq;
              seq.push_back(kp);
              if (!nc.live || seq < nc.seq) {
                nc.live = true;
                nc.seq = std::move(seq);
              }
            }
          }
      cur = std::move(next);
    }
    BestFixed out;
    bool found = false;
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s))
          for (std::uint32_t v = 0; v < masks(); ++v) {
            const auto& c = cur[cell_index(k, s, v)];
            if (!c.live) continue;
            double cost = agg.readout(v);
            if (!found || cost < out.loss ||
                (cost == out.loss && c.seq < out.sequence)) {
              found = true;
              out.loss = cost;
              out.sequence = c.seq;
            }
          }
    if (!found)
      throw ParameterError("best_fixed_global: legal set is empty");
    return out;
  }

 private:
  std::uint32_t masks() const {
    return std::uint32_t(1) << a_->symbols();
  }
  std::size_t cells_per_layer() const {
    return static_cast<std::size_t>(a_->symbols()) * a_->num_states() * masks();
  }
  std::size_t cell_index(int k, int s, std::uint32_t v) const {
    return (static_cast<std::size_t>(k) * a_->num_states() + s) * masks() + v;
  }
  double& cell_ref(int j, int k, int s, std::uint32_t v) {
    return cells_[static_cast<std::size_t>(j) * cells_per_layer() +
                  cell_index(k, s, v)];
  }
  double cell(int j, int k, int s, std::uint32_t v) const {
    return cells_[static_cast<std::size_t>(j) * cells_per_layer() +
                  cell_index(k, s, v)];
  }

  // Extended forward pass: transitions carry subset growth and no loss
  // factors; the exponential enters only through the sink readout.
  void refresh() {
    if (!dirty_) return;
    dirty_ = false;
    if (agg_ == Aggregator::Sum) {
      sum_lattice_.emplace(*a_, *sum_table_, eta_);
      op_count_ += sum_lattice_->relaxations();
      return;
    }
    const auto& a = *a_;
    const int m = a.task_count();
    AggregatorAutomaton agg{&*tracker_};
    cells_.assign(static_cast<std::size_t>(m) * cells_per_layer(), kNegInf);
    for (int k = 0; k < a.symbols(); ++k) {
      int s = a.initial(k);
      if (s != ConstraintState::kDead)
        cell_ref(0, k, s, agg.initial(k)) =
            log_add_exp(cell_ref(0, k, s, agg.initial(k)), 0.0);
    }
    for (int j = 0; j + 1 < m; ++j)
      for (int k = 0; k < a.symbols(); ++k)
        for (int s = 0; s < a.num_states(); ++s)
          for (std::uint32_t v = 0; v < masks(); ++v) {
            double lw = cell(j, k, s, v);
            if (lw == kNegInf) continue;
            for (const auto& [kp, sp] : a.successors(k, s)) {
              ++op_count_;
              auto& into = cell_ref(j + 1, kp, sp, agg.transition(v, kp));
              into = log_add_exp(into, lw);
            }
          }
    std::vector<double> sink;
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s))
          for (std::uint32_t v = 0; v < masks(); ++v) {
            double lw = cell(m - 1, k, s, v);
            if (lw != kNegInf) sink.push_back(lw - eta_ * agg.readout(v));
          }
    log_normalizer_ = log_sum_exp(sink);
  }

  const ConstraintAutomaton* a_;
  Aggregator agg_;
  double eta_;
  std::int64_t rounds_ = 0;
  bool dirty_ = true;
  std::uint64_t op_count_ = 0;

  std::optional<ActionSetTracker> tracker_;  // max/min route
  std::vector<double> cells_;
  double log_normalizer_ = kNegInf;

  std::optional<LossTable> sum_table_;  // sum route
  std::optional<WeightLattice> sum_lattice_;
};

// Learning-rate default with the bound's range factor: sup|psi| is 1 for
// max/min and M for sum.
inline double eta_global_default(std::int64_t horizon,
                                 const ConstraintAutomaton& a, Aggregator agg) {
  if (horizon < 1) throw ParameterError("eta_global: horizon must be >= 1");
  double lg = count_legal(a).log_count;
  if (lg == kNegInf) throw ParameterError("eta_global: legal set is empty");
  lg = std::max(lg, 1e-12);
  double range = agg == Aggregator::Sum ? double(a.task_count()) : 1.0;
  return std::sqrt(8.0 * lg / double(horizon)) / range;
}

}  // namespace cewa
