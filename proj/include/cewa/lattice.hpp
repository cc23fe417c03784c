#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cewa/automaton.hpp"
#include "cewa/errors.hpp"
#include "cewa/loss_table.hpp"
#include "cewa/numeric.hpp"
#include "cewa/rng.hpp"

namespace cewa {

// One legal draw: per-task action indices, the hidden-state trajectory,
// and the corresponding action values (NaN for the no-play symbol).
struct PlaySample {
  std::vector<int> indices;
  std::vector<int> states;
  std::vector<double> values;
};

namespace detail {

// Loss of a symbol in a task; the no-play symbol always costs zero.
inline double symbol_loss(const ConstraintAutomaton& a, const LossTable& t,
                          int task, int k) {
  return a.is_play_symbol(k) ? t.at(task, k) : 0.0;
}

// Layered forward traversal shared by every semiring. Layer j holds one
// value per (symbol, state) cell; dead cells stay at semiring zero. The
// relaxation counter increments once per live edge examined, independent
// of the semiring, so counts agree across weight/count/min-plus passes.
template <typename Semiring>
struct ForwardResult {
  std::vector<typename Semiring::Value> cells;  // task * (symbols*states) + ...
  std::uint64_t relaxations = 0;
};

template <typename Semiring>
ForwardResult<Semiring> forward_traverse(const ConstraintAutomaton& a,
                                         Semiring& sr) {
  const int m = a.task_count();
  const int ks = a.symbols() * a.num_states();
  ForwardResult<Semiring> out;
  out.cells.assign(static_cast<std::size_t>(m) * ks, sr.zero());
  auto cell = [&](int j, int k, int s) -> typename Semiring::Value& {
    return out.cells[static_cast<std::size_t>(j) * ks + k * a.num_states() + s];
  };
  for (int k = 0; k < a.symbols(); ++k) {
    int s = a.initial(k);
    if (s != ConstraintState::kDead) sr.accumulate(cell(0, k, s), sr.init(k));
  }
  for (int j = 0; j + 1 < m; ++j)
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s) {
        const auto& v = cell(j, k, s);
        if (sr.is_zero(v)) continue;
        for (const auto& [kp, sp] : a.successors(k, s)) {
          ++out.relaxations;
          sr.accumulate(cell(j + 1, kp, sp), sr.extend(v, j + 1, kp));
        }
      }
  return out;
}

struct LogWeightSemiring {
  const ConstraintAutomaton& a;
  const LossTable& t;
  double eta;
  using Value = double;
  Value zero() const { return kNegInf; }
  bool is_zero(Value v) const { return v == kNegInf; }
  Value init(int k) const { return -eta * symbol_loss(a, t, 0, k); }
  Value extend(Value v, int j, int k) const {
    return v - eta * symbol_loss(a, t, j, k);
  }
  void accumulate(Value& into, Value in) const { into = log_add_exp(into, in); }
};

struct CountSemiring {
  using Value = std::uint64_t;
  bool overflow = false;
  Value zero() const { return 0; }
  bool is_zero(Value v) const { return v == 0; }
  Value init(int) const { return 1; }
  Value extend(Value v, int, int) const { return v; }
  void accumulate(Value& into, Value in) {
    if (__builtin_add_overflow(into, in, &into)) overflow = true;
  }
};

struct LogCountSemiring {
  using Value = double;
  Value zero() const { return kNegInf; }
  bool is_zero(Value v) const { return v == kNegInf; }
  Value init(int) const { return 0.0; }
  Value extend(Value v, int, int) const { return v; }
  void accumulate(Value& into, Value in) const { into = log_add_exp(into, in); }
};

// Min-plus with full argmin prefixes; ties resolve to the lexicographically
// smallest action-index sequence.
struct MinPlusSemiring {
  const ConstraintAutomaton& a;
  const LossTable& t;
  struct Value {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<int> seq;
  };
  Value zero() const { return {}; }
  bool is_zero(const Value& v) const {
    return v.cost == std::numeric_limits<double>::infinity();
  }
  Value init(int k) const { return {symbol_loss(a, t, 0, k), {k}}; }
  Value extend(const Value& v, int j, int k) const {
    Value e{v.cost + symbol_loss(a, t, j, k), v.seq};
    e.seq.push_back(k);
    return e;
  }
  static bool better(const Value& x, const Value& y) {
    if (x.cost != y.cost) return x.cost < y.cost;
    return x.seq < y.seq;
  }
  void accumulate(Value& into, Value&& in) const {
    if (is_zero(into) || better(in, into)) into = std::move(in);
  }
  void accumulate(Value& into, const Value& in) const {
    if (is_zero(into) || better(in, into)) into = in;
  }
};

// Cost-only min-plus for callers that do not need the argmin path.
struct MinSemiring {
  const ConstraintAutomaton& a;
  const LossTable& t;
  using Value = double;
  Value zero() const { return std::numeric_limits<double>::infinity(); }
  bool is_zero(Value v) const {
    return v == std::numeric_limits<double>::infinity();
  }
  Value init(int k) const { return symbol_loss(a, t, 0, k); }
  Value extend(Value v, int j, int k) const {
    return v + symbol_loss(a, t, j, k);
  }
  void accumulate(Value& into, Value in) const { into = std::min(into, in); }
};

}  // namespace detail

// Log-domain weights over (task, action, state) triples aggregating
// exp(-eta * cumulative loss) over all legal prefixes, built by the layered
// recursion. Valid while the automaton it was built from is alive.
class WeightLattice {
 public:
  WeightLattice(const ConstraintAutomaton& a, const LossTable& t, double eta)
      : automaton_(&a), eta_(eta) {
    if (!(eta > 0)) throw ParameterError("forward_pass: eta must be > 0");
    if (t.tasks() != a.task_count())
      throw InputError("forward_pass: loss table tasks != automaton tasks");
    if (t.actions() != a.play_actions())
      throw InputError("forward_pass: loss table actions != action set size");
    detail::LogWeightSemiring sr{a, t, eta};
    auto r = detail::forward_traverse(a, sr);
    cells_ = std::move(r.cells);
    relaxations_ = r.relaxations;
    std::vector<double> sink;
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s)) sink.push_back(log_weight(a.task_count() - 1, k, s));
    log_normalizer_ = log_sum_exp(sink);
  }

  const ConstraintAutomaton& automaton() const { return *automaton_; }
  double eta() const { return eta_; }
  std::uint64_t relaxations() const { return relaxations_; }

  double log_weight(int task, int k, int s) const {
    return cells_[static_cast<std::size_t>(task) * automaton_->symbols() *
                      automaton_->num_states() +
                  static_cast<std::size_t>(k) * automaton_->num_states() + s];
  }

  // log sum_{x in A} exp(-eta * L(x)); throws if the legal set is empty.
  double log_normalizer() const {
    if (log_normalizer_ == kNegInf)
      throw ParameterError("log_normalizer: legal set is empty");
    return log_normalizer_;
  }

  // Backward draw: the sink pair from the accepting marginals, then each
  // earlier pair conditioned on its successor through the predecessor lists.
  PlaySample sample(Rng& rng) const {
    const auto& a = *automaton_;
    const int m = a.task_count();
    log_normalizer();  // validates non-emptiness
    PlaySample out;
    out.indices.assign(static_cast<std::size_t>(m), -1);
    out.states.assign(static_cast<std::size_t>(m), ConstraintState::kDead);
    out.values.assign(static_cast<std::size_t>(m), 0.0);

    std::vector<std::pair<int, int>> cand;
    std::vector<double> w;
    auto draw = [&]() -> std::pair<int, int> {
      double mx = kNegInf;
      for (std::size_t i = 0; i < cand.size(); ++i) mx = std::max(mx, w[i]);
      if (mx == kNegInf)
        throw InternalError("sample: conditional mass vanished");
      for (auto& lw : w) lw = std::exp(lw - mx);
      return cand[rng.categorical(w)];
    };

    cand.clear();
    w.clear();
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s) && log_weight(m - 1, k, s) != kNegInf) {
          cand.emplace_back(k, s);
          w.push_back(log_weight(m - 1, k, s));
        }
    auto [k, s] = draw();
    out.indices[static_cast<std::size_t>(m - 1)] = k;
    out.states[static_cast<std::size_t>(m - 1)] = s;

    for (int j = m - 2; j >= 0; --j) {
      cand.clear();
      w.clear();
      int knext = out.indices[static_cast<std::size_t>(j + 1)];
      int snext = out.states[static_cast<std::size_t>(j + 1)];
      for (const auto& [pk, ps] : a.predecessors(knext, snext))
        if (log_weight(j, pk, ps) != kNegInf) {
          cand.emplace_back(pk, ps);
          w.push_back(log_weight(j, pk, ps));
        }
      auto [jk, js] = draw();
      out.indices[static_cast<std::size_t>(j)] = jk;
      out.states[static_cast<std::size_t>(j)] = js;
    }
    for (int j = 0; j < m; ++j)
      out.values[static_cast<std::size_t>(j)] =
          a.symbol_value(out.indices[static_cast<std::size_t>(j)]);
    return out;
  }

  // Mass the sampler assigns to a full sequence: the product of the same
  // backward conditionals sample() draws from. Zero for illegal sequences.
  double prob_of(std::span<const int> seq) const {
    const auto& a = *automaton_;
    const int m = a.task_count();
    if (static_cast<int>(seq.size()) != m)
      throw InputError("prob_of: sequence length must equal task_count");
    for (int k : seq)
      if (k < 0 || k >= a.symbols())
        throw InputError("prob_of: action index out of range");
    std::vector<int> states(static_cast<std::size_t>(m));
    int s = a.initial(seq[0]);
    states[0] = s;
    for (int j = 1; j < m && s != ConstraintState::kDead; ++j) {
      s = a.step(seq[static_cast<std::size_t>(j - 1)], s, seq[static_cast<std::size_t>(j)]);
      states[static_cast<std::size_t>(j)] = s;
    }
    if (s == ConstraintState::kDead || !a.accepting(s)) return 0.0;

    double lp = log_weight(m - 1, seq[static_cast<std::size_t>(m - 1)],
                           states[static_cast<std::size_t>(m - 1)]) -
                log_normalizer();
    for (int j = m - 2; j >= 0; --j) {
      std::vector<double> w;
      for (const auto& [pk, ps] :
           a.predecessors(seq[static_cast<std::size_t>(j + 1)],
                          states[static_cast<std::size_t>(j + 1)]))
        w.push_back(log_weight(j, pk, ps));
      lp += log_weight(j, seq[static_cast<std::size_t>(j)],
                       states[static_cast<std::size_t>(j)]) -
            log_sum_exp(w);
    }
    return std::exp(lp);
  }
  double prob_of(const std::vector<int>& seq) const {
    return prob_of(std::span<const int>(seq));
  }

 private:
  const ConstraintAutomaton* automaton_;
  double eta_;
  std::vector<double> cells_;
  double log_normalizer_ = kNegInf;
  std::uint64_t relaxations_ = 0;
};

inline WeightLattice forward_pass(const ConstraintAutomaton& a,
                                  const LossTable& t, double eta) {
  return WeightLattice(a, t, eta);
}

// --- counting ----------------------------------------------------------------

struct LegalCount {
  bool exact = false;          // count fits in uint64
  std::uint64_t count = 0;     // valid when exact
  double log_count = kNegInf;  // always valid
  std::uint64_t relaxations = 0;
};

// |A| by a zero-loss sum pass; falls back to a log-domain pass when the
// integer count overflows 64 bits.
inline LegalCount count_legal(const ConstraintAutomaton& a) {
  detail::CountSemiring sr;
  auto r = detail::forward_traverse(a, sr);
  LegalCount out;
  out.relaxations = r.relaxations;
  const int m = a.task_count();
  const int ks = a.symbols() * a.num_states();
  if (!sr.overflow) {
    std::uint64_t total = 0;
    bool over = false;
    for (int k = 0; k < a.symbols() && !over; ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s)) {
          std::uint64_t c =
              r.cells[static_cast<std::size_t>(m - 1) * ks + k * a.num_states() + s];
          if (__builtin_add_overflow(total, c, &total)) {
            over = true;
            break;
          }
        }
    if (!over) {
      out.exact = true;
      out.count = total;
      out.log_count = total == 0 ? kNegInf : std::log(double(total));
      return out;
    }
  }
  detail::LogCountSemiring lsr;
  auto lr = detail::forward_traverse(a, lsr);
  std::vector<double> sink;
  for (int k = 0; k < a.symbols(); ++k)
    for (int s = 0; s < a.num_states(); ++s)
      if (a.accepting(s))
        sink.push_back(
            lr.cells[static_cast<std::size_t>(m - 1) * ks + k * a.num_states() + s]);
  out.log_count = log_sum_exp(sink);
  return out;
}

// --- comparator --------------------------------------------------------------

struct BestFixed {
  std::vector<int> sequence;
  double loss = 0.0;
  std::uint64_t relaxations = 0;
};

// argmin over A of the cumulative loss; ties break to the lexicographically
// smallest action-index sequence.
inline BestFixed best_fixed(const ConstraintAutomaton& a, const LossTable& t) {
  detail::MinPlusSemiring sr{a, t};
  auto r = detail::forward_traverse(a, sr);
  const int m = a.task_count();
  const int ks = a.symbols() * a.num_states();
  detail::MinPlusSemiring::Value best = sr.zero();
  for (int k = 0; k < a.symbols(); ++k)
    for (int s = 0; s < a.num_states(); ++s)
      if (a.accepting(s))
        sr.accumulate(
            best,
            r.cells[static_cast<std::size_t>(m - 1) * ks + k * a.num_states() + s]);
  if (sr.is_zero(best)) throw ParameterError("best_fixed: legal set is empty");
  return {std::move(best.seq), best.cost, r.relaxations};
}

// Minimum cumulative loss only (no argmin path); same traversal.
inline double min_legal_loss(const ConstraintAutomaton& a, const LossTable& t) {
  detail::MinSemiring sr{a, t};
  auto r = detail::forward_traverse(a, sr);
  const int m = a.task_count();
  const int ks = a.symbols() * a.num_states();
  double best = sr.zero();
  for (int k = 0; k < a.symbols(); ++k)
    for (int s = 0; s < a.num_states(); ++s)
      if (a.accepting(s))
        best = std::min(
            best,
            r.cells[static_cast<std::size_t>(m - 1) * ks + k * a.num_states() + s]);
  if (sr.is_zero(best))
    throw ParameterError("min_legal_loss: legal set is empty");
  return best;
}

// --- learning rate -----------------------------------------------------------

enum class EtaRate {
  LogLegalSet,     // ln|A|; matches the regret bound's leading term
  LogActionCount,  // ln N
};

// (1/M) * sqrt(8 * ln|A| / n) by default. The ln N variant is exposed for
// comparison with the classical single-task tuning.
inline double eta_default(std::int64_t horizon, const ConstraintAutomaton& a,
                          EtaRate rate = EtaRate::LogLegalSet) {
  if (horizon < 1) throw ParameterError("eta_default: horizon must be >= 1");
  double lg = rate == EtaRate::LogLegalSet
                  ? count_legal(a).log_count
                  : std::log(double(a.play_actions()));
  if (lg == kNegInf) throw ParameterError("eta_default: legal set is empty");
  lg = std::max(lg, 1e-12);  // |A| = 1 still needs a positive rate
  return std::sqrt(8.0 * lg / double(horizon)) / double(a.task_count());
}

}  // namespace cewa
