#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cewa/errors.hpp"

namespace cewa {

// Finite ordered action set. Actions are real values; code addresses them
// by 0-based index throughout.
class ActionSet {
 public:
  explicit ActionSet(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty())
      throw ParameterError("ActionSet: at least one action required");
    for (std::size_t i = 0; i + 1 < values_.size(); ++i)
      if (!(values_[i] < values_[i + 1]))
        throw ParameterError("ActionSet: values must be strictly increasing");
    for (double v : values_)
      if (!std::isfinite(v))
        throw ParameterError("ActionSet: values must be finite");
  }

  // Convenience grid x_k = 1..n.
  static ActionSet iota(int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i + 1;
    return ActionSet(std::move(v));
  }

  int size() const { return static_cast<int>(values_.size()); }
  double value(int k) const { return values_[static_cast<std::size_t>(k)]; }
  const std::vector<double>& values() const { return values_; }
  double span() const { return values_.back() - values_.front(); }

 private:
  std::vector<double> values_;
};

// Hidden constraint state: an index into a finite set, or the absorbing
// dead state meaning the prefix already violates the constraint.
struct ConstraintState {
  static constexpr int kDead = -1;
  int index = kDead;

  static ConstraintState dead() { return {kDead}; }
  bool is_dead() const { return index == kDead; }
  friend bool operator==(ConstraintState a, ConstraintState b) {
    return a.index == b.index;
  }
};

enum class ConstraintFamily { Coherence, Escalation, Constancy, Budget, TaskSubset, Custom };

// Deterministic finite automaton over (action symbol, hidden state) pairs.
// Folding `initial` then `step` over a sequence reproduces the constraint's
// state function; the legal set is every full-length sequence whose fold
// is live and ends in an accepting state. Immutable after construction.
class ConstraintAutomaton {
 public:
  // Raw-table constructor. `step_table[(k * num_states + s) * symbols + kp]`
  // holds the next state index or ConstraintState::kDead. `symbols` may be
  // actions.size() + 1 when a trailing no-play symbol is present.
  static ConstraintAutomaton from_tables(ActionSet actions, int symbols,
                                         int num_states, int task_count,
                                         std::vector<int> initial,
                                         std::vector<int> step_table,
                                         std::vector<char> accept,
                                         ConstraintFamily family = ConstraintFamily::Custom,
                                         std::string descriptor = "custom") {
    return ConstraintAutomaton(std::move(actions), symbols, num_states,
                               task_count, std::move(initial),
                               std::move(step_table), std::move(accept),
                               family, std::move(descriptor));
  }

  int symbols() const { return symbols_; }
  int play_actions() const { return actions_.size(); }
  bool has_noplay() const { return symbols_ > actions_.size(); }
  int noplay_symbol() const { return actions_.size(); }  // valid iff has_noplay
  bool is_play_symbol(int k) const { return k < actions_.size(); }

  int num_states() const { return num_states_; }
  int task_count() const { return task_count_; }
  const ActionSet& actions() const { return actions_; }
  ConstraintFamily family() const { return family_; }
  const std::string& descriptor() const { return descriptor_; }
  bool accepting(int state) const { return accept_[static_cast<std::size_t>(state)] != 0; }
  int num_accepting() const {
    int c = 0;
    for (char a : accept_) c += (a != 0);
    return c;
  }

  // Action value of a symbol; the no-play symbol has no value (NaN).
  double symbol_value(int k) const {
    return is_play_symbol(k) ? actions_.value(k)
                             : std::numeric_limits<double>::quiet_NaN();
  }

  int initial(int k) const { return initial_[static_cast<std::size_t>(k)]; }

  int step(int k, int s, int kp) const {
    return step_table_[(static_cast<std::size_t>(k) * num_states_ + s) * symbols_ + kp];
  }

  // Fold over a non-empty prefix of length <= task_count. Absorbing: once
  // dead, the fold stays dead regardless of the suffix.
  ConstraintState state_of(std::span<const int> seq) const {
    if (seq.empty() || static_cast<int>(seq.size()) > task_count_)
      throw InputError("state_of: sequence length must be in [1, task_count]");
    for (int k : seq)
      if (k < 0 || k >= symbols_)
        throw InputError("state_of: action index out of range");
    int s = initial(seq[0]);
    int prev = seq[0];
    for (std::size_t j = 1; j < seq.size(); ++j) {
      if (s == ConstraintState::kDead) return ConstraintState::dead();
      s = step(prev, s, seq[j]);
      prev = seq[j];
    }
    return {s};
  }
  ConstraintState state_of(const std::vector<int>& seq) const {
    return state_of(std::span<const int>(seq));
  }

  bool is_legal(std::span<const int> seq) const {
    if (static_cast<int>(seq.size()) != task_count_)
      throw InputError("is_legal: sequence length must equal task_count");
    ConstraintState s = state_of(seq);
    return !s.is_dead() && accepting(s.index);
  }
  bool is_legal(const std::vector<int>& seq) const {
    return is_legal(std::span<const int>(seq));
  }

  // Exact preimage of step: every (k, s) with step(k, s, kp) == sp.
  const std::vector<std::pair<int, int>>& predecessors(int kp, int sp) const {
    return preds_[static_cast<std::size_t>(kp) * num_states_ + sp];
  }

  // Live transitions out of (k, s) as (kp, sp) pairs.
  const std::vector<std::pair<int, int>>& successors(int k, int s) const {
    return succs_[static_cast<std::size_t>(k) * num_states_ + s];
  }

  // Maximal predecessor-set cardinality over all (kp, sp); governs the
  // per-layer cost of the forward recursion.
  int t_max() const { return t_max_; }

 private:
  ConstraintAutomaton(ActionSet actions, int symbols, int num_states,
                      int task_count, std::vector<int> initial,
                      std::vector<int> step_table, std::vector<char> accept,
                      ConstraintFamily family, std::string descriptor)
      : actions_(std::move(actions)),
        symbols_(symbols),
        num_states_(num_states),
        task_count_(task_count),
        initial_(std::move(initial)),
        step_table_(std::move(step_table)),
        accept_(std::move(accept)),
        family_(family),
        descriptor_(std::move(descriptor)) {
    if (task_count_ < 1) throw ParameterError("task_count must be >= 1");
    if (num_states_ < 1) throw ParameterError("num_states must be >= 1");
    if (symbols_ != actions_.size() && symbols_ != actions_.size() + 1)
      throw ParameterError("symbols must be N or N+1");
    if (static_cast<int>(initial_.size()) != symbols_)
      throw ParameterError("initial size mismatch");
    if (step_table_.size() !=
        static_cast<std::size_t>(symbols_) * num_states_ * symbols_)
      throw ParameterError("step table size mismatch");
    if (static_cast<int>(accept_.size()) != num_states_)
      throw ParameterError("accept set size mismatch");
    for (int s : initial_)
      if (s != ConstraintState::kDead && (s < 0 || s >= num_states_))
        throw ParameterError("initial state out of range");
    for (int s : step_table_)
      if (s != ConstraintState::kDead && (s < 0 || s >= num_states_))
        throw ParameterError("step state out of range");

    preds_.resize(static_cast<std::size_t>(symbols_) * num_states_);
    succs_.resize(static_cast<std::size_t>(symbols_) * num_states_);
    for (int k = 0; k < symbols_; ++k)
      for (int s = 0; s < num_states_; ++s)
        for (int kp = 0; kp < symbols_; ++kp) {
          int sp = step(k, s, kp);
          if (sp == ConstraintState::kDead) continue;
          preds_[static_cast<std::size_t>(kp) * num_states_ + sp].emplace_back(k, s);
          succs_[static_cast<std::size_t>(k) * num_states_ + s].emplace_back(kp, sp);
        }
    t_max_ = 0;
    for (const auto& p : preds_)
      t_max_ = std::max(t_max_, static_cast<int>(p.size()));
  }

  ActionSet actions_;
  int symbols_;
  int num_states_;
  int task_count_;
  std::vector<int> initial_;
  std::vector<int> step_table_;
  std::vector<char> accept_;
  ConstraintFamily family_;
  std::string descriptor_;
  std::vector<std::vector<std::pair<int, int>>> preds_;
  std::vector<std::vector<std::pair<int, int>>> succs_;
  int t_max_ = 0;
};

// --- built-in constraint families ------------------------------------------

// |x_{k_j} - x_{k_{j+1}}| <= gamma between consecutive tasks.
inline ConstraintAutomaton make_coherence(ActionSet actions, double gamma,
                                          int task_count) {
  if (!(gamma > 0)) throw ParameterError("coherence: gamma must be > 0");
  int n = actions.size();
  std::vector<int> initial(static_cast<std::size_t>(n), 0);
  std::vector<int> step(static_cast<std::size_t>(n) * n, ConstraintState::kDead);
  for (int k = 0; k < n; ++k)
    for (int kp = 0; kp < n; ++kp)
      if (std::abs(actions.value(k) - actions.value(kp)) <= gamma)
        step[static_cast<std::size_t>(k) * n + kp] = 0;
  return ConstraintAutomaton::from_tables(
      std::move(actions), n, 1, task_count, std::move(initial), std::move(step),
      {1}, ConstraintFamily::Coherence, "coherence:gamma=" + std::to_string(gamma));
}

// Non-decreasing action indices across tasks.
inline ConstraintAutomaton make_escalation(ActionSet actions, int task_count) {
  int n = actions.size();
  std::vector<int> initial(static_cast<std::size_t>(n), 0);
  std::vector<int> step(static_cast<std::size_t>(n) * n, ConstraintState::kDead);
  for (int k = 0; k < n; ++k)
    for (int kp = k; kp < n; ++kp) step[static_cast<std::size_t>(k) * n + kp] = 0;
  return ConstraintAutomaton::from_tables(
      std::move(actions), n, 1, task_count, std::move(initial), std::move(step),
      {1}, ConstraintFamily::Escalation, "escalation");
}

// At most `max_shifts` changes of action along the task axis. The hidden
// state counts shifts seen so far.
inline ConstraintAutomaton make_constancy(ActionSet actions, int max_shifts,
                                          int task_count) {
  if (max_shifts < 0 || max_shifts > task_count - 1)
    throw ParameterError("constancy: max_shifts must be in [0, task_count-1]");
  int n = actions.size();
  int ns = max_shifts + 1;
  std::vector<int> initial(static_cast<std::size_t>(n), 0);
  std::vector<int> step(static_cast<std::size_t>(n) * ns * n, ConstraintState::kDead);
  for (int k = 0; k < n; ++k)
    for (int s = 0; s < ns; ++s)
      for (int kp = 0; kp < n; ++kp) {
        int sp = (k == kp) ? s : s + 1;
        step[(static_cast<std::size_t>(k) * ns + s) * n + kp] =
            sp < ns ? sp : ConstraintState::kDead;
      }
  return ConstraintAutomaton::from_tables(
      std::move(actions), n, ns, task_count, std::move(initial), std::move(step),
      std::vector<char>(static_cast<std::size_t>(ns), 1),
      ConstraintFamily::Constancy, "constancy:m=" + std::to_string(max_shifts));
}

namespace detail {

// Exact binary-rational scaling for budget sums. Every finite double is an
// odd integer times a power of two; putting all values on the common grid
// 2^emin makes partial sums exact integer arithmetic.
struct ScaledValues {
  std::vector<std::int64_t> values;
  std::int64_t budget;
};

inline std::pair<std::int64_t, int> odd_mantissa(double v) {
  int e = 0;
  double f = std::frexp(v, &e);  // v = f * 2^e, f in [0.5, 1)
  auto m = static_cast<std::int64_t>(std::ldexp(f, 53));  // exact 53-bit integer
  int p = e - 53;
  while ((m & 1) == 0) {
    m >>= 1;
    ++p;
  }
  return {m, p};
}

inline ScaledValues scale_budget(const ActionSet& actions, double budget) {
  std::vector<std::pair<std::int64_t, int>> parts;
  for (double v : actions.values()) parts.push_back(odd_mantissa(v));
  auto bpart = odd_mantissa(budget);
  int emin = bpart.second;
  for (const auto& [m, p] : parts) emin = std::min(emin, p);
  auto on_grid = [&](std::pair<std::int64_t, int> mp) {
    auto [m, p] = mp;
    int shift = p - emin;
    if (shift > 62 || m > (std::numeric_limits<std::int64_t>::max() >> 1 >> shift))
      throw ParameterError(
          "budget: action values span too many binary magnitudes for exact "
          "quantization");
    return m << shift;
  };
  ScaledValues out;
  for (const auto& mp : parts) out.values.push_back(on_grid(mp));
  out.budget = on_grid(bpart);
  return out;
}

}  // namespace detail

// Sum of chosen action values at most `budget`. Hidden states are the
// partial sums reachable by some prefix of length <= task_count, tracked
// exactly by binary-rational scaling of the action values.
inline ConstraintAutomaton make_budget(ActionSet actions, double budget,
                                       int task_count,
                                       std::size_t max_states = 200000) {
  int n = actions.size();
  for (double v : actions.values())
    if (!(v > 0)) throw ParameterError("budget: action values must be positive");
  if (!(budget >= task_count * actions.value(0)))
    throw ParameterError(
        "budget: B below the minimum feasible sum; legal set would be empty");

  auto scaled = detail::scale_budget(actions, budget);
  // BFS over prefix lengths; states are distinct reachable sums <= budget.
  std::map<std::int64_t, int> index;
  std::vector<std::int64_t> sums;
  auto intern = [&](std::int64_t v) {
    auto [it, fresh] = index.emplace(v, static_cast<int>(sums.size()));
    if (fresh) {
      sums.push_back(v);
      if (sums.size() > max_states)
        throw ParameterError("budget: reachable-sum state space exceeds cap");
    }
    return it->second;
  };
  std::vector<std::int64_t> frontier;
  for (int k = 0; k < n; ++k)
    if (scaled.values[static_cast<std::size_t>(k)] <= scaled.budget)
      frontier.push_back(scaled.values[static_cast<std::size_t>(k)]);
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
  for (std::int64_t v : frontier) intern(v);
  for (int len = 2; len <= task_count && !frontier.empty(); ++len) {
    std::vector<std::int64_t> next;
    for (std::int64_t s : frontier)
      for (int k = 0; k < n; ++k) {
        std::int64_t t = s + scaled.values[static_cast<std::size_t>(k)];
        if (t <= scaled.budget && !index.count(t)) next.push_back(t);
      }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    for (std::int64_t v : next) intern(v);
    frontier = std::move(next);
  }

  int ns = static_cast<int>(sums.size());
  std::vector<int> initial(static_cast<std::size_t>(n), ConstraintState::kDead);
  for (int k = 0; k < n; ++k) {
    std::int64_t v = scaled.values[static_cast<std::size_t>(k)];
    if (v <= scaled.budget) initial[static_cast<std::size_t>(k)] = index.at(v);
  }
  std::vector<int> step(static_cast<std::size_t>(n) * ns * n, ConstraintState::kDead);
  for (int k = 0; k < n; ++k)
    for (int s = 0; s < ns; ++s)
      for (int kp = 0; kp < n; ++kp) {
        std::int64_t t = sums[static_cast<std::size_t>(s)] +
                         scaled.values[static_cast<std::size_t>(kp)];
        // Sums only reachable past the horizon stay out of the state set;
        // no fold of length <= task_count can observe those transitions.
        auto it = index.find(t);
        if (t <= scaled.budget && it != index.end())
          step[(static_cast<std::size_t>(k) * ns + s) * n + kp] = it->second;
      }
  return ConstraintAutomaton::from_tables(
      std::move(actions), n, ns, task_count, std::move(initial), std::move(step),
      std::vector<char>(static_cast<std::size_t>(ns), 1),
      ConstraintFamily::Budget, "budget:B=" + std::to_string(budget));
}

// Play in exactly `plays` of the task_count tasks; a trailing no-play
// symbol with zero loss fills the rest. States count plays so far; only
// the full count is accepting, so legality is decided at the sink.
inline ConstraintAutomaton make_task_subset(ActionSet actions, int plays,
                                            int task_count) {
  if (plays < 1 || plays > task_count)
    throw ParameterError("subset: plays must be in [1, task_count]");
  int n = actions.size();
  int symbols = n + 1;  // trailing index n is the no-play symbol
  int ns = plays + 1;   // states 0..plays count played tasks
  std::vector<int> initial(static_cast<std::size_t>(symbols));
  for (int k = 0; k < symbols; ++k)
    initial[static_cast<std::size_t>(k)] = (k < n) ? 1 : 0;
  std::vector<int> step(static_cast<std::size_t>(symbols) * ns * symbols,
                        ConstraintState::kDead);
  for (int k = 0; k < symbols; ++k)
    for (int s = 0; s < ns; ++s)
      for (int kp = 0; kp < symbols; ++kp) {
        int sp = s + (kp < n ? 1 : 0);
        if (sp < ns)
          step[(static_cast<std::size_t>(k) * ns + s) * symbols + kp] = sp;
      }
  std::vector<char> accept(static_cast<std::size_t>(ns), 0);
  accept[static_cast<std::size_t>(plays)] = 1;
  return ConstraintAutomaton::from_tables(
      std::move(actions), symbols, ns, task_count, std::move(initial),
      std::move(step), std::move(accept), ConstraintFamily::TaskSubset,
      "subset:m=" + std::to_string(plays));
}

// Parses the CLI text form: coherence:gamma=<real> | escalation |
// constancy:m=<int> | budget:B=<real> | subset:m=<int>.
inline ConstraintAutomaton parse_constraint(const std::string& descriptor,
                                            ActionSet actions, int task_count) {
  auto colon = descriptor.find(':');
  std::string family = descriptor.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : descriptor.substr(colon + 1);
  auto need_param = [&](const std::string& key) -> std::string {
    std::string prefix = key + "=";
    if (args.rfind(prefix, 0) != 0)
      throw InputError("constraint '" + descriptor + "': expected " + family +
                       ":" + key + "=<value>");
    return args.substr(prefix.size());
  };
  auto to_real = [&](const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw InputError("constraint '" + descriptor + "': bad numeric value");
    }
    if (pos != s.size())
      throw InputError("constraint '" + descriptor + "': bad numeric value");
    return v;
  };
  auto to_int = [&](const std::string& s) {
    double v = to_real(s);
    if (v != std::floor(v))
      throw InputError("constraint '" + descriptor + "': expected an integer");
    return static_cast<int>(v);
  };

  if (family == "coherence")
    return make_coherence(std::move(actions), to_real(need_param("gamma")), task_count);
  if (family == "escalation") {
    if (!args.empty())
      throw InputError("constraint 'escalation' takes no parameters");
    return make_escalation(std::move(actions), task_count);
  }
  if (family == "constancy")
    return make_constancy(std::move(actions), to_int(need_param("m")), task_count);
  if (family == "budget")
    return make_budget(std::move(actions), to_real(need_param("B")), task_count);
  if (family == "subset")
    return make_task_subset(std::move(actions), to_int(need_param("m")), task_count);
  throw InputError("unknown constraint family '" + family + "'");
}

}  // namespace cewa
