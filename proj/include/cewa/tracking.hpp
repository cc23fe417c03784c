#pragma once

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

// Exact posterior over (current-segment start tau, switches used kappa)
// under exponential weights on the class of at-most-K-switch sequences of
// legal vectors, each sequence weighted once.
struct SwitchPosterior {
  int round = 1;         // prediction round t
  int max_switches = 0;  // K
  std::vector<double> mass;  // (tau-1) * (K+1) + kappa, tau in 1..t

  double at(int tau, int kappa) const {
    return mass[static_cast<std::size_t>(tau - 1) * (max_switches + 1) + kappa];
  }
};

// Forecaster competing with the best sequence of legal vectors that changes
// value at most K times over an n-round horizon.
//
// The predictive distribution of X_t decomposes exactly over the start a of
// the current segment: each sequence class contributes its segment weight
// omega_x([a,t)) times a signed scalar coefficient C_a built from interval
// normalizers and switch-count combinatorics. The signs come from resolving
// the adjacent-segments-differ constraint by inclusion-exclusion; completion
// counts over the remaining rounds weight the switch budget already used.
// Sampling and mass queries marginalize the signed mixture, which is a
// genuine probability distribution even though individual C_a may be
// negative. Costs t forward passes per round.
class TrackingForecaster {
 public:
  TrackingForecaster(const ConstraintAutomaton& a, int max_switches,
                     std::int64_t horizon, double eta)
      : a_(&a), k_(max_switches), n_(horizon), eta_(eta) {
    if (max_switches < 0)
      throw ParameterError("tracking: max_switches must be >= 0");
    if (horizon < 1) throw ParameterError("tracking: horizon must be >= 1");
    if (!(eta > 0)) throw ParameterError("tracking: eta must be > 0");
    auto cnt = count_legal(a);
    if (cnt.log_count == kNegInf)
      throw ParameterError("tracking: legal set is empty");
    log_a_ = cnt.log_count;
    // log(|A| - 1); -inf when |A| = 1 (then no switch ever changes value).
    log_a_minus1_ = cnt.exact && cnt.count == 1
                        ? kNegInf
                        : log_a_ + std::log1p(-std::exp(-log_a_));
    cum_.emplace_back(
        static_cast<std::size_t>(a.task_count()) * a.play_actions(), 0.0);
    rsum_.assign(static_cast<std::size_t>(k_) + 1, {});
  }

  int observed_rounds() const { return static_cast<int>(cum_.size()) - 1; }
  int current_round() const { return observed_rounds() + 1; }
  double eta() const { return eta_; }
  std::uint64_t forward_passes() const { return forward_passes_; }

  // log Z(tau, t) for tau = 1..t: the normalizer of the segment covering
  // rounds tau..t-1. Z(t, t) is the empty segment, i.e. |A| in weight terms.
  std::vector<double> segment_log_normalizers() {
    advance();
    return {znow_.begin() + 1, znow_.end()};
  }

  // Records the losses of the round just played (tasks x actions in [0,1]).
  void observe(std::span<const double> round_losses) {
    std::size_t sz =
        static_cast<std::size_t>(a_->task_count()) * a_->play_actions();
    if (round_losses.size() != sz)
      throw InputError("tracking observe: loss matrix has wrong shape");
    for (double v : round_losses)
      if (!(v >= 0.0 && v <= 1.0))
        throw InputError("tracking observe: loss entries must lie in [0, 1]");
    std::vector<double> next = cum_.back();
    for (std::size_t i = 0; i < sz; ++i) next[i] += round_losses[i];
    cum_.push_back(std::move(next));
  }
  void observe(const std::vector<double>& rl) {
    observe(std::span<const double>(rl));
  }

  // Draws X_t from the posterior predictive.
  PlaySample sample(Rng& rng) {
    advance();
    const auto& a = *a_;
    const int m = a.task_count();
    const int t = round_done_;
    PlaySample out;
    out.indices.assign(static_cast<std::size_t>(m), -1);
    out.states.assign(static_cast<std::size_t>(m), ConstraintState::kDead);
    out.values.assign(static_cast<std::size_t>(m), 0.0);

    // Per-component log suffix factor accumulated as actions are fixed.
    std::vector<double> suffix(static_cast<std::size_t>(t), 0.0);
    std::vector<std::pair<int, int>> cand;
    std::vector<double> logmass;

    auto cell_mass = [&](int task, int k, int s) {
      SignedExpSum sum;
      for (int comp = 0; comp < t; ++comp) {
        double lw = lat_[static_cast<std::size_t>(comp)].log_weight(task, k, s);
        if (lw == kNegInf) continue;
        const SignedLog& c = coeff_[static_cast<std::size_t>(comp)];
        if (c.sign == 0) continue;
        sum.add(c.sign, c.lmag + lw + suffix[static_cast<std::size_t>(comp)]);
      }
      return sum.empty() ? kNegInf : sum.log_value_clamped(1e-7);
    };
    auto draw = [&]() -> std::pair<int, int> {
      double mx = kNegInf;
      for (double lm : logmass) mx = std::max(mx, lm);
      if (mx == kNegInf)
        throw InternalError("tracking sample: conditional mass vanished");
      std::vector<double> w(logmass.size());
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = std::exp(logmass[i] - mx);
      return cand[rng.categorical(w)];
    };
    auto push_suffix = [&](int task, int k) {
      for (int comp = 0; comp < t; ++comp)
        suffix[static_cast<std::size_t>(comp)] -=
            eta_ * segment_loss(comp + 1, task, k);
    };

    cand.clear();
    logmass.clear();
    for (int k = 0; k < a.symbols(); ++k)
      for (int s = 0; s < a.num_states(); ++s)
        if (a.accepting(s)) {
          double lm = cell_mass(m - 1, k, s);
          if (lm != kNegInf) {
            cand.emplace_back(k, s);
            logmass.push_back(lm);
          }
        }
    auto [k0, s0] = draw();
    out.indices[static_cast<std::size_t>(m - 1)] = k0;
    out.states[static_cast<std::size_t>(m - 1)] = s0;
    push_suffix(m - 1, k0);

    for (int j = m - 2; j >= 0; --j) {
      cand.clear();
      logmass.clear();
      for (const auto& [pk, ps] :
           a.predecessors(out.indices[static_cast<std::size_t>(j + 1)],
                          out.states[static_cast<std::size_t>(j + 1)])) {
        double lm = cell_mass(j, pk, ps);
        if (lm != kNegInf) {
          cand.emplace_back(pk, ps);
          logmass.push_back(lm);
        }
      }
      auto [jk, js] = draw();
      out.indices[static_cast<std::size_t>(j)] = jk;
      out.states[static_cast<std::size_t>(j)] = js;
      push_suffix(j, jk);
    }
    for (int j = 0; j < m; ++j)
      out.values[static_cast<std::size_t>(j)] =
          a.symbol_value(out.indices[static_cast<std::size_t>(j)]);
    return out;
  }

  // P(X_t = seq) under the posterior predictive; zero for illegal seq.
  double predictive_mass(std::span<const int> seq) {
    advance();
    if (!a_->is_legal(seq)) return 0.0;
    const int t = round_done_;
    SignedExpSum num;
    for (int comp = 0; comp < t; ++comp) {
      const SignedLog& c = coeff_[static_cast<std::size_t>(comp)];
      if (c.sign == 0) continue;
      double loss = 0.0;
      for (int j = 0; j < a_->task_count(); ++j)
        loss += segment_loss(comp + 1, j, seq[static_cast<std::size_t>(j)]);
      num.add(c.sign, c.lmag - eta_ * loss);
    }
    double ln = num.empty() ? kNegInf : num.log_value_clamped(1e-7);
    if (ln == kNegInf) return 0.0;
    return std::exp(ln - log_denominator());
  }
  double predictive_mass(const std::vector<int>& seq) {
    return predictive_mass(std::span<const int>(seq));
  }

  // Exact nonnegative posterior over (segment start, switches used).
  SwitchPosterior switch_posterior() {
    advance();
    const int t = round_done_;
    SwitchPosterior out;
    out.round = t;
    out.max_switches = k_;
    out.mass.assign(static_cast<std::size_t>(t) * (k_ + 1), 0.0);
    std::vector<SignedLog> cells(out.mass.size());
    // kappa = 0 lives entirely at tau = 1: constant prefixes.
    cells[0] = SignedLog::from_log(log_f(n_ - t, k_) + znow_[1]);
    for (int kappa = 1; kappa <= k_; ++kappa) {
      SignedLog ffac = SignedLog::from_log(log_f(n_ - t, k_ - kappa));
      for (int tau = 2; tau <= t; ++tau) {
        // Weight of prefixes whose last true switch is at tau:
        //   S_{tau-1}(kappa-1) Z(tau, t) - sum_b E_{kappa-1}(b, tau-1) Z(b, t).
        SignedLog v = s_[static_cast<std::size_t>(tau - 1)]
                        [static_cast<std::size_t>(kappa - 1)] *
                      SignedLog::from_log(znow_[static_cast<std::size_t>(tau)]);
        for (int b = 1; b <= tau - 1; ++b)
          v += -(e_hist_[static_cast<std::size_t>(tau - 1)]
                        [static_cast<std::size_t>(kappa - 1) * (tau - 1) + b - 1] *
                 SignedLog::from_log(znow_[static_cast<std::size_t>(b)]));
        cells[static_cast<std::size_t>(tau - 1) * (k_ + 1) + kappa] = ffac * v;
      }
    }
    SignedExpSum total;
    for (const auto& c : cells) total.add(c);
    double lz = total.log_value_clamped(1e-7);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].sign == 0) continue;
      double v = cells[i].sign * std::exp(cells[i].lmag - lz);
      out.mass[i] = v < 0.0 ? 0.0 : v;  // cancellation noise only
    }
    return out;
  }

 private:
  // Cumulative loss of symbol k in task j over rounds [a, t-1].
  double segment_loss(int a, int task, int k) const {
    if (!a_->is_play_symbol(k)) return 0.0;
    std::size_t idx = static_cast<std::size_t>(task) * a_->play_actions() + k;
    return cum_[static_cast<std::size_t>(round_done_ - 1)][idx] -
           cum_[static_cast<std::size_t>(a - 1)][idx];
  }

  // Number of length-r completions using at most q further switches, as a
  // log: sum_i C(r, i) (|A|-1)^i.
  double log_f(std::int64_t r, int q) const {
    std::vector<double> terms{0.0};  // i = 0
    if (log_a_minus1_ != kNegInf)
      for (int i = 1; i <= q && i <= r; ++i)
        terms.push_back(log_choose(r, i) + i * log_a_minus1_);
    return log_sum_exp(terms);
  }

  double log_denominator() {
    SignedExpSum den;
    for (int comp = 0; comp < round_done_; ++comp) {
      const SignedLog& c = coeff_[static_cast<std::size_t>(comp)];
      if (c.sign == 0) continue;
      den.add(c.sign, c.lmag + znow_[static_cast<std::size_t>(comp + 1)]);
    }
    return den.log_value_clamped(1e-7);
  }

  // Advances the coefficient recursion to the current prediction round,
  // one round at a time so skipped rounds are still finalized in order.
  void advance() {
    int target = current_round();
    if (target > n_)
      throw InputError("tracking: prediction round exceeds the horizon");
    while (round_done_ < target) {
      int r = round_done_ + 1;
      // Interval normalizers Z(a, r) for a = 1..r; the lattices double as
      // the mixture components when r is the prediction round.
      lat_.clear();
      znow_.assign(static_cast<std::size_t>(r) + 1, kNegInf);
      for (int a = 1; a <= r; ++a) {
        std::vector<double> seg(
            static_cast<std::size_t>(a_->task_count()) * a_->play_actions());
        for (std::size_t i = 0; i < seg.size(); ++i)
          seg[i] = cum_[static_cast<std::size_t>(r - 1)][i] -
                   cum_[static_cast<std::size_t>(a - 1)][i];
        LossTable table = LossTable::from_cumulative(
            a_->task_count(), a_->play_actions(), std::move(seg), r - a);
        lat_.emplace_back(*a_, table, eta_);
        ++forward_passes_;
        znow_[static_cast<std::size_t>(a)] = lat_.back().log_normalizer();
      }
      // Finalize round r-1: S_{r-1}(kappa) and the running sums.
      if (r >= 2) {
        const auto& eprev = e_hist_[static_cast<std::size_t>(r - 1)];
        std::vector<SignedLog> srow(static_cast<std::size_t>(k_) + 1);
        for (int kappa = 0; kappa <= k_; ++kappa) {
          SignedLog acc;
          for (int b = 1; b <= r - 1; ++b)
            acc += eprev[static_cast<std::size_t>(kappa) * (r - 1) + b - 1] *
                   SignedLog::from_log(znow_[static_cast<std::size_t>(b)]);
          srow[static_cast<std::size_t>(kappa)] = acc;
          auto& rs = rsum_[static_cast<std::size_t>(kappa)];
          rs.resize(static_cast<std::size_t>(r), SignedLog::zero());
          for (int b = 1; b <= r - 1; ++b)
            rs[static_cast<std::size_t>(b - 1)] +=
                eprev[static_cast<std::size_t>(kappa) * (r - 1) + b - 1];
        }
        s_.resize(static_cast<std::size_t>(r));
        s_[static_cast<std::size_t>(r - 1)] = std::move(srow);
      }
      // E_kappa(a, r): expansion coefficients of the exactly-kappa-switch
      // prefix weights over segment factors omega_x([a, r)).
      std::vector<SignedLog> e(static_cast<std::size_t>(k_ + 1) * r);
      e[0] = SignedLog::one();  // kappa = 0, a = 1
      for (int kappa = 1; kappa <= k_; ++kappa) {
        const auto& rs = rsum_[static_cast<std::size_t>(kappa - 1)];
        for (int a = 1; a <= r; ++a) {
          SignedLog v;
          if (a >= 2)
            v = s_[static_cast<std::size_t>(a - 1)]
                  [static_cast<std::size_t>(kappa - 1)];
          if (static_cast<std::size_t>(a - 1) < rs.size())
            v += -rs[static_cast<std::size_t>(a - 1)];
          e[static_cast<std::size_t>(kappa) * r + a - 1] = v;
        }
      }
      // Mixture coefficients with completion-count weighting.
      coeff_.assign(static_cast<std::size_t>(r), SignedLog::zero());
      for (int kappa = 0; kappa <= k_; ++kappa) {
        SignedLog ffac = SignedLog::from_log(log_f(n_ - r, k_ - kappa));
        for (int a = 1; a <= r; ++a)
          coeff_[static_cast<std::size_t>(a - 1)] +=
              ffac * e[static_cast<std::size_t>(kappa) * r + a - 1];
      }
      e_hist_.resize(static_cast<std::size_t>(r) + 1);
      e_hist_[static_cast<std::size_t>(r)] = std::move(e);
      round_done_ = r;
    }
  }

  const ConstraintAutomaton* a_;
  int k_;
  std::int64_t n_;
  double eta_;
  double log_a_ = 0.0;
  double log_a_minus1_ = kNegInf;
  std::vector<std::vector<double>> cum_;  // cum_[t] after t rounds

  int round_done_ = 0;
  std::uint64_t forward_passes_ = 0;
  std::vector<WeightLattice> lat_;     // component a-1: segment [a, t)
  std::vector<double> znow_;           // log Z(a, t)
  std::vector<SignedLog> coeff_;       // C_a for the current round
  std::vector<std::vector<SignedLog>> e_hist_;  // per round: (K+1) x r
  std::vector<std::vector<SignedLog>> s_;       // S_s(kappa), s = 1..t-1
  std::vector<std::vector<SignedLog>> rsum_;    // per kappa: running sums over s
};

// Loss of the best at-most-K-switch sequence of legal vectors, by dynamic
// programming over (rounds covered, switches used) with interval-optimal
// segment losses from the min-plus lattice. Exact.
inline double tracking_comparator_loss(
    const ConstraintAutomaton& a,
    const std::vector<std::vector<double>>& round_losses, int max_switches) {
  const int n = static_cast<int>(round_losses.size());
  if (n == 0) return 0.0;
  const std::size_t sz =
      static_cast<std::size_t>(a.task_count()) * a.play_actions();
  std::vector<std::vector<double>> cum(static_cast<std::size_t>(n) + 1,
                                       std::vector<double>(sz, 0.0));
  for (int t = 1; t <= n; ++t) {
    if (round_losses[static_cast<std::size_t>(t - 1)].size() != sz)
      throw InputError("tracking comparator: loss matrix has wrong shape");
    for (std::size_t i = 0; i < sz; ++i)
      cum[static_cast<std::size_t>(t)][i] =
          cum[static_cast<std::size_t>(t - 1)][i] +
          round_losses[static_cast<std::size_t>(t - 1)][i];
  }
  // segmin[a][b]: best fixed legal vector over rounds a+1..b+1 (0-based).
  std::vector<std::vector<double>> segmin(static_cast<std::size_t>(n));
  for (int lo = 0; lo < n; ++lo) {
    segmin[static_cast<std::size_t>(lo)].assign(static_cast<std::size_t>(n),
                                                0.0);
    for (int hi = lo; hi < n; ++hi) {
      std::vector<double> seg(sz);
      for (std::size_t i = 0; i < sz; ++i)
        seg[i] = cum[static_cast<std::size_t>(hi + 1)][i] -
                 cum[static_cast<std::size_t>(lo)][i];
      LossTable table = LossTable::from_cumulative(
          a.task_count(), a.play_actions(), std::move(seg), hi - lo + 1);
      segmin[static_cast<std::size_t>(lo)][static_cast<std::size_t>(hi)] =
          min_legal_loss(a, table);
    }
  }
  const int kk = std::min(max_switches, n - 1);
  // best[b]: minimum over covering rounds 0..b with the current switch budget.
  std::vector<double> best(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) best[static_cast<std::size_t>(b)] = segmin[0][static_cast<std::size_t>(b)];
  for (int kappa = 1; kappa <= kk; ++kappa) {
    std::vector<double> next(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
      double v = segmin[0][static_cast<std::size_t>(b)];
      for (int mid = 1; mid <= b; ++mid)
        v = std::min(v, best[static_cast<std::size_t>(mid - 1)] +
                            segmin[static_cast<std::size_t>(mid)]
                                  [static_cast<std::size_t>(b)]);
      next[static_cast<std::size_t>(b)] = v;
    }
    best = std::move(next);
  }
  return best[static_cast<std::size_t>(n - 1)];
}

struct TrackingRegret {
  double forecaster_loss = 0.0;
  double comparator_loss = 0.0;
  double regret() const { return forecaster_loss - comparator_loss; }
};

inline TrackingRegret tracking_regret(
    const std::vector<double>& forecaster_round_losses,
    const ConstraintAutomaton& a,
    const std::vector<std::vector<double>>& round_losses, int max_switches) {
  TrackingRegret out;
  for (double v : forecaster_round_losses) out.forecaster_loss += v;
  out.comparator_loss = tracking_comparator_loss(a, round_losses, max_switches);
  return out;
}

// (1/M) sqrt(8 ln|Sigma_K(A)| / n): the exponential-weights tuning applied
// to the meta-expert class.
inline double tracking_eta_default(std::int64_t horizon,
                                   const ConstraintAutomaton& a,
                                   int max_switches) {
  if (horizon < 1) throw ParameterError("tracking eta: horizon must be >= 1");
  auto cnt = count_legal(a);
  if (cnt.log_count == kNegInf)
    throw ParameterError("tracking eta: legal set is empty");
  double log_am1 = cnt.exact && cnt.count == 1
                       ? kNegInf
                       : cnt.log_count + std::log1p(-std::exp(-cnt.log_count));
  std::vector<double> terms{0.0};
  if (log_am1 != kNegInf)
    for (int i = 1; i <= max_switches && i <= horizon - 1; ++i)
      terms.push_back(log_choose(horizon - 1, i) + i * log_am1);
  double log_class = cnt.log_count + log_sum_exp(terms);
  log_class = std::max(log_class, 1e-12);
  return std::sqrt(8.0 * log_class / double(horizon)) / double(a.task_count());
}

}  // namespace cewa
