#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cewa/config.hpp"
#include "cewa/continuum.hpp"
#include "cewa/global_loss.hpp"
#include "cewa/harness.hpp"
#include "cewa/oracle.hpp"
#include "cewa/tracking.hpp"

namespace cewa {

// 0.99 quantile of chi-squared; exact for small df, Wilson-Hilferty beyond.
inline double chi2_crit99(int df) {
  static const double table[] = {6.6349, 9.2103, 11.3449, 13.2767, 15.0863,
                                 16.8119, 18.4753, 20.0902, 21.6660, 23.2093};
  if (df >= 1 && df <= 10) return table[df - 1];
  double z = 2.3263478740408408;
  double a = 2.0 / (9.0 * df);
  double c = 1.0 - a + z * std::sqrt(a);
  return df * c * c * c;
}

namespace detail {

struct CheckReporter {
  std::ostream& out;
  int failures = 0;
  int refused = 0;

  void run(const std::string& name, const std::string& tolerance,
           const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, detail] = body();
      out << (ok ? "PASS    " : "FAIL    ") << name << " (" << tolerance
          << ")" << (detail.empty() ? "" : " — " + detail) << "\n";
      if (!ok) ++failures;
    } catch (const CapError& e) {
      out << "REFUSED " << name << " — " << e.what() << "\n";
      ++refused;
    }
  }
};

}  // namespace detail

// Oracle-vs-lattice equivalence suite over the configured instance, plus
// fixed micro-instances for the forecaster families. Prints one line per
// check with its tolerance; returns the number of failures.
inline int verify(const Config& cfg, std::ostream& out) {
  validate_config(cfg);
  detail::CheckReporter rep{out};
  Rng rng(split_seed(cfg.seed, 0xC0DE));

  // The configured instance (continuum configs check a small surrogate).
  Config base = cfg;
  if (base.mode == "continuum") {
    base.mode = "standard";
    base.env_kind = "iid";
    base.constraint = "constancy:m=" +
                      std::to_string(std::min(base.continuum_shifts,
                                              std::max(0, base.tasks - 1)));
  }
  ConstraintAutomaton a = build_automaton(base);
  auto random_table = [&](int rounds) {
    LossTable t(a.task_count(), a.play_actions());
    std::vector<double> row(
        static_cast<std::size_t>(a.task_count()) * a.play_actions());
    for (int r = 0; r < rounds; ++r) {
      for (auto& v : row) v = rng.uniform();
      t.accumulate(row);
    }
    return t;
  };

  rep.run("enumeration-completeness", "exact", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    std::vector<int> seq(static_cast<std::size_t>(a.task_count()), 0);
    std::size_t scanned = 0;
    for (;;) {
      if (a.is_legal(seq)) ++scanned;
      int j = a.task_count() - 1;
      while (j >= 0 && ++seq[static_cast<std::size_t>(j)] == a.symbols()) {
        seq[static_cast<std::size_t>(j)] = 0;
        --j;
      }
      if (j < 0) break;
    }
    return std::make_pair(scanned == set.cardinality(),
                          "|A| = " + std::to_string(set.cardinality()));
  });

  rep.run("count-legal", "exact", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    auto cnt = count_legal(a);
    return std::make_pair(cnt.exact && cnt.count == set.cardinality(),
                          "count = " + std::to_string(cnt.count));
  });

  rep.run("log-normalizer", "rel 1e-10", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    auto t = random_table(4);
    double eta = 0.8;
    double z = kNegInf;
    for (const auto& x : set.sequences) {
      double loss = 0;
      for (int j = 0; j < a.task_count(); ++j)
        loss += detail::symbol_loss(a, t, j, x[static_cast<std::size_t>(j)]);
      z = log_add_exp(z, -eta * loss);
    }
    double got = forward_pass(a, t, eta).log_normalizer();
    double err = std::abs(got - z) / std::max(std::abs(z), 1e-300);
    return std::make_pair(err < 1e-10, "rel err = " + fmt17(err));
  });

  rep.run("prob-of-vs-oracle", "rel 1e-9", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    auto t = random_table(3);
    double eta = 1.1;
    auto mass = oracle::oracle_distribution(set, a, t, eta);
    auto lat = forward_pass(a, t, eta);
    double worst = 0;
    for (std::size_t i = 0; i < set.cardinality(); ++i) {
      double p = lat.prob_of(set.sequences[i]);
      worst = std::max(worst, std::abs(p - mass[i]) / std::max(mass[i], 1e-300));
    }
    return std::make_pair(worst < 1e-9, "max rel err = " + fmt17(worst));
  });

  rep.run("best-fixed", "exact", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    auto t = random_table(3);
    auto bf = best_fixed(a, t);
    auto [oseq, oloss] = oracle::oracle_best_fixed(set, a, t);
    return std::make_pair(bf.sequence == oseq && bf.loss == oloss,
                          "loss = " + fmt17(bf.loss));
  });

  rep.run("sampler-chi2", "alpha 0.01", [&] {
    auto set = oracle::enumerate_legal(a, 1e5);
    if (set.cardinality() > 512)
      throw CapError("legal set too large for the chi-squared check");
    auto t = random_table(2);
    double eta = 0.9;
    auto mass = oracle::oracle_distribution(set, a, t, eta);
    auto lat = forward_pass(a, t, eta);
    std::map<std::vector<int>, int> freq;
    Rng srng(split_seed(cfg.seed, 0x5A11));
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) ++freq[lat.sample(srng).indices];
    double chi2 = 0;
    for (std::size_t i = 0; i < set.cardinality(); ++i) {
      double expect = mass[i] * draws;
      double obs = freq.count(set.sequences[i]) ? freq[set.sequences[i]] : 0;
      if (expect > 0) chi2 += (obs - expect) * (obs - expect) / expect;
    }
    double crit = chi2_crit99(static_cast<int>(set.cardinality()) - 1);
    return std::make_pair(chi2 < crit,
                          "chi2 = " + fmt17(chi2) + ", crit = " + fmt17(crit));
  });

  rep.run("markov-pair-consistency", "property", [&] {
    for (int trial = 0; trial < 500; ++trial) {
      int len = 1 + static_cast<int>(rng.below(
                        static_cast<std::uint64_t>(std::max(1, a.task_count() - 1))));
      auto draw = [&](int l) {
        std::vector<int> p(static_cast<std::size_t>(l));
        for (auto& k : p)
          k = static_cast<int>(rng.below(static_cast<std::uint64_t>(a.symbols())));
        return p;
      };
      auto p = draw(len), q = draw(len);
      auto sp = a.state_of(p), sq = a.state_of(q);
      if (sp.is_dead() || !(sp == sq) || p.back() != q.back()) continue;
      auto w = draw(a.task_count() - len);
      auto pw = p, qw = q;
      pw.insert(pw.end(), w.begin(), w.end());
      qw.insert(qw.end(), w.begin(), w.end());
      if (!(a.state_of(pw) == a.state_of(qw)))
        return std::make_pair(false, std::string("pair-state mismatch"));
    }
    return std::make_pair(true, std::string());
  });

  rep.run("absorption", "property", [&] {
    for (int trial = 0; trial < 500; ++trial) {
      int len = 1 + static_cast<int>(
                        rng.below(static_cast<std::uint64_t>(a.task_count())));
      std::vector<int> seq(static_cast<std::size_t>(len));
      for (auto& k : seq)
        k = static_cast<int>(rng.below(static_cast<std::uint64_t>(a.symbols())));
      if (!a.state_of(seq).is_dead()) continue;
      while (static_cast<int>(seq.size()) < a.task_count())
        seq.push_back(
            static_cast<int>(rng.below(static_cast<std::uint64_t>(a.symbols()))));
      if (!a.state_of(seq).is_dead())
        return std::make_pair(false, std::string("dead prefix revived"));
    }
    return std::make_pair(true, std::string());
  });

  // Negative control: a deliberately corrupted fold that revives dead
  // prefixes must be caught by the same absorption scan.
  rep.run("corruption-detected", "negative control", [&] {
    auto fixed = make_coherence(ActionSet::iota(3), 1.0, 3);
    auto corrupted_fold = [&](const std::vector<int>& seq) {
      int s = fixed.initial(seq[0]);
      for (std::size_t j = 1; j < seq.size(); ++j) {
        if (s == ConstraintState::kDead)
          s = fixed.initial(seq[static_cast<std::size_t>(j)]);  // wrong: revive
        else
          s = fixed.step(seq[j - 1], s, seq[j]);
      }
      return s;
    };
    bool caught = false;
    Rng crng(7);
    for (int trial = 0; trial < 500 && !caught; ++trial) {
      std::vector<int> seq(2);
      for (auto& k : seq) k = static_cast<int>(crng.below(3));
      if (corrupted_fold(seq) != ConstraintState::kDead) continue;
      std::vector<int> full = seq;
      full.push_back(static_cast<int>(crng.below(3)));
      // A dead prefix must stay dead; the corrupted fold violates this.
      std::vector<int> dead_then(full.begin(), full.end());
      if (corrupted_fold(dead_then) != ConstraintState::kDead) caught = true;
    }
    return std::make_pair(caught,
                          std::string(caught ? "non-absorbing fold flagged"
                                             : "corruption went unnoticed"));
  });

  rep.run("tracking-exactness", "TV 1e-9", [&] {
    auto cnt = count_legal(a);
    if (!cnt.exact || cnt.count > 8)
      throw CapError("legal set too large for switching-class enumeration");
    auto set = oracle::enumerate_legal(a);
    int n = 4, kk = 1;
    double eta = 0.8;
    auto switching = oracle::enumerate_switching(set, n, kk);
    TrackingForecaster fc(a, kk, n, eta);
    std::vector<std::vector<double>> history;
    double worst_tv = 0;
    for (int t = 1; t <= n; ++t) {
      std::vector<double> want(set.cardinality(), 0.0);
      double total = 0;
      for (const auto& sigma : switching) {
        double loss = 0;
        for (int s = 1; s < t; ++s) {
          const auto& x = set.sequences[static_cast<std::size_t>(
              sigma[static_cast<std::size_t>(s - 1)])];
          for (int j = 0; j < a.task_count(); ++j)
            if (a.is_play_symbol(x[static_cast<std::size_t>(j)]))
              loss += history[static_cast<std::size_t>(s - 1)]
                             [static_cast<std::size_t>(j) * a.play_actions() +
                              x[static_cast<std::size_t>(j)]];
        }
        double w = std::exp(-eta * loss);
        want[static_cast<std::size_t>(sigma[static_cast<std::size_t>(t - 1)])] += w;
        total += w;
      }
      double tv = 0;
      for (std::size_t i = 0; i < set.cardinality(); ++i)
        tv += std::abs(fc.predictive_mass(set.sequences[i]) - want[i] / total);
      worst_tv = std::max(worst_tv, tv / 2);
      std::vector<double> row(
          static_cast<std::size_t>(a.task_count()) * a.play_actions());
      for (auto& v : row) v = rng.uniform();
      fc.observe(row);
      history.push_back(std::move(row));
    }
    return std::make_pair(worst_tv < 1e-9, "max TV = " + fmt17(worst_tv));
  });

  rep.run("tracking-comparator", "exact", [&] {
    auto cnt = count_legal(a);
    if (!cnt.exact || cnt.count > 8)
      throw CapError("legal set too large for switching-class enumeration");
    auto set = oracle::enumerate_legal(a);
    int n = 4, kk = 1;
    auto switching = oracle::enumerate_switching(set, n, kk);
    std::vector<std::vector<double>> history;
    for (int t = 0; t < n; ++t) {
      std::vector<double> row(
          static_cast<std::size_t>(a.task_count()) * a.play_actions());
      for (auto& v : row) v = rng.uniform();
      history.push_back(std::move(row));
    }
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& sigma : switching) {
      double loss = 0;
      for (int s = 0; s < n; ++s) {
        const auto& x = set.sequences[static_cast<std::size_t>(
            sigma[static_cast<std::size_t>(s)])];
        for (int j = 0; j < a.task_count(); ++j)
          if (a.is_play_symbol(x[static_cast<std::size_t>(j)]))
            loss += history[static_cast<std::size_t>(s)]
                           [static_cast<std::size_t>(j) * a.play_actions() +
                            x[static_cast<std::size_t>(j)]];
      }
      brute = std::min(brute, loss);
    }
    double got = tracking_comparator_loss(a, history, kk);
    return std::make_pair(std::abs(got - brute) < 1e-12,
                          "comparator = " + fmt17(got));
  });

  for (Aggregator agg : {Aggregator::Max, Aggregator::Min}) {
    std::string name = std::string("global-") + aggregator_name(agg);
    rep.run(name, "rel 1e-9", [&, agg] {
      auto set = oracle::enumerate_legal(a, 1e5);
      if (a.symbols() > ActionSetTracker::kMaxSymbols)
        throw CapError("action set too large for the subset tracker");
      double eta = 0.7;
      GlobalForecaster fc(a, agg, eta);
      std::vector<std::vector<double>> hist;
      for (int r = 0; r < 3; ++r) {
        std::vector<double> c(static_cast<std::size_t>(a.play_actions()));
        for (auto& v : c) v = rng.uniform();
        hist.push_back(c);
        fc.observe_common(c);
      }
      double worst = 0;
      std::vector<double> lw(set.cardinality());
      for (std::size_t i = 0; i < set.cardinality(); ++i) {
        double total = 0;
        for (const auto& c : hist) {
          double acc = 0;
          bool first = true;
          for (int j = 0; j < a.task_count(); ++j) {
            int k = set.sequences[i][static_cast<std::size_t>(j)];
            double u = a.is_play_symbol(k) ? c[static_cast<std::size_t>(k)] : 0.0;
            acc = first ? u
                        : (agg == Aggregator::Max ? std::max(acc, u)
                                                  : std::min(acc, u));
            first = false;
          }
          total += acc;
        }
        lw[i] = -eta * total;
      }
      double z = log_sum_exp(lw);
      for (std::size_t i = 0; i < set.cardinality(); ++i) {
        double want = std::exp(lw[i] - z);
        double got = fc.prob_of(set.sequences[i]);
        worst = std::max(worst, std::abs(got - want) / std::max(want, 1e-300));
      }
      return std::make_pair(worst < 1e-9, "max rel err = " + fmt17(worst));
    });
  }

  rep.run("global-sum-degenerates", "abs 1e-12", [&] {
    double eta = 0.6;
    GlobalForecaster fc(a, Aggregator::Sum, eta);
    LossTable t(a.task_count(), a.play_actions());
    for (int r = 0; r < 3; ++r) {
      std::vector<double> c(static_cast<std::size_t>(a.play_actions()));
      for (auto& v : c) v = rng.uniform();
      fc.observe_common(c);
      std::vector<double> row(
          static_cast<std::size_t>(a.task_count()) * a.play_actions());
      for (int j = 0; j < a.task_count(); ++j)
        for (int k = 0; k < a.play_actions(); ++k)
          row[static_cast<std::size_t>(j) * a.play_actions() + k] =
              c[static_cast<std::size_t>(k)];
      t.accumulate(row);
    }
    auto lat = forward_pass(a, t, eta);
    auto set = oracle::enumerate_legal(a, 1e5);
    double worst = 0;
    for (const auto& x : set.sequences)
      worst = std::max(worst, std::abs(fc.prob_of(x) - lat.prob_of(x)));
    return std::make_pair(worst < 1e-12, "max abs err = " + fmt17(worst));
  });

  rep.run("continuum-grid", "rel 1e-9", [&] {
    SuperTaskGrid grid(0.25);
    ActionSet acts = ActionSet::iota(std::min(cfg.actions, 3));
    ContinuumForecaster fc(acts, grid, 1, 0.8);
    auto micro = make_constancy(acts, 1, grid.cells());
    LossTable cum(grid.cells(), acts.size());
    for (int r = 0; r < 3; ++r) {
      std::vector<StepFunction> psi;
      for (int k = 0; k < acts.size(); ++k) {
        std::vector<double> b{0.0, 0.25 + 0.5 * rng.uniform()};
        std::vector<double> v{rng.uniform(), rng.uniform()};
        psi.emplace_back(std::move(b), std::move(v));
      }
      auto row = integrate_losses(psi, grid);
      for (double x : row)
        if (!(x >= 0.0 && x <= grid.eps() * (1 + 1e-9)))
          return std::make_pair(false, std::string("integrated loss out of range"));
      cum.accumulate(row);
      fc.observe(psi);
    }
    auto set = oracle::enumerate_legal(micro);
    auto mass = oracle::oracle_distribution(set, micro, cum, 0.8);
    double worst = 0;
    for (std::size_t i = 0; i < set.cardinality(); ++i)
      worst = std::max(worst, std::abs(fc.prob_of(set.sequences[i]) - mass[i]) /
                                  std::max(mass[i], 1e-300));
    return std::make_pair(worst < 1e-9, "max rel err = " + fmt17(worst));
  });

  rep.run("reproducibility", "byte-identical CSV", [&] {
    Config small = base;
    small.rounds = std::min<std::int64_t>(base.rounds, 16);
    small.replicas = std::min(base.replicas, 2);
    small.out_path.clear();
    auto r1 = cewa::run(small);
    auto r2 = cewa::run(small);
    bool ok = to_csv(r1) == to_csv(r2);
    return std::make_pair(ok, std::string());
  });

  out << (rep.failures == 0 ? "VERIFY OK" : "VERIFY FAILED") << " — "
      << rep.failures << " failure(s), " << rep.refused << " refused\n";
  return rep.failures;
}

}  // namespace cewa
