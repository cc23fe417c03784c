#include "doctest.h"

#include <cmath>
#include <map>
#include <vector>

#include "cewa/oracle.hpp"
#include "cewa/tracking.hpp"
#include "test_util.hpp"

using namespace cewa;

namespace {

// Brute-force posterior predictive over the at-most-K-switch sequence class:
// every full-horizon sequence weighted by exp(-eta * observed loss).
struct BruteTracker {
  const ConstraintAutomaton& a;
  oracle::EnumeratedSet set;
  std::vector<std::vector<int>> seqs;  // indices into set, length n
  double eta;

  BruteTracker(const ConstraintAutomaton& a_, int n, int k, double eta_)
      : a(a_), set(oracle::enumerate_legal(a_)), eta(eta_) {
    seqs = oracle::enumerate_switching(set, n, k);
  }

  double seq_loss(int member, const std::vector<double>& round) const {
    double l = 0;
    const auto& x = set.sequences[static_cast<std::size_t>(member)];
    for (int j = 0; j < a.task_count(); ++j) {
      int k = x[static_cast<std::size_t>(j)];
      if (a.is_play_symbol(k))
        l += round[static_cast<std::size_t>(j) * a.play_actions() + k];
    }
    return l;
  }

  // Predictive masses over A at round t (1-based) given observed history.
  std::vector<double> predictive(
      const std::vector<std::vector<double>>& history, int t) const {
    std::vector<double> mass(set.cardinality(), 0.0);
    double total = 0;
    for (const auto& sigma : seqs) {
      double loss = 0;
      for (int s = 1; s < t; ++s)
        loss += seq_loss(sigma[static_cast<std::size_t>(s - 1)],
                         history[static_cast<std::size_t>(s - 1)]);
      double w = std::exp(-eta * loss);
      mass[static_cast<std::size_t>(sigma[static_cast<std::size_t>(t - 1)])] += w;
      total += w;
    }
    for (auto& m : mass) m /= total;
    return mass;
  }

  // Posterior over (last switch time in prefix 1..t, switches used).
  std::vector<double> posterior(const std::vector<std::vector<double>>& history,
                                int t, int kmax) const {
    std::vector<double> mass(static_cast<std::size_t>(t) * (kmax + 1), 0.0);
    double total = 0;
    for (const auto& sigma : seqs) {
      double loss = 0;
      for (int s = 1; s < t; ++s)
        loss += seq_loss(sigma[static_cast<std::size_t>(s - 1)],
                         history[static_cast<std::size_t>(s - 1)]);
      int kappa = 0, tau = 1;
      for (int s = 2; s <= t; ++s)
        if (sigma[static_cast<std::size_t>(s - 1)] !=
            sigma[static_cast<std::size_t>(s - 2)]) {
          ++kappa;
          tau = s;
        }
      double w = std::exp(-eta * loss);
      mass[static_cast<std::size_t>(tau - 1) * (kmax + 1) + kappa] += w;
      total += w;
    }
    for (auto& m : mass) m /= total;
    return mass;
  }

  double best_loss(const std::vector<std::vector<double>>& history) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sigma : seqs) {
      double loss = 0;
      for (std::size_t s = 0; s < history.size(); ++s)
        loss += seq_loss(sigma[s], history[s]);
      best = std::min(best, loss);
    }
    return best;
  }
};

std::vector<std::vector<double>> random_history(Rng& rng,
                                                const ConstraintAutomaton& a,
                                                int rounds) {
  std::vector<std::vector<double>> h;
  for (int t = 0; t < rounds; ++t) {
    std::vector<double> row(
        static_cast<std::size_t>(a.task_count()) * a.play_actions());
    for (auto& v : row) v = rng.uniform();
    h.push_back(std::move(row));
  }
  return h;
}

}  // namespace

TEST_CASE("tracking predictive matches brute force over the switching class") {
  Rng rng(606);
  struct Case {
    ConstraintAutomaton a;
    int n, k;
  };
  std::vector<Case> cases;
  cases.push_back({make_escalation(ActionSet::iota(2), 2), 4, 1});
  cases.push_back({make_escalation(ActionSet::iota(2), 2), 5, 2});
  cases.push_back({make_coherence(ActionSet::iota(2), 5.0, 2), 4, 2});
  cases.push_back({make_constancy(ActionSet::iota(2), 1, 3), 4, 1});
  cases.push_back({make_task_subset(ActionSet::iota(2), 1, 2), 4, 2});
  cases.push_back({make_budget(ActionSet::iota(2), 3.0, 2), 5, 1});

  for (auto& c : cases) {
    double eta = 0.3 + rng.uniform();
    BruteTracker brute(c.a, c.n, c.k, eta);
    TrackingForecaster fc(c.a, c.k, c.n, eta);
    auto history = random_history(rng, c.a, c.n);
    for (int t = 1; t <= c.n; ++t) {
      auto want = brute.predictive(history, t);
      double tv = 0;
      for (std::size_t i = 0; i < brute.set.cardinality(); ++i)
        tv += std::abs(fc.predictive_mass(brute.set.sequences[i]) - want[i]);
      CHECK(tv / 2 < 1e-9);
      fc.observe(history[static_cast<std::size_t>(t - 1)]);
    }
  }
}

TEST_CASE("tracking predictive at t=1 is uniform over the legal set") {
  auto a = make_constancy(ActionSet::iota(3), 1, 3);
  auto set = oracle::enumerate_legal(a);
  TrackingForecaster fc(a, 2, 10, 0.8);
  for (const auto& x : set.sequences)
    CHECK(fc.predictive_mass(x) ==
          doctest::Approx(1.0 / double(set.cardinality())).epsilon(1e-12));
}

TEST_CASE("K = 0 tracking equals the standard forecaster on the full history") {
  Rng rng(31337);
  auto a = make_escalation(ActionSet::iota(3), 2);
  auto set = oracle::enumerate_legal(a);
  double eta = 0.9;
  TrackingForecaster fc(a, 0, 8, eta);
  LossTable cum(2, 3);
  auto history = random_history(rng, a, 6);
  for (const auto& row : history) {
    fc.observe(row);
    cum.accumulate(row);
  }
  auto lat = forward_pass(a, cum, eta);
  for (const auto& x : set.sequences)
    CHECK(fc.predictive_mass(x) == doctest::Approx(lat.prob_of(x)).epsilon(1e-12));
}

TEST_CASE("switch posterior is a distribution and matches brute force") {
  Rng rng(5150);
  auto a = make_escalation(ActionSet::iota(2), 2);
  int n = 5, k = 2;
  double eta = 1.2;
  BruteTracker brute(a, n, k, eta);
  TrackingForecaster fc(a, k, n, eta);
  auto history = random_history(rng, a, n);
  for (int t = 1; t <= n; ++t) {
    auto sp = fc.switch_posterior();
    REQUIRE(sp.round == t);
    auto want = brute.posterior(history, t, k);
    double sum = 0;
    for (int tau = 1; tau <= t; ++tau)
      for (int kappa = 0; kappa <= k; ++kappa) {
        double got = sp.at(tau, kappa);
        CHECK(got >= 0.0);
        sum += got;
        CHECK(std::abs(got - want[static_cast<std::size_t>(tau - 1) * (k + 1) +
                                  kappa]) < 1e-9);
      }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    fc.observe(history[static_cast<std::size_t>(t - 1)]);
  }
}

TEST_CASE("tracking sampler draws follow the predictive distribution") {
  Rng rng(8080);
  auto a = make_escalation(ActionSet::iota(2), 2);
  int n = 4, k = 1;
  double eta = 1.0;
  TrackingForecaster fc(a, k, n, eta);
  auto history = random_history(rng, a, n - 1);
  for (const auto& row : history) fc.observe(row);

  auto set = oracle::enumerate_legal(a);
  std::map<std::vector<int>, int> freq;
  Rng draw_rng(99991);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    auto s = fc.sample(draw_rng);
    CHECK(a.is_legal(s.indices));
    ++freq[s.indices];
  }
  double chi2 = 0;
  for (const auto& x : set.sequences) {
    double expect = fc.predictive_mass(x) * draws;
    double obs = freq.count(x) ? double(freq[x]) : 0.0;
    chi2 += (obs - expect) * (obs - expect) / expect;
  }
  CHECK(chi2 < 16.81);  // far above the 0.99 quantile for 2 dof
}

TEST_CASE("segment normalizers match fresh forward passes") {
  Rng rng(7117);
  auto a = make_constancy(ActionSet::iota(2), 1, 3);
  double eta = 0.8;
  TrackingForecaster fc(a, 1, 8, eta);
  auto history = random_history(rng, a, 4);
  std::vector<std::vector<double>> cum{
      std::vector<double>(static_cast<std::size_t>(6), 0.0)};
  for (const auto& row : history) {
    auto next = cum.back();
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += row[i];
    cum.push_back(next);
    fc.observe(row);
  }
  int t = 5;
  auto z = fc.segment_log_normalizers();
  REQUIRE(static_cast<int>(z.size()) == t);
  // The empty segment normalizer is |A| in weight terms.
  CHECK(z[static_cast<std::size_t>(t - 1)] ==
        doctest::Approx(count_legal(a).log_count).epsilon(1e-12));
  for (int tau = 1; tau <= t; ++tau) {
    std::vector<double> seg(6);
    for (std::size_t i = 0; i < 6; ++i)
      seg[i] = cum[static_cast<std::size_t>(t - 1)][i] -
               cum[static_cast<std::size_t>(tau - 1)][i];
    auto table = LossTable::from_cumulative(3, 2, seg, t - tau);
    CHECK(z[static_cast<std::size_t>(tau - 1)] ==
          doctest::Approx(forward_pass(a, table, eta).log_normalizer())
              .epsilon(1e-12));
  }
}

TEST_CASE("per-round forward-pass cost is at most t") {
  auto a = make_escalation(ActionSet::iota(2), 2);
  TrackingForecaster fc(a, 2, 12, 0.7);
  std::uint64_t prev = 0;
  for (int t = 1; t <= 8; ++t) {
    (void)fc.predictive_mass(std::vector<int>{0, 0});
    std::uint64_t now = fc.forward_passes();
    CHECK(now - prev <= static_cast<std::uint64_t>(t));
    prev = now;
    std::vector<double> row(4, 0.25);
    fc.observe(row);
  }
}

TEST_CASE("tracking comparator equals the exhaustive switching minimum") {
  Rng rng(246);
  for (int rep = 0; rep < 6; ++rep) {
    auto a = rep % 2 == 0 ? make_escalation(ActionSet::iota(2), 2)
                          : make_constancy(ActionSet::iota(2), 1, 3);
    int n = 3 + static_cast<int>(rng.below(3));
    int k = static_cast<int>(rng.below(3));
    BruteTracker brute(a, n, k, 1.0);
    auto history = random_history(rng, a, n);
    double got = tracking_comparator_loss(a, history, k);
    CHECK(got == doctest::Approx(brute.best_loss(history)).epsilon(1e-12));
  }
}

TEST_CASE("tracking comparator endpoints") {
  Rng rng(999);
  auto a = make_escalation(ActionSet::iota(3), 2);
  auto history = random_history(rng, a, 5);

  // K = 0: the best fixed vector.
  LossTable cum(2, 3);
  for (const auto& row : history) cum.accumulate(row);
  CHECK(tracking_comparator_loss(a, history, 0) ==
        doctest::Approx(best_fixed(a, cum).loss).epsilon(1e-12));

  // K >= n-1: per-round optimum.
  double per_round = 0;
  for (const auto& row : history) {
    LossTable one(2, 3);
    one.accumulate(row);
    per_round += min_legal_loss(a, one);
  }
  CHECK(tracking_comparator_loss(a, history, 10) ==
        doctest::Approx(per_round).epsilon(1e-12));
}

TEST_CASE("a single-element legal set is handled across switch budgets") {
  auto a = make_constancy(ActionSet::iota(1), 0, 3);  // |A| = 1
  TrackingForecaster fc(a, 2, 6, 1.0);
  Rng rng(3);
  std::vector<double> row(3, 0.5);
  for (int t = 0; t < 4; ++t) {
    CHECK(fc.predictive_mass(std::vector<int>{0, 0, 0}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fc.sample(rng).indices == std::vector<int>{0, 0, 0});
    auto sp = fc.switch_posterior();
    CHECK(sp.at(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
    fc.observe(row);
  }
}

TEST_CASE("tracking parameter validation") {
  auto a = make_escalation(ActionSet::iota(2), 2);
  CHECK_THROWS_AS(TrackingForecaster(a, -1, 5, 1.0), ParameterError);
  CHECK_THROWS_AS(TrackingForecaster(a, 1, 0, 1.0), ParameterError);
  CHECK_THROWS_AS(TrackingForecaster(a, 1, 5, 0.0), ParameterError);
  TrackingForecaster fc(a, 1, 2, 1.0);
  CHECK_THROWS_AS(fc.observe(std::vector<double>{0.5}), InputError);
  std::vector<double> row(4, 0.5);
  fc.observe(row);
  fc.observe(row);
  CHECK_THROWS_AS(fc.predictive_mass(std::vector<int>{0, 0}), InputError);
  CHECK(tracking_eta_default(100, a, 2) > 0);
}
