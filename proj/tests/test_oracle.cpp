#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cewa/oracle.hpp"
#include "cewa/rng.hpp"
#include "test_util.hpp"

using namespace cewa;

TEST_CASE("enumeration matches an independent full scan") {
  Rng rng(7);
  for (int family = 0; family < 5; ++family)
    for (int rep = 0; rep < 4; ++rep) {
      int tasks = 2 + static_cast<int>(rng.below(3));
      int n = 2 + static_cast<int>(rng.below(3));
      auto a = testutil::random_instance(rng, family, tasks, n);
      auto set = oracle::enumerate_legal(a);
      auto scan = testutil::full_scan_legal(a);
      CHECK(set.sequences == scan);  // both lexicographic, duplicate-free
      CHECK(std::is_sorted(set.sequences.begin(), set.sequences.end()));
    }
}

TEST_CASE("enumeration cap refuses oversized instances") {
  auto a = make_escalation(ActionSet::iota(10), 9);
  CHECK_THROWS_AS(oracle::enumerate_legal(a, 1e6), CapError);
}

TEST_CASE("oracle distribution") {
  auto a = make_coherence(ActionSet({1, 2, 3}), 1.0, 2);
  auto set = oracle::enumerate_legal(a);
  LossTable zero(2, 3);

  SUBCASE("zero losses give the uniform distribution") {
    auto mass = oracle::oracle_distribution(set, a, zero, 0.7);
    for (double m : mass) CHECK(m == doctest::Approx(1.0 / 7).epsilon(1e-12));
  }

  SUBCASE("masses sum to one") {
    Rng rng(11);
    auto t = testutil::random_losses(rng, a, 5);
    auto mass = oracle::oracle_distribution(set, a, t, 1.3);
    double s = 0;
    for (double m : mass) s += m;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }

  SUBCASE("a strictly dominant vector takes nearly all mass at large eta") {
    LossTable t(2, 3);
    t.accumulate(std::vector<double>{0.0, 0.5, 0.5, 0.0, 0.5, 0.5});
    auto mass = oracle::oracle_distribution(set, a, t, 1e3);
    auto it = std::find(set.sequences.begin(), set.sequences.end(),
                        std::vector<int>{0, 0});
    REQUIRE(it != set.sequences.end());
    CHECK(mass[static_cast<std::size_t>(it - set.sequences.begin())] > 0.999);
  }

  SUBCASE("per-task constant shifts leave masses unchanged") {
    Rng rng(12);
    auto t = testutil::random_losses(rng, a, 3);
    auto base = oracle::oracle_distribution(set, a, t, 0.9);
    auto cum = t.data();
    for (int k = 0; k < 3; ++k) cum[static_cast<std::size_t>(k)] += 2.5;  // task 0
    auto shifted = LossTable::from_cumulative(2, 3, cum, t.rounds());
    auto mass = oracle::oracle_distribution(set, a, shifted, 0.9);
    for (std::size_t i = 0; i < mass.size(); ++i)
      CHECK(mass[i] == doctest::Approx(base[i]).epsilon(1e-12));
  }
}

TEST_CASE("oracle best fixed") {
  auto a = make_escalation(ActionSet::iota(3), 2);
  auto set = oracle::enumerate_legal(a);
  LossTable zero(2, 3);
  auto [seq, loss] = oracle::oracle_best_fixed(set, a, zero);
  CHECK(seq == std::vector<int>{0, 0});  // lexicographic first at zero loss
  CHECK(loss == 0.0);
}

TEST_CASE("switching-sequence enumeration") {
  auto a = make_constancy(ActionSet::iota(2), 0, 1);  // trivially A = {0, 1}
  auto set = oracle::enumerate_legal(a);
  REQUIRE(set.cardinality() == 2);

  SUBCASE("K = 0 gives the constant sequences") {
    auto seqs = oracle::enumerate_switching(set, 4, 0);
    CHECK(seqs.size() == 2);
    for (const auto& s : seqs)
      CHECK(std::count(s.begin(), s.end(), s[0]) == 4);
  }
  SUBCASE("n = 3, |A| = 2, K = 1 gives 6 sequences") {
    CHECK(oracle::enumerate_switching(set, 3, 1).size() == 6);
  }
  SUBCASE("n = 2 with K >= 1 is unconstrained") {
    CHECK(oracle::enumerate_switching(set, 2, 1).size() == 4);
    CHECK(oracle::enumerate_switching(set, 2, 5).size() == 4);
  }
  SUBCASE("cap refusal") {
    CHECK_THROWS_AS(oracle::enumerate_switching(set, 50, 10), CapError);
  }
}
