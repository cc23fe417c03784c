#include "doctest.h"

#include <cmath>
#include <vector>

#include "cewa/continuum.hpp"
#include "cewa/oracle.hpp"
#include "test_util.hpp"

using namespace cewa;

namespace {

StepFunction random_step(Rng& rng, int pieces) {
  std::vector<double> b{0.0};
  for (int i = 1; i < pieces; ++i) b.push_back(rng.uniform());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<double> v(b.size());
  for (auto& x : v) x = rng.uniform();
  return StepFunction(std::move(b), std::move(v));
}

std::vector<StepFunction> random_round(Rng& rng, int actions, int pieces) {
  std::vector<StepFunction> out;
  for (int k = 0; k < actions; ++k) out.push_back(random_step(rng, pieces));
  return out;
}

}  // namespace

TEST_CASE("grid construction") {
  auto g = discretize(0.25);
  CHECK(g.cells() == 4);
  for (int j = 0; j < 4; ++j) CHECK(g.width(j) == doctest::Approx(0.25));

  auto g2 = discretize(0.3);
  CHECK(g2.cells() == 4);
  CHECK(g2.width(3) == doctest::Approx(0.1));
  CHECK(g2.upper(3) == 1.0);

  CHECK(discretize(1.0).cells() == 1);
  CHECK(discretize(0.1).cells() == 10);  // guards against 1/0.1 rounding up

  CHECK_THROWS_AS(discretize(0.0), ParameterError);
  CHECK_THROWS_AS(discretize(1.5), ParameterError);
}

TEST_CASE("step function evaluation and integration") {
  StepFunction f({0.0, 0.5}, {1.0, 0.0});  // indicator of [0, 0.5)
  CHECK(f.at(0.0) == 1.0);
  CHECK(f.at(0.49) == 1.0);
  CHECK(f.at(0.5) == 0.0);
  CHECK(f.at(1.0) == 0.0);
  CHECK(f.integrate(0.0, 1.0) == doctest::Approx(0.5));

  CHECK_THROWS_AS(StepFunction({0.1}, {0.5}), InputError);
  CHECK_THROWS_AS(StepFunction({0.0, 0.5, 0.4}, {1, 1, 1}), InputError);
  CHECK_THROWS_AS(StepFunction({0.0}, {1.0, 2.0}), InputError);
}

TEST_CASE("integrated losses: constant and indicator examples") {
  auto grid = discretize(0.25);
  SUBCASE("psi identically 1 integrates to the cell widths") {
    std::vector<StepFunction> psi{StepFunction::constant(1.0)};
    auto row = integrate_losses(psi, grid);
    for (int j = 0; j < 4; ++j)
      CHECK(row[static_cast<std::size_t>(j)] == doctest::Approx(grid.width(j)));
  }
  SUBCASE("indicator of the lower half") {
    std::vector<StepFunction> psi{StepFunction({0.0, 0.5}, {1.0, 0.0})};
    auto row = integrate_losses(psi, grid);
    CHECK(row[0] == doctest::Approx(0.25));
    CHECK(row[1] == doctest::Approx(0.25));
    CHECK(row[2] == doctest::Approx(0.0));
    CHECK(row[3] == doctest::Approx(0.0));
  }
}

TEST_CASE("integration matches a Monte Carlo oracle within 3 sigma") {
  Rng rng(314159);
  auto grid = discretize(0.3);
  auto psi = random_round(rng, 2, 4);
  auto row = integrate_losses(psi, grid);
  Rng mc(271828);
  const int pts = 1000000;
  for (int k = 0; k < 2; ++k) {
    double exact = 0;
    for (int j = 0; j < grid.cells(); ++j)
      exact += row[static_cast<std::size_t>(j) * 2 + k];
    double acc = 0;
    for (int i = 0; i < pts; ++i)
      acc += psi[static_cast<std::size_t>(k)].at(mc.uniform());
    double estimate = acc / pts;
    CHECK(std::abs(estimate - exact) < 3.0 * 0.5 / std::sqrt(double(pts)));
  }
}

TEST_CASE("integrated losses stay within the cell width") {
  Rng rng(55);
  for (double eps : {0.17, 0.33, 0.5, 1.0}) {
    auto grid = discretize(eps);
    for (int rep = 0; rep < 20; ++rep) {
      auto psi = random_round(rng, 3, 5);
      auto row = integrate_losses(psi, grid);
      for (int j = 0; j < grid.cells(); ++j)
        for (int k = 0; k < 3; ++k) {
          double v = row[static_cast<std::size_t>(j) * 3 + k];
          CHECK(v >= 0.0);
          CHECK(v <= eps * (1.0 + 1e-9));
        }
    }
  }
}

TEST_CASE("discretized forecaster matches the oracle over the grid class") {
  Rng rng(808);
  auto grid = discretize(0.25);  // 4 super-tasks
  ContinuumForecaster fc(ActionSet::iota(2), grid, 1, 0.9);
  const auto& a = fc.automaton();
  auto set = oracle::enumerate_legal(a);

  // Round 1: uniform over the grid-compatible class.
  for (const auto& x : set.sequences)
    CHECK(fc.prob_of(x) ==
          doctest::Approx(1.0 / double(set.cardinality())).epsilon(1e-12));

  LossTable cum(grid.cells(), 2);
  for (int r = 0; r < 3; ++r) {
    auto psi = random_round(rng, 2, 4);
    cum.accumulate(integrate_losses(psi, grid));
    fc.observe(psi);
  }
  auto mass = oracle::oracle_distribution(set, a, cum, 0.9);
  for (std::size_t i = 0; i < set.cardinality(); ++i) {
    double got = fc.prob_of(set.sequences[i]);
    CHECK(std::abs(got - mass[i]) <= 1e-9 * mass[i]);
  }
}

TEST_CASE("zero shifts draw a constant function from single-task totals") {
  Rng rng(99);
  auto grid = discretize(0.5);
  ContinuumForecaster fc(ActionSet::iota(3), grid, 0, 1.1);
  auto psi = random_round(rng, 3, 3);
  fc.observe(psi);
  // Mass of the constant-k play equals single-task EWA on total integrals.
  std::vector<double> totals(3, 0.0);
  for (int k = 0; k < 3; ++k)
    totals[static_cast<std::size_t>(k)] =
        psi[static_cast<std::size_t>(k)].integrate(0.0, 1.0);
  double z = 0;
  for (double t : totals) z += std::exp(-1.1 * t);
  for (int k = 0; k < 3; ++k) {
    CHECK(fc.prob_of(std::vector<int>{k, k}) ==
          doctest::Approx(std::exp(-1.1 * totals[static_cast<std::size_t>(k)]) / z)
              .epsilon(1e-9));
  }
  Rng draw(7);
  auto play = fc.sample(draw);
  CHECK(play.function.breakpoints().size() == 1);  // constant
}

TEST_CASE("loss concentrated on the lower half pushes mass off that action") {
  auto grid = discretize(0.25);
  ContinuumForecaster fc(ActionSet::iota(2), grid, 1, 2.0);
  std::vector<int> avoid{1, 1, 0, 0};  // plays action 1 below 0.5, 0 above
  std::vector<int> hit{0, 0, 1, 1};    // plays action 0 below 0.5, 1 above
  double before_avoid = fc.prob_of(avoid);
  double before_hit = fc.prob_of(hit);
  CHECK(before_avoid == doctest::Approx(before_hit));  // symmetric at t = 1
  // Action 0 takes loss 1 on [0, 0.5), action 1 takes none.
  std::vector<StepFunction> psi{StepFunction({0.0, 0.5}, {1.0, 0.0}),
                                StepFunction::constant(0.0)};
  fc.observe(psi);
  CHECK(fc.prob_of(avoid) > before_avoid);
  CHECK(fc.prob_of(hit) < before_hit);
  CHECK(fc.prob_of(avoid) > fc.prob_of(hit));
}

TEST_CASE("sampled plays render with at most m shifts at grid points") {
  Rng rng(1021);
  auto grid = discretize(0.2);
  ContinuumForecaster fc(ActionSet::iota(3), grid, 2, 0.8);
  for (int r = 0; r < 2; ++r) fc.observe(random_round(rng, 3, 4));
  for (int i = 0; i < 50; ++i) {
    auto play = fc.sample(rng);
    CHECK(fc.automaton().is_legal(play.cells.indices));
    CHECK(play.function.breakpoints().size() <= 3);  // m + 1 pieces
    for (double b : play.function.breakpoints()) {
      int cell = static_cast<int>(std::floor(b / 0.2 + 0.5));
      CHECK(std::abs(b - grid.lower(cell)) < 1e-12);
    }
    // The rendering agrees with the per-cell draw.
    for (int j = 0; j < grid.cells(); ++j) {
      double g = (grid.lower(j) + grid.upper(j)) / 2;
      CHECK(play.function.at(g) ==
            fc.automaton().actions().value(
                play.cells.indices[static_cast<std::size_t>(j)]));
    }
  }
}

TEST_CASE("continuum regret report") {
  Rng rng(4321);
  auto grid = discretize(0.25);
  ActionSet acts = ActionSet::iota(2);
  std::vector<std::vector<StepFunction>> hist;
  for (int r = 0; r < 4; ++r) hist.push_back(random_round(rng, 2, 3));

  SUBCASE("comparator equals the enumerated grid-class minimum") {
    auto reg = continuum_regret({}, hist, acts, grid, 1);
    auto a = make_constancy(acts, 1, grid.cells());
    LossTable cum(grid.cells(), 2);
    for (const auto& psi : hist) cum.accumulate(integrate_losses(psi, grid));
    auto set = oracle::enumerate_legal(a);
    auto [seq, loss] = oracle::oracle_best_fixed(set, a, cum);
    CHECK(reg.best_discrete_loss == doctest::Approx(loss).epsilon(1e-12));
  }
  SUBCASE("zero shifts have zero slack") {
    auto reg = continuum_regret({}, hist, acts, grid, 0);
    CHECK(reg.discretization_slack == 0.0);
  }
  SUBCASE("halving eps halves the slack") {
    auto r1 = continuum_regret({}, hist, acts, discretize(0.2), 2);
    auto r2 = continuum_regret({}, hist, acts, discretize(0.1), 2);
    CHECK(r1.discretization_slack == doctest::Approx(2 * r2.discretization_slack));
  }
}

TEST_CASE("unrestricted comparator finds off-grid shift points") {
  ActionSet acts = ActionSet::iota(2);
  // Action 0 is free below 0.37 and costly above; action 1 mirrors it.
  std::vector<StepFunction> psi{StepFunction({0.0, 0.37}, {0.0, 1.0}),
                                StepFunction({0.0, 0.37}, {1.0, 0.0})};
  std::vector<std::vector<StepFunction>> hist{psi, psi};
  CHECK(best_unrestricted_loss(hist, acts, 1) == doctest::Approx(0.0));
  // With zero shifts the best play eats the smaller side.
  CHECK(best_unrestricted_loss(hist, acts, 0) ==
        doctest::Approx(2 * 0.37).epsilon(1e-12));
  // The grid comparator cannot shift at 0.37.
  auto reg = continuum_regret({}, hist, acts, discretize(0.25), 1);
  CHECK(reg.best_discrete_loss > 0.0);
  CHECK(reg.best_discrete_loss <= 2 * 0.37);
}

TEST_CASE("eta_continuum_default uses the grid-class cardinality") {
  auto grid = discretize(0.25);
  auto a = make_constancy(ActionSet::iota(3), 1, grid.cells());
  double lg = count_legal(a).log_count;
  CHECK(eta_continuum_default(400, a) ==
        doctest::Approx(std::sqrt(8.0 * lg / 400.0)).epsilon(1e-12));
}
