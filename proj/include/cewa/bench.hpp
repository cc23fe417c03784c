#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "cewa/automaton.hpp"
#include "cewa/lattice.hpp"

namespace cewa {

namespace detail {

struct BenchRow {
  std::string family;
  int tasks;
  int actions;
  std::uint64_t relaxations;
  std::uint64_t bound;
  double micros;
};

inline BenchRow bench_one(const std::string& family, ConstraintAutomaton a,
                          std::uint64_t bound) {
  LossTable zero(a.task_count(), a.play_actions());
  auto start = std::chrono::steady_clock::now();
  WeightLattice lat(a, zero, 1.0);
  auto us = std::chrono::duration<double, std::micro>(
                std::chrono::steady_clock::now() - start)
                .count();
  return {family, a.task_count(), a.play_actions(), lat.relaxations(), bound, us};
}

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    den += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return num / den;
}

}  // namespace detail

// Edge-relaxation counts and wall time across the four structured families,
// asserted against their per-family bounds (M N theta, M N^2, M N^2 m,
// M N^2 B) and against log-log scaling slopes on the escalation family.
inline int bench(std::ostream& out) {
  using detail::BenchRow;
  std::vector<BenchRow> rows;
  int violations = 0;

  // Coherence on the integer grid with gamma = 1: theta = 3 neighbors.
  for (int m : {8, 16, 32, 64}) {
    int n = 8;
    auto a = make_coherence(ActionSet::iota(n), 1.0, m);
    rows.push_back(detail::bench_one(
        "coherence", std::move(a),
        std::uint64_t(m) * std::uint64_t(n) * 3));
  }
  // Escalation: M sweep then N sweep (slope targets 1 and 2).
  std::vector<double> esc_m, esc_m_relax, esc_n, esc_n_relax;
  for (int m : {8, 16, 32, 64}) {
    int n = 8;
    auto r = detail::bench_one("escalation", make_escalation(ActionSet::iota(n), m),
                               std::uint64_t(m) * n * n);
    esc_m.push_back(m);
    esc_m_relax.push_back(double(r.relaxations));
    rows.push_back(r);
  }
  for (int n : {8, 16, 32}) {
    int m = 8;
    auto r = detail::bench_one("escalation", make_escalation(ActionSet::iota(n), m),
                               std::uint64_t(m) * n * n);
    esc_n.push_back(n);
    esc_n_relax.push_back(double(r.relaxations));
    rows.push_back(r);
  }
  // Constancy with m_shifts = 2.
  for (int m : {4, 6, 8}) {
    int n = 4, shifts = 2;
    rows.push_back(detail::bench_one(
        "constancy", make_constancy(ActionSet::iota(n), shifts, m),
        std::uint64_t(m) * n * n * shifts));
  }
  // Budget with x_k = k and B = 2N.
  for (int m : {3, 4, 5}) {
    int n = 4, budget = 8;
    rows.push_back(detail::bench_one(
        "budget", make_budget(ActionSet::iota(n), double(budget), m),
        std::uint64_t(m) * n * n * budget));
  }

  out << "family      M    N   relaxations        bound   time_us  ok\n";
  for (const auto& r : rows) {
    bool ok = r.relaxations <= r.bound;
    if (!ok) ++violations;
    out << std::left << std::setw(10) << r.family << std::right << std::setw(5)
        << r.tasks << std::setw(5) << r.actions << std::setw(14)
        << r.relaxations << std::setw(13) << r.bound << std::setw(10)
        << std::fixed << std::setprecision(1) << r.micros << "  "
        << (ok ? "yes" : "NO") << "\n";
  }

  double slope_m = detail::loglog_slope(esc_m, esc_m_relax);
  double slope_n = detail::loglog_slope(esc_n, esc_n_relax);
  bool ok_m = std::abs(slope_m - 1.0) <= 0.15;
  bool ok_n = std::abs(slope_n - 2.0) <= 0.30;  // within 15% of 2
  if (!ok_m) ++violations;
  if (!ok_n) ++violations;
  out << "escalation slope in M: " << std::setprecision(4) << slope_m
      << " (target 1 +/- 15%) " << (ok_m ? "ok" : "VIOLATION") << "\n";
  out << "escalation slope in N: " << slope_n << " (target 2 +/- 15%) "
      << (ok_n ? "ok" : "VIOLATION") << "\n";
  out << (violations == 0 ? "BENCH OK" : "BENCH FAILED") << "\n";
  return violations;
}

}  // namespace cewa
