#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "isqbound/bounds.hpp"
#include "isqbound/sim.hpp"
#include "isqbound/wine.hpp"

// invariant suites shared by the `verify` CLI verb and the acceptance runner
namespace isqbound::verify {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> details;

  explicit CheckResult(std::string n) : name(std::move(n)) {}
  void note(const std::string& s) { details.push_back(s); }
  void fail(const std::string& s) {
    passed = false;
    details.push_back("FAILED " + s);
  }
};

inline std::string num(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// simulated ISQ-k work and idle probability against the analytic pipeline; tolerance is ci_multiple CI half-widths
inline CheckResult isq_stationary(int k, const Distribution& d, double lambda, std::uint64_t n, std::uint64_t seed,
                                  double ci_multiple = 1.0) {
  CheckResult r{"isq stationary k=" + std::to_string(k) + " " + d.label() + " lambda=" + num(lambda)};
  const SystemParams p(k, lambda, d);
  const BoundEngine eng(k);
  const double want_w = eng.isq_total_work(p), want_i = eng.idle_probability(p);
  SimOptions o;
  o.n_arrivals = n;
  o.seed = seed;
  const auto s = simulate_isq(p, o);
  const auto& w = s.work;
  const auto& i0 = s.speed_occupancy[0];
  const std::string msg_w = "E[W] sim " + num(w.mean) + " +- " + num(w.ci) + " vs " + num(want_w);
  const std::string msg_i = "P(I=0) sim " + num(i0.mean) + " +- " + num(i0.ci) + " vs " + num(want_i);
  if (std::abs(w.mean - want_w) <= ci_multiple * w.ci) r.note(msg_w);
  else r.fail(msg_w);
  if (std::abs(i0.mean - want_i) <= ci_multiple * i0.ci) r.note(msg_i);
  else r.fail(msg_i);
  return r;
}

inline CheckResult coupling(const std::vector<int>& ks, const std::vector<Policy>& policies, const Distribution& d,
                            double rho, std::uint64_t n, const std::vector<std::uint64_t>& seeds, double slack = 1e-9) {
  CheckResult r{"coupled dominance W_isq <= W_k"};
  double worst = -std::numeric_limits<double>::infinity();
  std::uint64_t epochs = 0;
  for (int k : ks)
    for (Policy pol : policies)
      for (auto seed : seeds) {
        const auto p = SystemParams::from_load(k, rho, d);
        const auto c = simulate_coupled(p, pol, n, seed);
        worst = std::max(worst, c.max_violation);
        epochs += c.epochs;
        if (c.max_violation > slack)
          r.fail("k=" + std::to_string(k) + " " + to_string(pol) + " seed " + std::to_string(seed) + ": W_isq - W_k = " +
                 num(c.max_violation) + " at t=" + num(c.violation_time, 12));
      }
  r.note("max(W_isq - W_k) = " + num(worst) + " over " + std::to_string(epochs) + " epochs");
  return r;
}

inline CheckResult wine_mginf_identity(const std::vector<int>& ks, const std::vector<Distribution>& ds, double rho,
                                       double tol = 1e-6) {
  CheckResult r{"WINE MGINF-only equals k E[S]"};
  double worst = 0;
  for (int k : ks) {
    const BoundEngine eng(k);
    for (const auto& d : ds) {
      const auto p = SystemParams::from_load(k, rho, d);
      const double v = wine_integrate(eng, p, {Curve::MGINF}).value;
      const double err = std::abs(v - k * d.mean());
      worst = std::max(worst, err);
      if (err > tol) r.fail("k=" + std::to_string(k) + " " + d.label() + ": " + num(v, 12) + " vs " + num(k * d.mean()));
    }
  }
  r.note("max |error| = " + num(worst));
  return r;
}

inline CheckResult bar_residual(const std::vector<int>& ks, const std::vector<double>& rhos, const Distribution& d,
                                std::uint64_t n, std::uint64_t seed, double ci_multiple = 3.0) {
  CheckResult r{"BAR residual of g_k and h_k"};
  for (int k : ks)
    for (double rho : rhos)
      for (Family f : {Family::U, Family::V}) {
        const auto p = SystemParams::from_load(k, rho, d);
        SimOptions o;
        o.n_arrivals = n;
        o.seed = seed;
        const auto e = measure_bar_residual(p, f, o);
        const std::string msg = std::string(f == Family::U ? "g" : "h") + " k=" + std::to_string(k) + " rho=" + num(rho) +
                                ": " + num(e.mean) + " +- " + num(e.ci);
        if (std::abs(e.mean) <= ci_multiple * e.ci) r.note(msg);
        else r.fail(msg);
      }
  return r;
}

inline CheckResult jump_values(std::uint64_t seed = 9) {
  CheckResult r{"J_x equals x^2"};
  const auto d = Distribution::exponential(1);
  const BoundEngine e2(2), e3(3);
  for (double rho : {0.3, 0.7, 0.95})
    for (double x : {1e-3, 0.1, 1.0, 2.5, 10.0, 100.0}) {
      const auto p = SystemParams::from_load(2, rho, d);
      const double j = e2.jump_lower_bound(p, x);
      if (j != x * x) r.fail("k=2 rho=" + num(rho) + " x=" + num(x) + ": " + num(j, 17) + " != x^2");
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-3, 2.5);
  double worst = 0;
  for (double rho : {0.3, 0.7, 0.95})
    for (int i = 0; i < 20; ++i) {
      const double x = std::pow(10.0, U(rng));
      const auto p = SystemParams::from_load(3, rho, d);
      const double j = e3.jump(p, x).value;
      const double rel = std::abs(j - x * x) / (x * x);
      worst = std::max(worst, rel);
      if (rel > 1e-6) r.fail("k=3 rho=" + num(rho) + " x=" + num(x) + ": relative gap " + num(rel));
    }
  r.note("k=2 exact at 18 points; k=3 max relative gap " + num(worst) + " at 60 points");
  return r;
}

}  // namespace isqbound::verify
