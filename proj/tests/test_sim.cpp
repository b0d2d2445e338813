#include <gtest/gtest.h>

#include <cmath>

#include "isqbound/sim.hpp"
#include "isqbound/wine.hpp"

using namespace isqbound;

namespace {

SimOptions opts(std::uint64_t n, std::uint64_t seed = 7, std::vector<double> x = {}) {
  SimOptions o;
  o.n_arrivals = n;
  o.seed = seed;
  o.thresholds = std::move(x);
  return o;
}

// 3 half-widths of the 95% interval is roughly 6 standard errors; keep a floor for tiny CIs
void expect_within(double sim, double ci, double want, const std::string& what = "") {
  EXPECT_LE(std::abs(sim - want), 3 * ci + 1e-12) << what << ": sim " << sim << " +- " << ci << " want " << want;
}

}  // namespace

TEST(Sim, SingleServerWorkIsPollaczekKhinchine) {
  const SystemParams p(1, 0.5, Distribution::exponential(1));
  for (Policy pol : {Policy::SRPT, Policy::FCFS}) {
    const auto r = simulate_mgk(p, pol, opts(1'000'000));
    expect_within(r.work.mean, r.work.ci, 1.0, to_string(pol));
  }
  const auto f = simulate_mgk(p, Policy::FCFS, opts(1'000'000));
  expect_within(f.response_time.mean, f.response_time.ci, 2.0, "fcfs response");
}

TEST(Sim, SingleServerSrptMatchesWine) {
  const auto p = SystemParams::from_load(1, 0.7, Distribution::hyperexp2_mean_scv(1, 3));
  const BoundEngine eng(1);
  const double exact = wine_integrate(eng, p, {Curve::SRPT1}).value;
  const auto r = simulate_mgk(p, Policy::SRPT, opts(2'000'000, 3));
  expect_within(r.response_time.mean, r.response_time.ci, exact);
}

TEST(Sim, LightTraffic) {
  const SystemParams p(2, 1e-3, Distribution::exponential(1));
  const auto r = simulate_mgk(p, Policy::SRPT, opts(200'000));
  EXPECT_NEAR(r.response_time.mean, 2.0, 0.02);
}

TEST(Sim, AllMeasuredJobsComplete) {
  const SystemParams p(3, 0.9, Distribution::hyperexp2_mean_scv(1, 4));
  const auto o = opts(100'000);
  const auto r = simulate_mgk(p, Policy::SRPT, o);
  const detail::BatchPlan plan(o.n_arrivals, o.warmup_fraction, o.batches);
  EXPECT_EQ(r.arrivals_completed, plan.end() - plan.warmup);
}

TEST(Sim, IsqTwoExample) {
  const SystemParams p(2, 0.5, Distribution::exponential(1));
  const auto r = simulate_isq(p, opts(2'000'000));
  expect_within(r.work.mean, r.work.ci, 1.2, "work");
  expect_within(r.speed_occupancy[0].mean, r.speed_occupancy[0].ci, 0.4, "idle");
}

TEST(Sim, IsqMatchesPipelineAtFiveServers) {
  const BoundEngine eng(5);
  for (const auto& d : {Distribution::exponential(1), Distribution::uniform_mean_scv(1, 0.2)}) {
    const auto p = SystemParams::from_load(5, 0.8, d);
    const auto r = simulate_isq(p, opts(2'000'000, 11));
    expect_within(r.work.mean, r.work.ci, eng.isq_total_work(p), d.label());
    expect_within(r.speed_occupancy[0].mean, r.speed_occupancy[0].ci, eng.idle_probability(p), d.label());
    // mean speed equals the load
    double idle_cap = 0, total = 0;
    for (int q = 0; q <= 5; ++q) {
      idle_cap += (5.0 - q) / 5 * r.speed_occupancy[q].mean;
      total += r.speed_occupancy[q].mean;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_NEAR(idle_cap, 1 - p.rho(), 5e-3);
  }
}

TEST(Sim, SeparatedIsqRelevantWorkMatchesFormula) {
  const BoundEngine eng(3);
  const std::vector<double> xs = {0.25, 0.8, 1.5, 4.0};
  const auto p = SystemParams::from_load(3, 0.75, Distribution::hyperexp2_mean_scv(1, 2));
  const auto r = simulate_isq(p, opts(2'000'000, 5, xs));
  for (std::size_t i = 0; i < xs.size(); ++i)
    expect_within(r.relevant_work[i].mean, r.relevant_work[i].ci, eng.sep_isq_relevant_work(p, xs[i]),
                  "x=" + std::to_string(xs[i]));
}

TEST(Sim, CoupledIsqWorkNeverExceedsMgk) {
  for (int k : {2, 3, 4})
    for (const auto& d : {Distribution::exponential(1), Distribution::deterministic(1),
                          Distribution::hyperexp2_mean_scv(1, 8), Distribution::uniform_mean_scv(1, 0.05)})
      for (Policy pol : {Policy::SRPT, Policy::FCFS}) {
        const auto p = SystemParams::from_load(k, 0.9, d);
        const auto r = simulate_coupled(p, pol, 200'000, 13);
        EXPECT_LE(r.max_violation, 1e-9) << k << " " << d.label() << " " << to_string(pol) << " at t "
                                         << r.violation_time;
        EXPECT_GT(r.epochs, 400'000u);
      }
}

TEST(Sim, SrptRelevantWorkDominatesIsqCurves) {
  for (int k : {2, 3}) {
    const BoundEngine eng(k);
    const std::vector<double> xs = {0.3, 1.0, 2.0, 5.0};
    const auto p = SystemParams::from_load(k, 0.85, Distribution::exponential(1));
    const auto r = simulate_mgk(p, Policy::SRPT, opts(2'000'000, 17, xs));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& e = r.relevant_work[i];
      EXPECT_GE(e.mean + 3 * e.ci, eng.sep_isq_relevant_work(p, xs[i])) << k << " x=" << xs[i];
      EXPECT_GE(e.mean + 3 * e.ci, eng.rec_isq_relevant_work_lb(p, xs[i])) << k << " x=" << xs[i];
      EXPECT_GE(e.mean + 3 * e.ci, mginf_relevant_work(p, xs[i])) << k << " x=" << xs[i];
    }
  }
}

TEST(Sim, ExactRelevantWorkAgreesWithTimeStepping) {
  const std::vector<double> xs = {0.5, 1.0, 3.0};
  const auto p = SystemParams::from_load(2, 0.8, Distribution::exponential(1));
  auto o = opts(100'000, 23, xs);
  o.riemann_step = 1e-3;
  const auto r = simulate_mgk(p, Policy::SRPT, o);
  ASSERT_EQ(r.riemann_relevant_work.size(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    EXPECT_NEAR(r.riemann_relevant_work[i], r.relevant_work[i].mean, 1e-3 * r.relevant_work[i].mean) << xs[i];
}

TEST(Sim, BarResidualVanishes) {
  for (int k : {2, 3, 4})
    for (Family f : {Family::U, Family::V}) {
      const auto p = SystemParams::from_load(k, 0.7, Distribution::uniform_mean_scv(1, 0.1));
      const auto e = measure_bar_residual(p, f, opts(1'000'000, 29));
      EXPECT_LE(std::abs(e.mean), 3 * e.ci) << k << " " << (f == Family::U ? "u" : "v");
      EXPECT_GT(e.ci, 0);
    }
  EXPECT_THROW(measure_bar_residual(SystemParams(2, 0.5, Distribution::exponential(1)), Family::L, opts(1000)),
               std::invalid_argument);
}

TEST(Sim, Reproducible) {
  const auto p = SystemParams::from_load(3, 0.8, Distribution::hyperexp2_mean_scv(1, 3));
  const auto a = simulate_mgk(p, Policy::SRPT, opts(50'000, 99, {1.0}));
  const auto b = simulate_mgk(p, Policy::SRPT, opts(50'000, 99, {1.0}));
  const auto c = simulate_mgk(p, Policy::SRPT, opts(50'000, 100, {1.0}));
  EXPECT_EQ(a.response_time.mean, b.response_time.mean);
  EXPECT_EQ(a.response_time.ci, b.response_time.ci);
  EXPECT_EQ(a.relevant_work[0].mean, b.relevant_work[0].mean);
  EXPECT_NE(a.response_time.mean, c.response_time.mean);
}

TEST(Sim, RejectsBadBatchPlan) {
  const SystemParams p(2, 0.5, Distribution::exponential(1));
  auto o = opts(10);
  o.batches = 20;
  EXPECT_THROW(simulate_mgk(p, Policy::SRPT, o), std::invalid_argument);
  o.batches = 1;
  EXPECT_THROW(simulate_isq(p, o), std::invalid_argument);
}
