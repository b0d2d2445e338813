#include <gtest/gtest.h>

#include <cmath>

#include "isqbound/wine.hpp"

using namespace isqbound;
using boost::math::quadrature::gauss_kronrod;

namespace {

const BoundEngine& engine(int k) {
  static std::map<int, std::unique_ptr<BoundEngine>> cache;
  auto& e = cache[k];
  if (!e) e = std::make_unique<BoundEngine>(k);
  return *e;
}

std::vector<Distribution> families() {
  return {Distribution::exponential(1), Distribution::deterministic(1), Distribution::uniform_mean_scv(1, 0.05),
          Distribution::hyperexp2_mean_scv(1, 5)};
}

// classical M/G/1-SRPT mean response time by nested quadrature
double srpt1_mean_response(const Distribution& d, double lam) {
  auto rho_t = [&](double t) { return lam * d.restricted_laplace_moment<double>(1, 0.0, t); };
  auto inner = [&](double x) {
    const double m2 = d.restricted_laplace_moment<double>(2, 0.0, x) + x * x * d.survival(x);
    const double r = rho_t(x);
    const double wait = lam * m2 / (2 * (1 - r) * (1 - r));
    const double resid = x > 0 ? gauss_kronrod<double, 31>::integrate([&](double t) { return 1 / (1 - rho_t(t)); }, 0.0,
                                                                      x, 10, 1e-13)
                               : 0.0;
    return (wait + resid) * d.pdf(x);
  };
  return gauss_kronrod<double, 31>::integrate(inner, 0.0, std::numeric_limits<double>::infinity(), 12, 1e-12);
}

}  // namespace

TEST(Wine, MginfIdentity) {
  for (int k : {1, 2, 5})
    for (const auto& d : families()) {
      const auto p = SystemParams::from_load(k, 0.6, d);
      const auto r = wine_integrate(engine(k), p, {Curve::MGINF});
      EXPECT_NEAR(r.value, k * d.mean(), 1e-6) << k << " " << d.label();
      EXPECT_LE(r.abs_error_estimate, 1e-6);
    }
  const auto p = SystemParams(2, 0.5, Distribution::exponential(1));
  EXPECT_NEAR(wine_integrate(engine(2), p, {Curve::MGINF}).value, 2.0, 1e-6);
}

TEST(Wine, SingleServerSrptMatchesClassicalFormula) {
  for (const auto& d : {Distribution::exponential(1), Distribution::hyperexp2_mean_scv(1, 3)})
    for (double rho : {0.5, 0.8}) {
      const auto p = SystemParams::from_load(1, rho, d);
      const double want = srpt1_mean_response(d, p.lambda);
      EXPECT_NEAR(wine_integrate(engine(1), p, {Curve::SRPT1}).value, want, 1e-6) << d.label() << " " << rho;
    }
}

TEST(Wine, LightTrafficLimit) {
  for (int k : {2, 3}) {
    const auto p = SystemParams(k, 1e-6, Distribution::exponential(1));
    EXPECT_NEAR(wine_integrate(engine(k), p, CurveSet::mixex()).value, k, 1e-4);
  }
}

TEST(Wine, SuiteIsOrderedAndBeatsNaive) {
  const auto p = SystemParams(2, 0.9, Distribution::exponential(1));
  const auto s = bound_suite(engine(2), p);
  EXPECT_LE(s.mixex.value, s.isq.value + s.isq.abs_error_estimate + s.mixex.abs_error_estimate);
  EXPECT_LE(s.isq.value, s.isq_recycling.value + s.isq.abs_error_estimate + s.isq_recycling.abs_error_estimate);
  EXPECT_GT(s.mixex.value, s.naive() + 1e-3);
  const auto mid = bound_suite(engine(2), SystemParams(2, 0.5, Distribution::exponential(1)));
  EXPECT_LE(mid.mixex.value, mid.isq.value + 2e-6);
  EXPECT_LE(mid.isq.value, mid.isq_recycling.value + 2e-6);
}

TEST(Wine, AddingFamiliesNeverDecreasesTheBound) {
  for (int k : {2, 3})
    for (const auto& d : {Distribution::uniform_mean_scv(1, 0.05), Distribution::hyperexp2_mean_scv(1, 2)}) {
      const auto p = SystemParams::from_load(k, 0.85, d);
      double prev = 0, prev_err = 0;
      for (CurveSet s : {CurveSet{Curve::MGINF}, CurveSet::mixex(), CurveSet::isq(), CurveSet::isq_recycling()}) {
        const auto r = wine_integrate(engine(k), p, s);
        EXPECT_GE(r.value + r.abs_error_estimate + prev_err, prev) << s.label();
        prev = r.value;
        prev_err = r.abs_error_estimate;
      }
    }
}

TEST(Wine, TailAndRefinementAreWithinTheErrorEstimate) {
  const auto p = SystemParams(3, 0.7 / 1.0, Distribution::hyperexp2_mean_scv(1, 3));
  WineOptions base;
  const auto r = wine_integrate(engine(3), p, CurveSet::isq_recycling(), base);
  WineOptions longer = base;
  longer.x_max_factor = 2;
  const auto r2 = wine_integrate(engine(3), p, CurveSet::isq_recycling(), longer);
  EXPECT_GT(r2.x_max, r.x_max);
  EXPECT_LE(std::abs(r2.value - r.value), r.abs_error_estimate + r2.abs_error_estimate);
  WineOptions finer = base;
  finer.tol = base.tol / 2;
  const auto r3 = wine_integrate(engine(3), p, CurveSet::isq_recycling(), finer);
  EXPECT_LE(std::abs(r3.value - r.value), r.abs_error_estimate + 1e-12);
}

TEST(Wine, BreakdownAndNoNonFiniteValues) {
  const auto p = SystemParams(2, 0.8, Distribution::deterministic(1));
  const auto r = wine_integrate(engine(2), p, CurveSet::isq_recycling());
  ASSERT_GE(r.breakdown.size(), 3u);
  EXPECT_EQ(r.breakdown.front().kind, "head");
  EXPECT_EQ(r.breakdown.back().kind, "tail");
  double sum = 0;
  for (const auto& s : r.breakdown) {
    EXPECT_TRUE(std::isfinite(s.contribution));
    EXPECT_GE(s.contribution, 0);
    sum += s.contribution;
  }
  EXPECT_NEAR(sum, r.value, 1e-12);
  // the deterministic breakpoint is a panel boundary
  bool cut_at_one = false;
  for (const auto& s : r.breakdown) cut_at_one |= std::abs(s.x_hi - 1.0) < 1e-12;
  EXPECT_TRUE(cut_at_one);
}

TEST(Wine, ReportsBudgetFailureWithBreakdown) {
  const auto p = SystemParams(2, 0.8, Distribution::exponential(1));
  WineOptions opt;
  opt.tol = 1e-30;
  try {
    wine_integrate(engine(2), p, CurveSet::mixex(), opt);
    FAIL() << "expected WineError";
  } catch (const WineError& e) {
    EXPECT_FALSE(e.partial().breakdown.empty());
    EXPECT_NE(std::string(e.what()).find("srpt1+mginf"), std::string::npos);
  }
  EXPECT_THROW(wine_integrate(engine(2), p, CurveSet{}), std::invalid_argument);
}
