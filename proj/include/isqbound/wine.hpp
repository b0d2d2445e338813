#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isqbound/bounds.hpp"

namespace isqbound {

struct WineOptions {
  double tol = 1e-6;            // absolute, in time units
  double head_fraction = 1e-8;  // the head [0, x_lo] starts at this multiple of E[S]
  double tail_mass = 1e-10;     // x_max is at least the (1 - tail_mass) quantile
  int scan_points = 160;        // coarse grid used to locate family switches
  int max_switches = 64;
  std::size_t max_splits = 4000;
  double x_max_factor = 1;  // stretches the analytic-tail cutoff
};

struct WineSegment {
  std::string kind;  // head, body or tail
  double x_lo = 0, x_hi = 0;
  Curve dominant = Curve::MGINF;
  double contribution = 0;  // already divided by lambda
  double error = 0;
};

struct WineResult {
  double value = 0;
  double abs_error_estimate = 0;
  std::vector<WineSegment> breakdown;
  CurveSet families;
  double x_lo = 0, x_max = 0;
  std::size_t evaluations = 0;
};

class WineError : public std::runtime_error {
 public:
  WineError(const std::string& what, WineResult partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const WineResult& partial() const { return partial_; }

 private:
  WineResult partial_;
};

namespace detail {

inline double wine_x_max(const SystemParams& p, const WineOptions& opt) {
  const double hi = p.dist.support_upper();
  if (std::isfinite(hi)) return hi * opt.x_max_factor;
  double x = p.dist.inverse_survival(opt.tail_mass);
  // the large-job work lambda (1 - F(x)) x^2 must be negligible against the budget
  while (p.dist.survival(x) * x * x >= opt.tol / 10) x *= 1.5;
  return x * opt.x_max_factor;
}

}  // namespace detail

// E[T] >= (1/lambda) int_0^inf max_{c in families} W_c(x) / x^2 dx, integrated on t = ln x
inline WineResult wine_integrate(const BoundEngine& eng, const SystemParams& p, CurveSet families,
                                 const WineOptions& opt = {}) {
  if (families.empty()) throw std::invalid_argument("wine_integrate: empty curve set");
  if (!(opt.tol > 0)) throw std::invalid_argument("wine_integrate: tol must be positive");
  WineResult res;
  res.families = families;
  const double scale = p.dist.mean();
  res.x_lo = opt.head_fraction * scale;
  res.x_max = detail::wine_x_max(p, opt);
  const double inv_lam = 1.0 / p.lambda;

  auto best = [&](double x) {
    ++res.evaluations;
    return eng.best_relevant_work(p, x, families);
  };
  // integrand on the log axis: best(x)/x^2 * dx/dt = best(x)/x
  auto g = [&](double t) {
    const double x = std::exp(t);
    return best(x).value / x;
  };

  // head: best(x)/x^2 is nearly constant on [0, x_lo]
  {
    const double x0 = res.x_lo;
    const double phi0 = best(x0).value / (x0 * x0);
    const double phi1 = best(0.1 * x0).value / (0.01 * x0 * x0);
    WineSegment s{"head", 0.0, x0, best(x0).argmax, phi0 * x0 * inv_lam, std::abs(phi0 - phi1) * x0 * inv_lam};
    res.breakdown.push_back(s);
  }

  // panel boundaries: distribution breakpoints plus located family switches
  const double t_lo = std::log(res.x_lo), t_hi = std::log(res.x_max);
  std::vector<double> cuts = {t_lo, t_hi};
  for (double b : p.dist.breakpoints())
    if (b > res.x_lo && b < res.x_max) cuts.push_back(std::log(b));
  std::sort(cuts.begin(), cuts.end());
  if (families.members().size() > 1) {
    std::vector<double> found;
    const int n = std::max(8, opt.scan_points);
    double tp = t_lo;
    Curve cp = best(std::exp(tp)).argmax;
    for (int i = 1; i <= n && static_cast<int>(found.size()) < opt.max_switches; ++i) {
      const double t = t_lo + (t_hi - t_lo) * i / n;
      const Curve c = best(std::exp(t)).argmax;
      if (c != cp) {
        double a = tp, b = t;
        for (int it = 0; it < 60 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
          const double m = 0.5 * (a + b);
          (best(std::exp(m)).argmax == cp ? a : b) = m;
        }
        found.push_back(0.5 * (a + b));
      }
      tp = t;
      cp = c;
    }
    cuts.insert(cuts.end(), found.begin(), found.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return b - a < 1e-13; }), cuts.end());
  }

  // globally adaptive Gauss-Kronrod: split the panel with the largest error until the body meets its share of the budget
  struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto panel = [&](double a, double b) {
    double err = 0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(g, a, b, 0, 0.0, &err);
    return Panel{a, b, v, err};
  };
  std::priority_queue<Panel> heap;
  double body = 0, body_err = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const Panel pn = panel(cuts[i], cuts[i + 1]);
    body += pn.value;
    body_err += pn.error;
    heap.push(pn);
  }
  const double target = 0.5 * opt.tol * p.lambda;
  std::size_t splits = 0;
  while (body_err > std::max(target, 1e-15 * std::abs(body)) && splits < opt.max_splits) {
    const Panel worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    const Panel l = panel(worst.a, m), r = panel(m, worst.b);
    body += l.value + r.value - worst.value;
    body_err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++splits;
  }
  // report per original segment
  std::vector<Panel> done;
  while (!heap.empty()) {
    done.push_back(heap.top());
    heap.pop();
  }
  std::sort(done.begin(), done.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  std::size_t j = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double v = 0, e = 0;
    for (; j < done.size() && done[j].a < cuts[i + 1]; ++j) {
      v += done[j].value;
      e += done[j].error;
    }
    const Curve dom = best(std::exp(0.5 * (cuts[i] + cuts[i + 1]))).argmax;
    res.breakdown.push_back({"body", std::exp(cuts[i]), std::exp(cuts[i + 1]), dom, v * inv_lam, e * inv_lam});
  }

  // tail: every curve is within its x -> infinity limit C beyond x_max, and int_{x_max}^inf C/x^2 = C/x_max
  {
    double c_inf = 0;
    for (Curve c : families.members()) c_inf = std::max(c_inf, eng.curve_limit(p, c));
    const auto at = best(res.x_max);
    WineSegment s{"tail", res.x_max, std::numeric_limits<double>::infinity(), at.argmax, c_inf / res.x_max * inv_lam,
                  std::abs(c_inf - at.value) / res.x_max * inv_lam};
    res.breakdown.push_back(s);
  }

  for (const auto& s : res.breakdown) {
    res.value += s.contribution;
    res.abs_error_estimate += s.error;
  }
  if (!(res.abs_error_estimate <= opt.tol) || !std::isfinite(res.value)) {
    std::ostringstream os;
    os << "WINE integration missed its budget for " << families.label() << ": error estimate "
       << res.abs_error_estimate << " > tol " << opt.tol << " (";
    for (const auto& s : res.breakdown) os << s.kind << "[" << s.x_lo << "," << s.x_hi << "]=" << s.error << " ";
    os << ")";
    throw WineError(os.str(), res);
  }
  return res;
}

struct BoundSuite {
  WineResult srpt1_only, mginf_only, mixex, isq, isq_recycling;

  // the prior lower bound: the larger of the two single-family bounds
  double naive() const { return std::max(srpt1_only.value, mginf_only.value); }
};

inline BoundSuite bound_suite(const BoundEngine& eng, const SystemParams& p, const WineOptions& opt = {}) {
  BoundSuite s;
  s.srpt1_only = wine_integrate(eng, p, {Curve::SRPT1}, opt);
  s.mginf_only = wine_integrate(eng, p, {Curve::MGINF}, opt);
  s.mixex = wine_integrate(eng, p, CurveSet::mixex(), opt);
  s.isq = wine_integrate(eng, p, CurveSet::isq(), opt);
  s.isq_recycling = wine_integrate(eng, p, CurveSet::isq_recycling(), opt);
  return s;
}

}  // namespace isqbound
