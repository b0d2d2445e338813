#pragma once

#include <boost/math/tools/minima.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "isqbound/dist.hpp"
#include "isqbound/symexpr.hpp"

namespace isqbound {

struct SystemParams {
  int k;
  double lambda;
  Distribution dist;

  SystemParams(int servers, double arrival_rate, Distribution d) : k(servers), lambda(arrival_rate), dist(std::move(d)) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
    if (!(rho() < 1)) throw std::invalid_argument("unstable system: rho = " + std::to_string(rho()) + " >= 1");
  }
  static SystemParams from_load(int servers, double load, const Distribution& d) {
    return SystemParams(servers, load / d.mean(), d);
  }

  double rho() const { return lambda * dist.mean(); }
};

enum class Curve { SRPT1 = 0, MGINF = 1, SEP_ISQ = 2, REC_ISQ_L = 3 };

inline constexpr std::array<Curve, 4> all_curves = {Curve::SRPT1, Curve::MGINF, Curve::SEP_ISQ, Curve::REC_ISQ_L};

inline std::string to_string(Curve c) {
  switch (c) {
    case Curve::SRPT1: return "srpt1";
    case Curve::MGINF: return "mginf";
    case Curve::SEP_ISQ: return "sep_isq";
    case Curve::REC_ISQ_L: return "rec_isq_l";
  }
  return "?";
}

class CurveSet {
 public:
  CurveSet() = default;
  CurveSet(std::initializer_list<Curve> cs) {
    for (Curve c : cs) bits_ |= bit(c);
  }

  bool has(Curve c) const { return bits_ & bit(c); }
  bool empty() const { return bits_ == 0; }
  CurveSet with(Curve c) const {
    CurveSet s = *this;
    s.bits_ |= bit(c);
    return s;
  }
  std::vector<Curve> members() const {
    std::vector<Curve> out;
    for (Curve c : all_curves)
      if (has(c)) out.push_back(c);
    return out;
  }
  std::string label() const {
    std::string s;
    for (Curve c : members()) s += (s.empty() ? "" : "+") + to_string(c);
    return s;
  }
  friend bool operator==(CurveSet a, CurveSet b) { return a.bits_ == b.bits_; }

  static CurveSet mixex() { return {Curve::SRPT1, Curve::MGINF}; }
  static CurveSet isq() { return mixex().with(Curve::SEP_ISQ); }
  static CurveSet isq_recycling() { return isq().with(Curve::REC_ISQ_L); }

 private:
  static unsigned bit(Curve c) { return 1u << static_cast<int>(c); }
  unsigned bits_ = 0;
};

// (lambda/2) E[min(S,x)^2] / (1 - rho_x)
inline double srpt1_relevant_work(const SystemParams& p, double x) {
  if (!(x > 0)) return 0.0;
  const Truncation t(p.dist, x);
  const double rho_x = p.lambda * t.truncated_moment(1);
  return 0.5 * p.lambda * t.capped_moment(2) / (1 - rho_x);
}

// (k lambda/2) E[min(S,x)^2]
inline double mginf_relevant_work(const SystemParams& p, double x) {
  if (!(x > 0)) return 0.0;
  return 0.5 * p.k * p.lambda * Truncation(p.dist, x).capped_moment(2);
}

namespace detail {

// S_x with the normalizing mass cached in both precisions
struct TruncatedLaw {
  const Distribution* base;
  double x;
  quad mass_q;
  long double mass_ld;

  TruncatedLaw(const Distribution& d, double threshold) : base(&d), x(threshold) {
    mass_q = d.restricted_laplace_moment<quad>(0, quad(0), quad(threshold));
    mass_ld = static_cast<long double>(mass_q);
  }

  template <class Real = double>
  Real laplace_moment(int j, Real s) const {
    const Real m = base->restricted_laplace_moment<Real>(j, s, Real(x));
    if constexpr (std::is_same_v<Real, quad>) return m / mass_q;
    else return m / static_cast<Real>(mass_ld);
  }
};

// Taylor coefficients in w of the offsets f_1..f_{k-1} for a system whose sizes never exceed
// the truncation threshold; mom[j] = E[S^j]. Used where the closed forms lose digits to cancellation.
inline std::vector<std::vector<long double>> series_family(int k, Family family, long double lam,
                                                           const std::vector<long double>& mom, long double c) {
  const int n_max = static_cast<int>(mom.size()) - 1;
  std::vector<std::vector<long double>> f(k + 1, std::vector<long double>(n_max + 1, 0.0L));
  std::vector<std::vector<long double>> binom(n_max + 1, std::vector<long double>(n_max + 1, 0.0L));
  for (int m = 0; m <= n_max; ++m) {
    binom[m][0] = 1;
    for (int n = 1; n <= m; ++n) binom[m][n] = binom[m - 1][n - 1] + (n <= m - 1 ? binom[m - 1][n] : 0.0L);
  }
  for (int q = k - 1; q >= 1; --q) {
    const long double alpha = static_cast<long double>(k) / q;
    std::vector<long double> b(n_max + 1, 0.0L);
    for (int n = 0; n <= n_max; ++n) {
      long double shifted = 0;  // y^n coefficient of E[f_{q+1}(S + y)]
      for (int m = n; m <= n_max; ++m) shifted += f[q + 1][m] * binom[m][n] * mom[m - n];
      b[n] = k * lam * shifted / q;
    }
    if (family == Family::U) b[0] += static_cast<long double>(k - q) / q;
    else b[1] += 2.0L * (k - q) / q;
    if (family == Family::L) b[0] += static_cast<long double>(k) * (q - k) * c / q;
    auto& out = f[q];
    out[0] = 0;
    for (int n = 0; n < n_max; ++n) out[n + 1] = (b[n] - alpha * lam * out[n]) / (n + 1);
  }
  return f;
}

inline long double horner(const std::vector<long double>& c, long double w) {
  long double acc = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * w + *it;
  return acc;
}

inline long double series_expectation(const std::vector<long double>& c, const std::vector<long double>& mom) {
  long double acc = 0;
  for (std::size_t n = 0; n < c.size(); ++n) acc += c[n] * mom[n];
  return acc;
}

inline Compiled<long double> narrow(const Compiled<quad>& c) {
  Compiled<long double> out;
  for (const auto& p : c.pieces)
    out.pieces.push_back({static_cast<long double>(p.coef), p.w_pow, static_cast<long double>(p.decay)});
  return out;
}

}  // namespace detail

// per-threshold quantities of the truncated ISQ-k subsystem fed by jobs of size <= x
struct TruncatedIsq {
  double x = 0;
  double mass = 0;       // F_S(x)
  double lam_x = 0;      // lambda F_S(x)
  double lam_tail = 0;   // lambda (1 - F_S(x))
  double rho_x = 0;      // lambda E[S 1{S <= x}]
  double rho_xbar = 0;   // lambda E[min(S, x)]
  double work_m2 = 0;    // lambda E[S^2 1{S <= x}] = lambda_x E[S_x^2]
  double eu1 = 0;        // E[u_1(S_x)]
  double ev1 = 0;        // E[v_1(S_x)]
  double ck = 0;
  bool series = false;   // evaluated through the Taylor path
  bool empty() const { return !(mass > 0); }

  // lambda_x E[v_1]/(2 + 2 lambda_x E[u_1])
  double isq_excess() const { return empty() ? 0.0 : lam_x * ev1 / (2 + 2 * lam_x * eu1); }
  double base_work() const { return 0.5 * work_m2 / (1 - rho_x); }
};

struct JumpResult {
  double value = 0;
  std::vector<double> branch_inf;  // index q = speed q/k; branch k-1 jumps to full speed
  int argmin_branch = -1;          // -1 when the x^2 cap is active
  bool assumed = false;
};

struct CurveValues {
  std::array<double, 4> v{};
  std::array<bool, 4> set{};

  double operator[](Curve c) const { return v[static_cast<int>(c)]; }
  void put(Curve c, double value) {
    v[static_cast<int>(c)] = value;
    set[static_cast<int>(c)] = true;
  }
};

struct BestValue {
  double value = 0;
  Curve argmax = Curve::MGINF;
};

// Relevant-work curves for a fixed k. Holds the symbolic test functions; all queries are const.
class BoundEngine {
 public:
  struct Options {
    bool assume_jump_conjecture = false;
    double series_threshold = 0.05;  // switch to the Taylor path when k lambda_x x is below this
    int series_order = 40;
    int jump_starts = 8;
    BuildOptions build{};
  };

  explicit BoundEngine(int k) : BoundEngine(k, Options{}) {}
  BoundEngine(int k, Options opt) : k_(k), opt_(opt) {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (k >= 2) {
      const UV uv = build_uv(k, opt.build);
      const TestFunctions l = build_l(k, opt.build);
      u1_ = Skeleton<quad>(uv.u[1]);
      v1_ = Skeleton<quad>(uv.v[1]);
      for (int q = 1; q < k; ++q) ell_.emplace_back(l[q]);
    }
  }

  int k() const { return k_; }
  const Options& options() const { return opt_; }

  // lambda E[S^2]/(2(1-rho)) + lambda E[v_1(S)]/(2 + 2 lambda E[u_1(S)])
  double isq_total_work(const SystemParams& p) const {
    check(p);
    const double base = 0.5 * p.lambda * p.dist.laplace_moment<double>(2, 0.0) / (1 - p.rho());
    if (k_ == 1) return base;
    const quad lam = p.lambda;
    const quad eu = u1_.compile(p.dist, lam).expectation(p.dist);
    const quad ev = v1_.compile(p.dist, lam).expectation(p.dist);
    return base + static_cast<double>(lam * ev / (2 + 2 * lam * eu));
  }

  // (1 - rho)/(1 + lambda E[u_1(S)])
  double idle_probability(const SystemParams& p) const {
    check(p);
    if (k_ == 1) return 1 - p.rho();
    const quad lam = p.lambda;
    const quad eu = u1_.compile(p.dist, lam).expectation(p.dist);
    return static_cast<double>((1 - quad(p.rho())) / (1 + lam * eu));
  }

  TruncatedIsq truncated(const SystemParams& p, double x) const {
    check(p);
    if (!(x > 0)) throw std::domain_error("threshold must be positive");
    TruncatedIsq t;
    t.x = x;
    const Truncation tr(p.dist, x);
    t.mass = tr.mass();
    t.lam_tail = p.lambda * p.dist.survival(x);
    t.rho_xbar = p.lambda * tr.capped_moment(1);
    if (t.empty()) return t;
    t.lam_x = p.lambda * t.mass;
    t.rho_x = p.lambda * tr.truncated_moment(1);
    t.work_m2 = p.lambda * tr.truncated_moment(2);
    if (k_ == 1) return t;
    const detail::TruncatedLaw law(p.dist, x);
    t.series = k_ * t.lam_x * x <= opt_.series_threshold;
    if (t.series) {
      const auto mom = moments(law);
      const auto u = detail::series_family(k_, Family::U, t.lam_x, mom, 0);
      const auto v = detail::series_family(k_, Family::V, t.lam_x, mom, 0);
      t.eu1 = static_cast<double>(detail::series_expectation(u[1], mom));
      t.ev1 = static_cast<double>(detail::series_expectation(v[1], mom));
    } else {
      const quad lam = t.lam_x;
      t.eu1 = static_cast<double>(u1_.compile(law, lam).expectation(law));
      t.ev1 = static_cast<double>(v1_.compile(law, lam).expectation(law));
    }
    t.ck = 2.0 / k_ * t.isq_excess();
    return t;
  }

  double c_k(const SystemParams& p, double x) const { return truncated(p, x).ck; }

  // truncated ISQ-k total work plus the M/G/infinity work of the large jobs
  double sep_isq_relevant_work(const SystemParams& p, double x) const { return sep_from(truncated(p, x)); }

  JumpResult jump(const SystemParams& p, double x) const { return jump_from(p, truncated(p, x)); }
  double jump_lower_bound(const SystemParams& p, double x) const { return jump(p, x).value; }

  double rec_isq_relevant_work_lb(const SystemParams& p, double x) const {
    const TruncatedIsq t = truncated(p, x);
    return rec_from(t, jump_from(p, t).value);
  }

  CurveValues curves(const SystemParams& p, double x, CurveSet which) const {
    CurveValues out;
    if (which.has(Curve::SRPT1)) out.put(Curve::SRPT1, srpt1_relevant_work(p, x));
    if (which.has(Curve::MGINF)) out.put(Curve::MGINF, mginf_relevant_work(p, x));
    if (which.has(Curve::SEP_ISQ) || which.has(Curve::REC_ISQ_L)) {
      const TruncatedIsq t = truncated(p, x);
      if (which.has(Curve::SEP_ISQ)) out.put(Curve::SEP_ISQ, sep_from(t));
      if (which.has(Curve::REC_ISQ_L)) out.put(Curve::REC_ISQ_L, t.empty() ? sep_from(t) : rec_from(t, jump_from(p, t).value));
    }
    return out;
  }

  BestValue best_relevant_work(const SystemParams& p, double x, CurveSet which) const {
    if (which.empty()) throw std::invalid_argument("best_relevant_work: empty curve set");
    const CurveValues cv = curves(p, x, which);
    BestValue b{-std::numeric_limits<double>::infinity(), Curve::MGINF};
    for (Curve c : which.members())
      if (cv[c] > b.value) b.value = cv[c];
    // curves that agree to rounding (e.g. Sep and M/G/infinity below the support) keep the first-listed argmax
    for (Curve c : which.members())
      if (cv[c] >= b.value - 1e-12 * std::abs(b.value)) {
        b.argmax = c;
        break;
      }
    return b;
  }

  // value of each curve as x -> infinity
  double curve_limit(const SystemParams& p, Curve c) const {
    const double m2 = p.dist.laplace_moment<double>(2, 0.0);
    switch (c) {
      case Curve::SRPT1: return 0.5 * p.lambda * m2 / (1 - p.rho());
      case Curve::MGINF: return 0.5 * p.k * p.lambda * m2;
      case Curve::SEP_ISQ:
      case Curve::REC_ISQ_L: return isq_total_work(p);
    }
    return 0;
  }

 private:
  void check(const SystemParams& p) const {
    if (p.k != k_)
      throw std::invalid_argument("engine built for k = " + std::to_string(k_) + " used with k = " + std::to_string(p.k));
  }

  std::vector<long double> moments(const detail::TruncatedLaw& law) const {
    std::vector<long double> mom(opt_.series_order + 1);
    for (int j = 0; j <= opt_.series_order; ++j) mom[j] = law.laplace_moment<long double>(j, 0.0L);
    return mom;
  }

  double sep_from(const TruncatedIsq& t) const {
    const double tail = 0.5 * k_ * t.lam_tail * t.x * t.x;
    if (t.empty()) return tail;
    return t.base_work() + t.isq_excess() + tail;
  }

  double rec_from(const TruncatedIsq& t, double jx) const {
    if (t.empty()) return sep_from(t);
    return t.base_work() + t.isq_excess() * (1 - t.rho_xbar) / (1 - t.rho_x) +
           t.lam_tail * jx / (2 * (1 - t.rho_x));
  }

  JumpResult jump_from(const SystemParams& p, const TruncatedIsq& t) const {
    const double x = t.x;
    const double x2 = x * x;
    JumpResult r;
    r.value = x2;
    // proven for k <= 2; for larger k only under the conjecture flag
    if (k_ <= 2 || opt_.assume_jump_conjecture || t.empty()) {
      r.assumed = k_ > 2;
      return r;
    }
    // ell[q] for q = 1..k-1, ell[k] = 0
    std::vector<std::function<long double(long double)>> ell(k_ + 1);
    ell[k_] = [](long double) { return 0.0L; };
    if (t.series) {
      const detail::TruncatedLaw law(p.dist, x);
      const auto fam = detail::series_family(k_, Family::L, t.lam_x, moments(law), t.ck);
      for (int q = 1; q < k_; ++q) ell[q] = [c = fam[q]](long double w) { return detail::horner(c, w); };
    } else {
      const detail::TruncatedLaw law(p.dist, x);
      for (int q = 1; q < k_; ++q) {
        auto c = std::make_shared<Compiled<long double>>(detail::narrow(ell_[q - 1].compile(law, quad(t.lam_x), quad(t.ck))));
        ell[q] = [c](long double w) { return (*c)(w); };
      }
    }
    const long double xl = x;
    r.branch_inf.assign(k_, 0.0);
    r.branch_inf[0] = static_cast<double>(xl * xl + ell[1](xl));
    for (int q = 1; q < k_; ++q) {
      auto phi = [&](long double w) {
        return (w + xl) * (w + xl) + ell[q + 1](w + xl) - w * w - ell[q](w);
      };
      r.branch_inf[q] = static_cast<double>(minimize(phi, 0.0L, q * xl, q, x));
    }
    for (int q = 0; q < k_; ++q)
      if (r.branch_inf[q] < r.value) {
        r.value = r.branch_inf[q];
        r.argmin_branch = q;
      }
    return r;
  }

  template <class F>
  long double minimize(F& f, long double a, long double b, int branch, double x) const {
    long double best = std::min(f(a), f(b));
    const int starts = std::max(1, opt_.jump_starts);
    const long double h = (b - a) / starts;
    const std::uintmax_t cap = 200;
    for (int s = 0; s < starts; ++s) {
      const long double lo = a + s * h, hi = (s + 1 == starts) ? b : a + (s + 1) * h;
      std::uintmax_t iters = cap;
      const auto res = boost::math::tools::brent_find_minima(f, lo, hi, 32, iters);
      if (iters >= cap)
        throw std::runtime_error("J_x minimizer did not converge: k = " + std::to_string(k_) + ", x = " +
                                 std::to_string(x) + ", branch q = " + std::to_string(branch) + ", interval [" +
                                 std::to_string(static_cast<double>(lo)) + ", " +
                                 std::to_string(static_cast<double>(hi)) + "]");
      best = std::min({best, res.second, f(hi)});
    }
    return best;
  }

  int k_;
  Options opt_;
  Skeleton<quad> u1_, v1_;
  std::vector<Skeleton<quad>> ell_;  // ell_[q-1] = l_q
};

}  // namespace isqbound
