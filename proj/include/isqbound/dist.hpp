#pragma once

#include <boost/math/tools/roots.hpp>
#include <boost/multiprecision/float128.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace isqbound {

using quad = boost::multiprecision::float128;

namespace detail {

template <class Real>
Real ipow(Real base, int n) {
  Real r = 1;
  for (int i = 0; i < n; ++i) r *= base;
  return r;
}

inline double binomial(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// int_0^h t^j e^{-a t} dt, a >= 0, 0 <= h < inf
template <class Real>
Real power_exp_integral(int j, Real a, Real h) {
  using std::exp;
  if (!(h > 0)) return Real(0);
  const Real z = a * h;
  const Real hp = ipow(h, j + 1);
  if (!(z > 0)) return hp / (j + 1);
  if (z < Real(30 + j)) {
    // positive-term series: h^{j+1} e^{-z} sum_n z^n / ((j+1)(j+2)...(j+1+n))
    const Real eps = std::numeric_limits<Real>::epsilon();
    Real term = Real(1) / (j + 1);
    Real sum = term;
    for (int n = 1; n < 4000; ++n) {
      term *= z / (j + 1 + n);
      sum += term;
      if (term < sum * eps) break;
    }
    return hp * exp(-z) * sum;
  }
  Real t = 1, s = 1, fact = 1;
  for (int i = 1; i <= j; ++i) {
    t *= z / i;
    s += t;
    fact *= i;
  }
  return fact / ipow(a, j + 1) * (1 - exp(-z) * s);
}

// int_0^inf t^j e^{-a t} dt, a > 0
template <class Real>
Real power_exp_integral_full(int j, Real a) {
  Real fact = 1;
  for (int i = 2; i <= j; ++i) fact *= i;
  return fact / ipow(a, j + 1);
}

}  // namespace detail

struct Exponential {
  double rate;
};
struct Deterministic {
  double value;
};
struct Uniform {
  double lo, hi;
};
struct HyperExp2 {
  double p, rate1, rate2;
};

class Distribution {
 public:
  using Law = std::variant<Exponential, Deterministic, Uniform, HyperExp2>;

  static Distribution exponential(double rate) {
    if (!(rate > 0) || !std::isfinite(rate)) throw std::invalid_argument("exp: rate must be positive");
    return Distribution(Exponential{rate}, "exp(rate=" + fmt(rate) + ")");
  }
  static Distribution deterministic(double value) {
    if (!(value > 0) || !std::isfinite(value)) throw std::invalid_argument("det: value must be positive");
    return Distribution(Deterministic{value}, "det(" + fmt(value) + ")");
  }
  static Distribution uniform(double lo, double hi) {
    if (!(lo >= 0) || !(hi > lo) || !std::isfinite(hi)) throw std::invalid_argument("uniform: need 0 <= lo < hi");
    return Distribution(Uniform{lo, hi}, "uniform(" + fmt(lo) + "," + fmt(hi) + ")");
  }
  // uniform law with given mean and squared coefficient of variation (scv <= 1/3)
  static Distribution uniform_mean_scv(double mean, double scv) {
    if (!(mean > 0) || !(scv > 0) || scv > 1.0 / 3.0 + 1e-15)
      throw std::invalid_argument("uniform: need mean > 0 and 0 < scv <= 1/3");
    const double half = 0.5 * mean * std::sqrt(12.0 * scv);
    Distribution d(Uniform{std::max(0.0, mean - half), mean + half}, "");
    d.label_ = "uniform(mean=" + fmt(mean) + ",scv=" + fmt(scv) + ")";
    return d;
  }
  static Distribution hyperexp2(double p, double rate1, double rate2) {
    if (!(p > 0 && p < 1)) throw std::invalid_argument("hyperexp2: need 0 < p < 1");
    if (!(rate1 > 0) || !(rate2 > 0)) throw std::invalid_argument("hyperexp2: rates must be positive");
    return Distribution(HyperExp2{p, rate1, rate2},
                        "hyperexp2(p=" + fmt(p) + ",rate1=" + fmt(rate1) + ",rate2=" + fmt(rate2) + ")");
  }
  // balanced branches: p/rate1 = (1-p)/rate2
  static Distribution hyperexp2_mean_scv(double mean, double scv) {
    if (!(mean > 0) || !(scv >= 1)) throw std::invalid_argument("hyperexp2: need mean > 0 and scv >= 1");
    const double p = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
    if (!(p < 1)) throw std::invalid_argument("hyperexp2: scv too large");
    Distribution d = hyperexp2(p, 2.0 * p / mean, 2.0 * (1.0 - p) / mean);
    d.label_ = "hyperexp2(mean=" + fmt(mean) + ",scv=" + fmt(scv) + ")";
    return d;
  }

  const Law& law() const { return law_; }
  const std::string& label() const { return label_; }
  std::string kind() const {
    return std::visit(
        [](const auto& l) -> std::string {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return "exp";
          else if constexpr (std::is_same_v<L, Deterministic>) return "det";
          else if constexpr (std::is_same_v<L, Uniform>) return "uniform";
          else return "hyperexp2";
        },
        law_);
  }

  // E[S^j e^{-sS} 1{S <= h}], j >= 0, s >= 0
  template <class Real = double>
  Real restricted_laplace_moment(int j, Real s, Real h) const {
    using detail::power_exp_integral;
    if (j < 0) throw std::domain_error("negative moment order");
    if (!(h > 0)) return Real(0);
    return std::visit(
        [&](const auto& l) -> Real {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) {
            const Real mu = l.rate;
            return mu * power_exp_integral<Real>(j, mu + s, h);
          } else if constexpr (std::is_same_v<L, Deterministic>) {
            using std::exp;
            const Real v = l.value;
            return v <= h ? detail::ipow(v, j) * exp(-s * v) : Real(0);
          } else if constexpr (std::is_same_v<L, Uniform>) {
            return uniform_piece<Real>(l, j, s, h);
          } else {
            const Real p = l.p, m1 = l.rate1, m2 = l.rate2;
            return p * m1 * power_exp_integral<Real>(j, m1 + s, h) +
                   (1 - p) * m2 * power_exp_integral<Real>(j, m2 + s, h);
          }
        },
        law_);
  }

  // E[S^j e^{-sS}]
  template <class Real = double>
  Real laplace_moment(int j, Real s) const {
    if (j < 0) throw std::domain_error("negative moment order");
    return std::visit(
        [&](const auto& l) -> Real {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) {
            const Real mu = l.rate;
            return mu * detail::power_exp_integral_full<Real>(j, mu + s);
          } else if constexpr (std::is_same_v<L, HyperExp2>) {
            const Real p = l.p, m1 = l.rate1, m2 = l.rate2;
            return p * m1 * detail::power_exp_integral_full<Real>(j, m1 + s) +
                   (1 - p) * m2 * detail::power_exp_integral_full<Real>(j, m2 + s);
          } else {
            return restricted_laplace_moment<Real>(j, s, Real(support_upper()));
          }
        },
        law_);
  }

  double moment(int j) const {
    if (j < 1 || j > 3) throw std::domain_error("moment: only orders 1..3 are supported, got " + std::to_string(j));
    return laplace_moment<double>(j, 0.0);
  }
  double mean() const { return laplace_moment<double>(1, 0.0); }
  double scv() const {
    const double m = mean();
    return laplace_moment<double>(2, 0.0) / (m * m) - 1.0;
  }
  double transform(double s) const {
    if (!(s >= 0)) throw std::domain_error("transform: s must be nonnegative");
    return laplace_moment<double>(0, s);
  }
  double mixed_moment(int j, double s) const {
    if (j < 0 || j > 3) throw std::domain_error("mixed_moment: only orders 0..3 are supported");
    if (!(s >= 0)) throw std::domain_error("mixed_moment: s must be nonnegative");
    return laplace_moment<double>(j, s);
  }

  double cdf(double x) const {
    if (!(x > 0)) return 0.0;
    return std::visit(
        [&](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return -std::expm1(-l.rate * x);
          else if constexpr (std::is_same_v<L, Deterministic>) return x >= l.value ? 1.0 : 0.0;
          else if constexpr (std::is_same_v<L, Uniform>) return std::clamp((x - l.lo) / (l.hi - l.lo), 0.0, 1.0);
          else return -l.p * std::expm1(-l.rate1 * x) - (1 - l.p) * std::expm1(-l.rate2 * x);
        },
        law_);
  }
  // P(S > x), accurate in the far tail
  double survival(double x) const {
    if (!(x > 0)) return 1.0;
    return std::visit(
        [&](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return std::exp(-l.rate * x);
          else if constexpr (std::is_same_v<L, Deterministic>) return x >= l.value ? 0.0 : 1.0;
          else if constexpr (std::is_same_v<L, Uniform>) return std::clamp((l.hi - x) / (l.hi - l.lo), 0.0, 1.0);
          else return l.p * std::exp(-l.rate1 * x) + (1 - l.p) * std::exp(-l.rate2 * x);
        },
        law_);
  }
  // density; the deterministic law has none
  double pdf(double x) const {
    if (x < 0) return 0.0;
    return std::visit(
        [&](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return l.rate * std::exp(-l.rate * x);
          else if constexpr (std::is_same_v<L, Deterministic>) throw std::domain_error("det has no density");
          else if constexpr (std::is_same_v<L, Uniform>) return (x >= l.lo && x <= l.hi) ? 1.0 / (l.hi - l.lo) : 0.0;
          else return l.p * l.rate1 * std::exp(-l.rate1 * x) + (1 - l.p) * l.rate2 * std::exp(-l.rate2 * x);
        },
        law_);
  }

  double support_lower() const {
    return std::visit(
        [](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Deterministic>) return l.value;
          else if constexpr (std::is_same_v<L, Uniform>) return l.lo;
          else return 0.0;
        },
        law_);
  }
  double support_upper() const {
    return std::visit(
        [](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Deterministic>) return l.value;
          else if constexpr (std::is_same_v<L, Uniform>) return l.hi;
          else return std::numeric_limits<double>::infinity();
        },
        law_);
  }
  // points where the law or its density is not smooth
  std::vector<double> breakpoints() const {
    return std::visit(
        [](const auto& l) -> std::vector<double> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Deterministic>) return {l.value};
          else if constexpr (std::is_same_v<L, Uniform>) {
            if (l.lo > 0) return {l.lo, l.hi};
            return {l.hi};
          } else return {};
        },
        law_);
  }

  // smallest x with P(S > x) <= tail
  double inverse_survival(double tail) const {
    if (!(tail > 0 && tail < 1)) throw std::domain_error("inverse_survival: tail must lie in (0,1)");
    return std::visit(
        [&](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return -std::log(tail) / l.rate;
          else if constexpr (std::is_same_v<L, Deterministic>) return l.value;
          else if constexpr (std::is_same_v<L, Uniform>) return l.hi - tail * (l.hi - l.lo);
          else {
            const double hi = -std::log(tail) / std::min(l.rate1, l.rate2);
            auto f = [&](double x) { return std::log(survival(x)) - std::log(tail); };
            std::uintmax_t iters = 200;
            auto r = boost::math::tools::toms748_solve(f, 0.0, hi, boost::math::tools::eps_tolerance<double>(50),
                                                       iters);
            return 0.5 * (r.first + r.second);
          }
        },
        law_);
  }
  double quantile(double prob) const {
    if (!(prob > 0 && prob < 1)) throw std::domain_error("quantile: probability must lie in (0,1)");
    if (const auto* e = std::get_if<Exponential>(&law_)) return -std::log1p(-prob) / e->rate;
    if (const auto* u = std::get_if<Uniform>(&law_)) return u->lo + prob * (u->hi - u->lo);
    if (const auto* h = std::get_if<HyperExp2>(&law_)) {
      auto f = [&](double x) { return cdf(x) - prob; };
      std::uintmax_t iters = 200;
      const double hi = -std::log1p(-prob) / std::min(h->rate1, h->rate2);
      auto r = boost::math::tools::toms748_solve(f, 0.0, hi, boost::math::tools::eps_tolerance<double>(50), iters);
      return 0.5 * (r.first + r.second);
    }
    return inverse_survival(1.0 - prob);
  }

  // inverse-CDF draws; the hyperexponential picks its branch first
  template <class Rng>
  double sample(Rng& rng) const {
    auto unit = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    return std::visit(
        [&](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Exponential>) return -std::log(unit()) / l.rate;
          else if constexpr (std::is_same_v<L, Deterministic>) return l.value;
          else if constexpr (std::is_same_v<L, Uniform>) return l.lo + (l.hi - l.lo) * unit();
          else {
            const double branch = unit();
            const double rate = branch < l.p ? l.rate1 : l.rate2;
            return -std::log(unit()) / rate;
          }
        },
        law_);
  }

 private:
  Distribution(Law law, std::string label) : law_(law), label_(std::move(label)) {}

  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  }

  // expands t^j around lo so every summand is nonnegative
  template <class Real>
  static Real uniform_piece(const Uniform& l, int j, Real s, Real h) {
    using std::exp;
    const Real lo = l.lo, hi = l.hi;
    const Real top = h < hi ? h : hi;
    if (!(top > lo)) return Real(0);
    Real acc = 0;
    for (int i = 0; i <= j; ++i)
      acc += Real(detail::binomial(j, i)) * detail::ipow(lo, j - i) *
             detail::power_exp_integral<Real>(i, s, top - lo);
    return acc * exp(-s * lo) / (hi - lo);
  }

  Law law_;
  std::string label_;
};

// S_x = [S | S <= x] together with the capped variable min(S, x)
class Truncation {
 public:
  Truncation(const Distribution& base, double x) : base_(base), x_(x) {
    if (!(x > 0)) throw std::domain_error("truncation threshold must be positive");
    mass_ = base_.cdf(x);
  }

  const Distribution& base() const { return base_; }
  double threshold() const { return x_; }
  double mass() const { return mass_; }
  bool empty() const { return !(mass_ > 0); }

  // E[S_x^j e^{-s S_x}]
  template <class Real = double>
  Real laplace_moment(int j, Real s) const {
    require_mass();
    return base_.restricted_laplace_moment<Real>(j, s, Real(x_)) / base_.restricted_laplace_moment<Real>(0, Real(0), Real(x_));
  }
  double moment(int j) const { return laplace_moment<double>(j, 0.0); }
  double transform(double s) const {
    if (!(s >= 0)) throw std::domain_error("transform: s must be nonnegative");
    return laplace_moment<double>(0, s);
  }
  double mixed_moment(int j, double s) const { return laplace_moment<double>(j, s); }

  // E[S^j 1{S <= x}]
  double truncated_moment(int j) const { return base_.restricted_laplace_moment<double>(j, 0.0, x_); }
  // E[min(S, x)^j]
  double capped_moment(int j) const {
    return base_.restricted_laplace_moment<double>(j, 0.0, x_) + std::pow(x_, j) * base_.survival(x_);
  }

 private:
  void require_mass() const {
    if (empty()) throw std::domain_error("empty truncation: P(S <= x) = 0 at x = " + std::to_string(x_));
  }

  Distribution base_;
  double x_;
  double mass_;
};

// anything that can report E[S^j e^{-sS}]
template <class L>
concept SizeLaw = requires(const L& law, int j, double s) {
  { law.template laplace_moment<double>(j, s) } -> std::convertible_to<double>;
};

namespace detail {

inline double parse_number(std::string_view tok, std::string_view literal) {
  while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
  while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw std::invalid_argument("bad number '" + std::string(tok) + "' in distribution literal '" +
                                std::string(literal) + "'");
  return v;
}

}  // namespace detail

// exp(rate=R) | exp(mean=M) | exp(R)
// det(V) | det(value=V)
// uniform(LO,HI) | uniform(lo=LO,hi=HI) | uniform(mean=M,scv=C)
// hyperexp2(mean=M,scv=C) | hyperexp2(p=P,rate1=R1,rate2=R2)
inline Distribution parse_distribution(std::string_view literal) {
  auto fail = [&](const std::string& why) -> Distribution {
    throw std::invalid_argument("distribution literal '" + std::string(literal) + "': " + why);
  };
  const auto open = literal.find('(');
  const auto close = literal.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open || close + 1 != literal.size())
    return fail("expected name(args)");
  std::string name(literal.substr(0, open));
  name.erase(std::remove(name.begin(), name.end(), ' '), name.end());
  std::vector<double> positional;
  std::map<std::string, double> named;
  std::string_view args = literal.substr(open + 1, close - open - 1);
  while (!args.empty()) {
    const auto comma = args.find(',');
    std::string_view tok = args.substr(0, comma);
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) {
      if (!named.empty()) return fail("positional argument after named ones");
      positional.push_back(detail::parse_number(tok, literal));
    } else {
      std::string key(tok.substr(0, eq));
      key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
      if (named.count(key)) return fail("duplicate key '" + key + "'");
      named[key] = detail::parse_number(tok.substr(eq + 1), literal);
    }
    if (comma == std::string_view::npos) break;
    args.remove_prefix(comma + 1);
  }
  auto has = [&](std::initializer_list<const char*> keys) {
    if (named.size() != keys.size()) return false;
    for (auto k : keys)
      if (!named.count(k)) return false;
    return true;
  };
  try {
    if (name == "exp") {
      if (positional.size() == 1 && named.empty()) return Distribution::exponential(positional[0]);
      if (positional.empty() && has({"rate"})) return Distribution::exponential(named["rate"]);
      if (positional.empty() && has({"mean"})) return Distribution::exponential(1.0 / named["mean"]);
    } else if (name == "det") {
      if (positional.size() == 1 && named.empty()) return Distribution::deterministic(positional[0]);
      if (positional.empty() && has({"value"})) return Distribution::deterministic(named["value"]);
    } else if (name == "uniform") {
      if (positional.size() == 2 && named.empty()) return Distribution::uniform(positional[0], positional[1]);
      if (positional.empty() && has({"lo", "hi"})) return Distribution::uniform(named["lo"], named["hi"]);
      if (positional.empty() && has({"mean", "scv"})) return Distribution::uniform_mean_scv(named["mean"], named["scv"]);
    } else if (name == "hyperexp2") {
      if (positional.empty() && has({"mean", "scv"}))
        return Distribution::hyperexp2_mean_scv(named["mean"], named["scv"]);
      if (positional.empty() && has({"p", "rate1", "rate2"}))
        return Distribution::hyperexp2(named["p"], named["rate1"], named["rate2"]);
    } else {
      return fail("unknown family '" + name + "'");
    }
  } catch (const std::invalid_argument& e) {
    return fail(e.what());
  }
  return fail("unsupported argument combination for '" + name + "'");
}

}  // namespace isqbound
