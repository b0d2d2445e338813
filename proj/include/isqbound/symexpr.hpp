#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isqbound/dist.hpp"

namespace isqbound {

using Rational = boost::multiprecision::cpp_rational;

// E[S^order e^{-rate*lambda*S}]: order 0 is a transform, rate 0 a plain moment, both nonzero a mixed moment
struct Factor {
  int order = 0;
  Rational rate = 0;

  bool is_transform() const { return order == 0; }
  bool is_moment() const { return rate == 0; }
  bool is_mixed() const { return order > 0 && rate != 0; }

  friend bool operator==(const Factor& a, const Factor& b) { return a.order == b.order && a.rate == b.rate; }
  friend bool operator<(const Factor& a, const Factor& b) {
    if (a.order != b.order) return a.order < b.order;
    return a.rate < b.rate;
  }
};

// monomial lambda^lam_pow * w^w_pow * e^{-exp_rate*lambda*w} * prod(factors) * C^c_pow
struct TermKey {
  int lam_pow = 0;
  int w_pow = 0;
  Rational exp_rate = 0;
  std::vector<Factor> factors;  // sorted
  int c_pow = 0;

  bool has_mixed() const {
    return std::any_of(factors.begin(), factors.end(), [](const Factor& f) { return f.is_mixed(); });
  }

  friend bool operator<(const TermKey& a, const TermKey& b) {
    if (a.c_pow != b.c_pow) return a.c_pow < b.c_pow;
    if (a.exp_rate != b.exp_rate) return a.exp_rate < b.exp_rate;
    if (a.w_pow != b.w_pow) return a.w_pow < b.w_pow;
    if (a.lam_pow != b.lam_pow) return a.lam_pow < b.lam_pow;
    return a.factors < b.factors;
  }
  friend bool operator==(const TermKey& a, const TermKey& b) {
    return a.lam_pow == b.lam_pow && a.w_pow == b.w_pow && a.exp_rate == b.exp_rate && a.factors == b.factors &&
           a.c_pow == b.c_pow;
  }
};

class Expr {
 public:
  using Map = std::map<TermKey, Rational>;

  Expr() = default;

  static Expr constant(const Rational& c) { return monomial(c, 0, 0); }
  // c * lambda^lam_pow * w^w_pow
  static Expr monomial(const Rational& c, int lam_pow, int w_pow, const Rational& exp_rate = 0, int c_pow = 0) {
    Expr e;
    TermKey k;
    k.lam_pow = lam_pow;
    k.w_pow = w_pow;
    k.exp_rate = exp_rate;
    k.c_pow = c_pow;
    e.add_term(k, c);
    return e;
  }

  void add_term(const TermKey& key, const Rational& coeff) {
    if (coeff == 0) return;
    auto [it, inserted] = terms_.try_emplace(key, coeff);
    if (!inserted) {
      it->second += coeff;
      if (it->second == 0) terms_.erase(it);
    }
  }

  const Map& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  bool has_mixed() const {
    return std::any_of(terms_.begin(), terms_.end(), [](const auto& t) { return t.first.has_mixed(); });
  }
  int max_c_pow() const {
    int m = 0;
    for (const auto& [k, c] : terms_) m = std::max(m, k.c_pow);
    return m;
  }

  friend Expr operator+(Expr a, const Expr& b) {
    for (const auto& [k, c] : b.terms_) a.add_term(k, c);
    return a;
  }
  friend Expr operator-(Expr a, const Expr& b) {
    for (const auto& [k, c] : b.terms_) a.add_term(k, -c);
    return a;
  }
  friend Expr operator*(const Rational& s, const Expr& a) {
    Expr out;
    if (s == 0) return out;
    for (const auto& [k, c] : a.terms_) out.terms_.emplace(k, c * s);
    return out;
  }
  friend bool operator==(const Expr& a, const Expr& b) { return a.terms_ == b.terms_; }

  // multiplies by lambda^p
  Expr times_lambda(int p) const {
    Expr out;
    for (const auto& [key, c] : terms_) {
      TermKey k = key;
      k.lam_pow += p;
      out.terms_.emplace(std::move(k), c);
    }
    return out;
  }

 private:
  Map terms_;
};

inline Expr add(const Expr& a, const Expr& b) { return a + b; }
inline Expr scale(const Expr& a, const Rational& c) { return c * a; }

namespace detail {

inline Rational factorial(int n) {
  Rational r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline Rational binom(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

inline Rational rpow(const Rational& b, int n) {
  Rational r = 1;
  for (int i = 0; i < n; ++i) r *= b;
  return r;
}

}  // namespace detail

// E[a(S+y)], returned as an expression in y (stored in the w slot)
inline Expr shift_expectation(const Expr& a) {
  Expr out;
  for (const auto& [key, coeff] : a.terms()) {
    const int m = key.w_pow;
    for (int j = 0; j <= m; ++j) {
      TermKey k = key;
      k.w_pow = m - j;
      if (j > 0 || key.exp_rate != 0) {
        Factor f{j, key.exp_rate};
        k.factors.insert(std::upper_bound(k.factors.begin(), k.factors.end(), f), f);
      }
      out.add_term(k, coeff * detail::binom(m, j));
    }
  }
  return out;
}

// e^{-alpha*lambda*w} * int_0^w e^{alpha*lambda*y} a(y) dy
inline Expr weight_and_integrate(const Expr& a, const Rational& alpha) {
  Expr out;
  for (const auto& [key, coeff] : a.terms()) {
    const int m = key.w_pow;
    const Rational b = alpha - key.exp_rate;
    if (b == 0) {
      // resonant: the integrand is a pure power of y
      TermKey k = key;
      k.w_pow = m + 1;
      k.exp_rate = alpha;
      out.add_term(k, coeff / (m + 1));
      continue;
    }
    Rational falling = 1;  // m!/(m-i)!
    for (int i = 0; i <= m; ++i) {
      if (i > 0) falling *= (m - i + 1);
      TermKey k = key;
      k.w_pow = m - i;
      k.lam_pow = key.lam_pow - (i + 1);
      const Rational sign = (i % 2 == 0) ? 1 : -1;
      out.add_term(k, coeff * sign * falling / detail::rpow(b, i + 1));
    }
    TermKey k = key;
    k.w_pow = 0;
    k.lam_pow = key.lam_pow - (m + 1);
    k.exp_rate = alpha;
    const Rational sign = (m % 2 == 0) ? 1 : -1;
    out.add_term(k, -coeff * sign * detail::factorial(m) / detail::rpow(b, m + 1));
  }
  return out;
}

// d/dw
inline Expr differentiate(const Expr& a) {
  Expr out;
  for (const auto& [key, coeff] : a.terms()) {
    if (key.w_pow > 0) {
      TermKey k = key;
      k.w_pow -= 1;
      out.add_term(k, coeff * key.w_pow);
    }
    if (key.exp_rate != 0) {
      TermKey k = key;
      k.lam_pow += 1;
      out.add_term(k, -coeff * key.exp_rate);
    }
  }
  return out;
}

struct BuildOptions {
  int max_k = 20;
  std::size_t max_terms = 200000;
};

enum class Family { U, V, L };

// index q in 0..k; entry k is the zero function, entry 0 is unused
struct TestFunctions {
  int k = 0;
  Family family = Family::U;
  std::vector<Expr> f;

  const Expr& operator[](int q) const { return f.at(q); }
};

namespace detail {

inline TestFunctions build_family(int k, Family family, const BuildOptions& opt) {
  if (k < 2) throw std::invalid_argument("test functions need k >= 2, got k = " + std::to_string(k));
  if (k > opt.max_k)
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the configured cap " + std::to_string(opt.max_k));
  TestFunctions out;
  out.k = k;
  out.family = family;
  out.f.assign(k + 1, Expr{});
  for (int q = k - 1; q >= 1; --q) {
    const Rational alpha = Rational(k, q);
    Expr inhom;
    if (family == Family::U) inhom = Expr::constant(Rational(k - q, q));
    else inhom = Expr::monomial(Rational(2 * (k - q), q), 0, 1);
    if (family == Family::L) inhom = inhom + Expr::monomial(Rational(k * (q - k), q), 0, 0, 0, 1);
    const Expr driven = alpha * shift_expectation(out.f[q + 1]).times_lambda(1);
    const Expr particular = weight_and_integrate(inhom, alpha);
    out.f[q] = particular + weight_and_integrate(driven, alpha);
    const std::size_t bound = 2 * out.f[q + 1].size() + particular.size();
    if (out.f[q].size() > bound)
      throw std::logic_error("term growth exceeded 2x + inhomogeneous part at k = " + std::to_string(k) +
                             ", q = " + std::to_string(q));
    if (out.f[q].size() > opt.max_terms)
      throw std::length_error("term count " + std::to_string(out.f[q].size()) + " exceeds limit " +
                              std::to_string(opt.max_terms) + " while building k = " + std::to_string(k));
  }
  return out;
}

}  // namespace detail

struct UV {
  TestFunctions u, v;
};

inline UV build_uv(int k, const BuildOptions& opt = {}) {
  return {detail::build_family(k, Family::U, opt), detail::build_family(k, Family::V, opt)};
}

// C_k stays symbolic (c_pow) and is bound at evaluation time
inline TestFunctions build_l(int k, const BuildOptions& opt = {}) { return detail::build_family(k, Family::L, opt); }

// full test function value at speed q/k: w + u_q, w^2 + v_q or w^2 + l_q; speed 1 has no offset
inline Expr full_test_function(const TestFunctions& tf, int q) {
  if (q == 0) return Expr{};
  const Expr lead = tf.family == Family::U ? Expr::monomial(1, 0, 1) : Expr::monomial(1, 0, 2);
  return lead + tf.f.at(q);
}

// generator applied to a full test function at speed q/k, as a function of w:
// lambda*(E[f_{min(q+1,k)}(w+S)] - f_q(w)) - (q/k) f_q'(w). At q = 0 only w = 0 is meaningful.
inline Expr generator(const TestFunctions& tf, int q) {
  const int k = tf.k;
  const Expr next = full_test_function(tf, std::min(q + 1, k));
  const Expr here = full_test_function(tf, q);
  return (shift_expectation(next) - here).times_lambda(1) - Rational(q, k) * differentiate(here);
}

template <class Real>
Real to_real(const Rational& r) {
  if constexpr (std::is_floating_point_v<Real>) {
    return r.template convert_to<Real>();
  } else {
    return Real(boost::multiprecision::numerator(r).str()) / Real(boost::multiprecision::denominator(r).str());
  }
}

// sum_i coef_i * w^{w_pow_i} * e^{-decay_i * w}
template <class Real>
struct Compiled {
  struct Piece {
    Real coef;
    int w_pow;
    Real decay;
  };
  std::vector<Piece> pieces;

  Real operator()(Real w) const {
    using std::exp;
    Real acc = 0;
    for (const auto& p : pieces) acc += p.coef * detail::ipow(w, p.w_pow) * exp(-p.decay * w);
    return acc;
  }
  Real derivative(Real w) const {
    using std::exp;
    Real acc = 0;
    for (const auto& p : pieces) {
      const Real e = exp(-p.decay * w);
      Real d = -p.decay * detail::ipow(w, p.w_pow);
      if (p.w_pow > 0) d += p.w_pow * detail::ipow(w, p.w_pow - 1);
      acc += p.coef * d * e;
    }
    return acc;
  }
  // E[f(X)] for a size law X
  template <SizeLaw L>
  Real expectation(const L& law) const {
    Real acc = 0;
    for (const auto& p : pieces) acc += p.coef * law.template laplace_moment<Real>(p.w_pow, p.decay);
    return acc;
  }
  // int_{a}^{b} f(w) dw, 0 <= a <= b
  Real integral(Real a, Real b) const {
    using std::exp;
    Real acc = 0;
    for (const auto& p : pieces) {
      Real lo = 0, hi = 0;
      if (!(p.decay > 0)) {
        hi = detail::ipow(b, p.w_pow + 1) / (p.w_pow + 1);
        lo = detail::ipow(a, p.w_pow + 1) / (p.w_pow + 1);
        acc += p.coef * (hi - lo);
      } else {
        // int_a^b w^m e^{-dw} dw = e^{-da} int_0^{b-a} (a+t)^m e^{-dt} dt
        Real part = 0;
        for (int i = 0; i <= p.w_pow; ++i)
          part += Real(detail::binomial(p.w_pow, i)) * detail::ipow(a, p.w_pow - i) *
                  detail::power_exp_integral<Real>(i, p.decay, b - a);
        acc += p.coef * exp(-p.decay * a) * part;
      }
    }
    return acc;
  }
};

// Expr with rationals pre-converted; compile() then only needs factor values
template <class Real>
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(const Expr& e) {
    std::map<Factor, int> fid;
    std::map<std::pair<int, Rational>, int> sid;
    for (const auto& [key, coeff] : e.terms()) {
      Row r;
      r.coef = to_real<Real>(coeff);
      r.lam_pow = key.lam_pow;
      r.c_pow = key.c_pow;
      auto slot = std::make_pair(key.w_pow, key.exp_rate);
      auto it = sid.find(slot);
      if (it == sid.end()) {
        it = sid.emplace(slot, static_cast<int>(slots_.size())).first;
        slots_.push_back({key.w_pow, to_real<Real>(key.exp_rate)});
      }
      r.slot = it->second;
      for (const auto& f : key.factors) {
        auto fi = fid.find(f);
        if (fi == fid.end()) {
          fi = fid.emplace(f, static_cast<int>(factors_.size())).first;
          factors_.push_back({f.order, to_real<Real>(f.rate)});
        }
        r.factor_ids.push_back(fi->second);
      }
      rows_.push_back(std::move(r));
    }
  }

  // binds lambda, the law inside the expectation factors, and C
  template <SizeLaw L>
  Compiled<Real> compile(const L& law, Real lambda, Real c = 0) const {
    std::vector<Real> fval(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i)
      fval[i] = law.template laplace_moment<Real>(factors_[i].order, factors_[i].rate * lambda);
    std::vector<Real> acc(slots_.size(), Real(0));
    for (const auto& r : rows_) {
      Real v = r.coef;
      if (r.lam_pow >= 0) v *= detail::ipow(lambda, r.lam_pow);
      else v /= detail::ipow(lambda, -r.lam_pow);
      for (int id : r.factor_ids) v *= fval[id];
      v *= detail::ipow(c, r.c_pow);
      acc[r.slot] += v;
    }
    Compiled<Real> out;
    for (std::size_t i = 0; i < slots_.size(); ++i)
      out.pieces.push_back({acc[i], slots_[i].w_pow, slots_[i].rate * lambda});
    return out;
  }

  std::size_t rows() const { return rows_.size(); }

 private:
  struct Row {
    Real coef;
    int lam_pow;
    int c_pow;
    int slot;
    std::vector<int> factor_ids;
  };
  struct Slot {
    int w_pow;
    Real rate;
  };
  struct FactorNum {
    int order;
    Real rate;
  };
  std::vector<Row> rows_;
  std::vector<Slot> slots_;
  std::vector<FactorNum> factors_;
};

template <class Real = double, SizeLaw L>
Real eval(const Expr& e, const L& law, Real lambda, Real w, Real c = 0) {
  return Skeleton<Real>(e).compile(law, lambda, c)(w);
}

// human-readable form, one term per line when multiline is set
inline std::string to_string(const Expr& e, bool multiline = false) {
  if (e.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [key, coeff] : e.terms()) {
    Rational c = coeff;
    if (!first) os << (multiline ? "\n" : " ") << (c < 0 ? "- " : "+ ");
    else if (c < 0) os << "-";
    first = false;
    if (c < 0) c = -c;
    os << c.str();
    if (key.lam_pow != 0) os << " lam^" << key.lam_pow;
    for (const auto& f : key.factors) {
      if (f.is_transform()) os << " St(" << f.rate.str() << " lam)";
      else if (f.is_moment()) os << " E[S^" << f.order << "]";
      else os << " E[S^" << f.order << " e^(-" << f.rate.str() << " lam S)]";
    }
    if (key.w_pow == 1) os << " w";
    else if (key.w_pow > 1) os << " w^" << key.w_pow;
    if (key.exp_rate != 0) os << " e^(-" << key.exp_rate.str() << " lam w)";
    if (key.c_pow == 1) os << " C";
    else if (key.c_pow > 1) os << " C^" << key.c_pow;
  }
  return os.str();
}

inline nlohmann::json to_json(const Expr& e) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, coeff] : e.terms()) {
    nlohmann::json t;
    t["coeff"] = coeff.str();
    t["lam_pow"] = key.lam_pow;
    t["w_pow"] = key.w_pow;
    t["exp_rate"] = key.exp_rate.str();
    nlohmann::json tr = nlohmann::json::array(), mo = nlohmann::json::array(), mx = nlohmann::json::array();
    for (const auto& f : key.factors) {
      if (f.is_transform()) tr.push_back(f.rate.str());
      else if (f.is_moment()) mo.push_back(f.order);
      else mx.push_back({{"order", f.order}, {"rate", f.rate.str()}});
    }
    t["transform_rates"] = tr;
    t["moment_orders"] = mo;
    t["mixed"] = mx;
    t["c_pow"] = key.c_pow;
    arr.push_back(std::move(t));
  }
  return arr;
}

}  // namespace isqbound
