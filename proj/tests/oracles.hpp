#pragma once

// Numeric oracles that share no code path with the symbolic engine:
// quadrature over the job-size density, finite differences, and a direct
// numeric evaluation of the u/v recursions by nested quadrature.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>

#include "isqbound/dist.hpp"

namespace oracle {

using isqbound::Distribution;
using Fn = std::function<double(double)>;

// E[f(S + w)] by adaptive Gauss-Kronrod against the density
inline double expect_shifted(const Distribution& d, const Fn& f, double w, double tol = 1e-13) {
  if (d.kind() == "det") return f(d.support_lower() + w);
  auto g = [&](double s) { return f(s + w) * d.pdf(s); };
  const double lo = d.support_lower();
  const double hi = d.support_upper();
  if (std::isfinite(hi)) return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo, hi, 15, tol);
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      g, 0.0, std::numeric_limits<double>::infinity(), 15, tol);
}

// E[f(S)] restricted to S <= x and renormalized
inline double expect_truncated(const Distribution& d, const Fn& f, double x, double tol = 1e-13) {
  if (d.kind() == "det") return d.support_lower() <= x ? f(d.support_lower()) : std::nan("");
  const double lo = d.support_lower();
  const double hi = std::min(x, d.support_upper());
  auto g = [&](double s) { return f(s) * d.pdf(s); };
  const double num = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo, hi, 15, tol);
  return num / d.cdf(x);
}

// five-point central difference
inline double derivative(const Fn& f, double w, double h = 1e-3) {
  return (-f(w + 2 * h) + 8 * f(w + h) - 8 * f(w - h) + f(w - 2 * h)) / (12 * h);
}

// u_q or v_q evaluated straight from the integral recursion, no symbols
class NestedRecursion {
 public:
  NestedRecursion(int k, bool affine, const Distribution& d, double lam) : k_(k), affine_(affine), d_(d), lam_(lam) {}

  double operator()(int q, double w) const {
    if (q >= k_) return 0.0;
    const double alpha = static_cast<double>(k_) / q;
    auto integrand = [&](double y) {
      const double inhom = affine_ ? 2.0 * (k_ - q) * y / q : static_cast<double>(k_ - q) / q;
      double drive = 0.0;
      if (q + 1 < k_) {
        Fn next = [&](double z) { return (*this)(q + 1, z); };
        drive = alpha * lam_ * expect_shifted(d_, next, y, 1e-11);
      }
      return std::exp(alpha * lam_ * (y - w)) * (inhom + drive);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, w, 8, 1e-12);
  }

 private:
  int k_;
  bool affine_;
  Distribution d_;
  double lam_;
};

}  // namespace oracle
