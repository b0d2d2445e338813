// Analytic lower bounds on SRPT-k mean response time across a load grid.
// Usage: bounds_table [k] [distribution]

#include <cstdio>
#include <string>

#include "isqbound/wine.hpp"

using namespace isqbound;

int main(int argc, char** argv) {
  const int k = argc > 1 ? std::stoi(argv[1]) : 2;
  const Distribution d = parse_distribution(argc > 2 ? argv[2] : "exp(1)");
  const BoundEngine eng(k);
  std::printf("k=%d  %s  (E[S]=%.4g, C^2=%.4g)\n", k, d.label().c_str(), d.mean(), d.scv());
  std::printf("%6s %10s %10s %10s %10s %10s\n", "rho", "srpt1", "mginf", "mixex", "isq", "isq_rec");
  for (int i = 1; i <= 19; ++i) {
    const double rho = 0.05 * i;
    const auto s = bound_suite(eng, SystemParams::from_load(k, rho, d));
    std::printf("%6.2f %10.5f %10.5f %10.5f %10.5f %10.5f\n", rho, s.srpt1_only.value, s.mginf_only.value, s.mixex.value,
                s.isq.value, s.isq_recycling.value);
  }
}
