// Bounds at one load next to a seeded SRPT-k simulation, with UIR of each bound.
// Usage: bound_vs_sim [k] [rho] [distribution] [arrivals]

#include <cstdio>
#include <string>

#include "isqbound/experiments.hpp"

using namespace isqbound;

int main(int argc, char** argv) {
  ExperimentConfig cfg;
  cfg.k = argc > 1 ? std::stoi(argv[1]) : 2;
  const double rho = argc > 2 ? std::stod(argv[2]) : 0.7;
  cfg.distribution = argc > 3 ? argv[3] : "exp(1)";
  cfg.n_arrivals = argc > 4 ? std::stoull(argv[4]) : 1'000'000;
  cfg.rho_grid = {rho};
  cfg.validate();

  const BoundEngine eng(cfg.k);
  const SweepRow r = run_point(cfg, eng, rho, 1);
  std::printf("k=%d rho=%.3g %s, %llu arrivals, seed 1\n", r.k, r.rho, r.dist.c_str(),
              static_cast<unsigned long long>(cfg.n_arrivals));
  std::printf("  simulated SRPT-k E[T] %.5f +- %.5f\n", r.sim_mean, r.sim_ci);
  std::printf("  naive   %.5f\n  mixex   %.5f  (UIR vs naive %.1f%%)\n", r.naive_lb, r.mixex_lb, 100 * r.uir_mixex_vs_naive);
  std::printf("  isq     %.5f  (UIR vs mixex %.1f%%)\n", r.isq_lb, 100 * r.uir_isq_vs_mixex);
  std::printf("  isq_rec %.5f  (UIR vs mixex %.1f%%, vs naive %.1f%%)\n", r.isqrec_lb, 100 * r.uir_isqrec_vs_mixex,
              100 * r.uir_isqrec_vs_naive);
  std::printf("  status: %s\n", r.status.c_str());
  return r.status == "ok" ? 0 : 1;
}
