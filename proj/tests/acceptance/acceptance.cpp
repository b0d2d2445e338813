// One PASS/FAIL line per acceptance criterion, followed by indented evidence.
// Usage: acceptance [artifact_dir]   (sweep CSVs for criteria 8 and 10 are written there)

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>

#include "../closed_forms_k2.hpp"
#include "../golden_forms.hpp"
#include "../oracles.hpp"
#include "isqbound/experiments.hpp"
#include "isqbound/verify.hpp"

using namespace isqbound;
using verify::CheckResult;
using verify::num;

namespace {

constexpr std::uint64_t kSeed = 1;

CheckResult closed_forms_k2() {
  CheckResult r("k=2 generic pipeline equals the two-server closed forms (tol 1e-10)");
  const auto d = Distribution::exponential(1);
  const BoundEngine eng(2);
  double worst = 0;
  int n = 0;
  auto cmp = [&](const std::string& what, double got, double want) {
    const double err = std::abs(got - want) / std::max(1.0, std::abs(want));
    worst = std::max(worst, err);
    ++n;
    if (err > 1e-10) r.fail(what + ": " + num(got, 17) + " vs " + num(want, 17));
  };
  for (int i = 1; i <= 9; ++i) {
    const double lam = 0.1 * i;
    const SystemParams p(2, lam, d);
    cmp("E[W] lambda=" + num(lam), eng.isq_total_work(p), k2::isq2_work(d, lam));
    cmp("P(I=0) lambda=" + num(lam), eng.idle_probability(p), k2::isq2_idle(d, lam));
    for (double x : {1e-3, 0.01, 0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 30.0}) {
      const std::string at = " lambda=" + num(lam) + " x=" + num(x);
      cmp("C_2" + at, eng.c_k(p, x), k2::c2(d, lam, x));
      cmp("Sep" + at, eng.sep_isq_relevant_work(p, x), k2::sep2(d, lam, x));
      cmp("Rec" + at, eng.rec_isq_relevant_work_lb(p, x), k2::rec2(d, lam, x));
    }
  }
  r.note(std::to_string(n) + " comparisons, max relative error " + num(worst));
  return r;
}

golden::Ctx ctx(const Distribution& d, double lam, double w) {
  return {lam, w, [d, lam](double rr) { return d.transform(rr * lam); }, d.mean()};
}

CheckResult golden_forms() {
  CheckResult r("symbolic g/h for k=3,4,5 match the hand-written forms (50 points each, tol 1e-9)");
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(0, 1);
  const std::vector<Distribution> ds = {Distribution::exponential(1.0), Distribution::uniform(0, 2)};
  std::map<int, UV> built;
  for (int k : {3, 4, 5}) built.emplace(k, build_uv(k));
  double worst = 0;
  int n = 0;
  for (const auto& form : golden::forms()) {
    const auto& uv = built.at(form.k);
    const Skeleton<double> sk(full_test_function(form.affine ? uv.v : uv.u, form.q));
    for (const auto& d : ds)
      for (int i = 0; i < 50; ++i) {
        const double lam = (0.05 + 0.9 * U(rng)) / d.mean();
        const double w = 5.0 * U(rng);
        const double got = sk.compile(d, lam)(w), want = form.f(ctx(d, lam, w));
        const double err = std::abs(got - want) / std::max(1.0, std::abs(want));
        worst = std::max(worst, err);
        ++n;
        if (err > 1e-9) r.fail(form.name + " " + d.label() + " lam=" + num(lam) + " w=" + num(w) + ": " + num(got, 17) +
                               " vs " + num(want, 17));
      }
  }
  r.note(std::to_string(golden::forms().size()) + " forms, " + std::to_string(n) + " points, max relative error " +
         num(worst));
  return r;
}

CheckResult ode_residuals() {
  CheckResult r("defining ODEs of u_q, v_q, l_q hold by finite differences (100 states each, residual < 1e-6)");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  const std::vector<Distribution> laws = {Distribution::exponential(1.0), Distribution::uniform(0, 2),
                                          Distribution::hyperexp2_mean_scv(1.0, 3.0),
                                          Distribution::uniform_mean_scv(1.0, 0.05)};
  std::map<int, std::tuple<TestFunctions, TestFunctions, TestFunctions>> fams;
  for (int k = 2; k <= 5; ++k) {
    auto uv = build_uv(k);
    fams.emplace(k, std::make_tuple(uv.u, uv.v, build_l(k)));
  }
  double worst[3] = {0, 0, 0};
  const char* names[3] = {"u", "v", "l"};
  for (int fam = 0; fam < 3; ++fam)
    for (int s = 0; s < 100; ++s) {
      const int k = 2 + static_cast<int>(U(rng) * 4);
      const auto& d = laws[static_cast<std::size_t>(U(rng) * laws.size())];
      const double lam = (0.1 + 0.8 * U(rng)) / d.mean();
      const double c = fam == 2 ? 0.5 * U(rng) : 0.0;
      const int q = 1 + static_cast<int>(U(rng) * (k - 1));
      const double w = 0.05 + 3 * U(rng);
      const double ratio = static_cast<double>(q) / k;
      const auto& [u, v, l] = fams.at(k);
      const TestFunctions& tf = fam == 0 ? u : fam == 1 ? v : l;
      const auto here = Skeleton<double>(tf[q]).compile(d, lam, c);
      const auto next = Skeleton<double>(tf[q + 1]).compile(d, lam, c);
      oracle::Fn fh = [&](double z) { return here(z); };
      oracle::Fn fn = [&](double z) { return next(z); };
      const double drive = fam == 0 ? 1 - ratio : 2 * w - 2 * q * w / k;
      const double rhs = fam == 2 ? (k - q) * c : 0.0;
      const double res = std::abs(drive - lam * here(w) + lam * oracle::expect_shifted(d, fn, w) -
                                  ratio * oracle::derivative(fh, w) - rhs);
      worst[fam] = std::max(worst[fam], res);
      if (res > 1e-6)
        r.fail(std::string(names[fam]) + " k=" + std::to_string(k) + " q=" + std::to_string(q) + " " + d.label() +
               " w=" + num(w) + ": residual " + num(res));
    }
  for (int fam = 0; fam < 3; ++fam) r.note(std::string(names[fam]) + ": max residual " + num(worst[fam]));
  return r;
}

CheckResult isq_checks() {
  CheckResult r("simulated ISQ-2 (lambda=0.5) and ISQ-5 stationary work and idle probability within the 95% CI");
  const auto d = Distribution::exponential(1);
  for (const auto& c : {verify::isq_stationary(2, d, 0.5, 5'000'000, kSeed), verify::isq_stationary(5, d, 0.5, 5'000'000, kSeed)}) {
    r.note(c.name);
    for (const auto& line : c.details) r.note("  " + line);
    r.passed &= c.passed;
  }
  return r;
}

ExperimentConfig sweep_config(const std::string& name, const std::string& dist) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.distribution = dist;
  cfg.k = 2;
  for (int i = 0; i <= 13; ++i) cfg.rho_grid.push_back(0.3 + 0.05 * i);
  cfg.n_arrivals = 5'000'000;
  cfg.seeds = {kSeed};
  return cfg;
}

struct Peak {
  double value = -1, rho = 0;
};

Peak peak(const std::vector<SweepRow>& rows, double SweepRow::*field) {
  Peak p;
  for (const auto& row : rows)
    if (!std::isnan(row.*field) && row.*field > p.value) p = {row.*field, row.rho};
  return p;
}

std::string pct(double v) { return num(100 * v, 4) + "%"; }

CheckResult dominance(const std::vector<std::pair<std::string, std::vector<SweepRow>>>& sweeps) {
  CheckResult r("every lower bound lies below simulated SRPT-2 E[T] - 3 CI at each sweep point");
  for (const auto& [name, rows] : sweeps) {
    double tightest = std::numeric_limits<double>::infinity();
    double tight_rho = 0;
    for (const auto& row : rows) {
      if (std::isnan(row.sim_mean)) {
        r.fail(name + " rho=" + num(row.rho) + ": no simulation (" + row.status + ")");
        continue;
      }
      const double ceiling = row.sim_mean - 3 * row.sim_ci;
      const std::pair<const char*, double> bs[] = {
          {"naive", row.naive_lb}, {"mixex", row.mixex_lb}, {"isq", row.isq_lb}, {"isqrec", row.isqrec_lb}};
      for (const auto& [bn, b] : bs) {
        const double slack = ceiling - b;
        if (slack < tightest) tightest = slack, tight_rho = row.rho;
        if (!(b <= ceiling))
          r.fail(name + " rho=" + num(row.rho) + ": " + bn + " " + num(b, 8) + " > " + num(row.sim_mean, 8) + " - 3*" +
                 num(row.sim_ci, 4) + " (sim mean minus bound = " + num(row.sim_mean - b, 4) + ", " +
                 num((row.sim_mean - b) / row.sim_ci, 3) + " CI)");
      }
    }
    r.note(name + ": smallest margin (sim - 3CI - bound) " + num(tightest, 4) + " at rho=" + num(tight_rho));
  }
  return r;
}

template <class F>
CheckResult timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = f();
  r.note("runtime " + num(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 4) + " s");
  return r;
}

void report(int id, const CheckResult& r) {
  std::cout << (r.passed ? "PASS" : "FAIL") << " criterion " << id << ": " << r.name << '\n';
  for (const auto& d : r.details) std::cout << "    " << d << '\n';
  std::cout.flush();
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out = argc > 1 ? argv[1] : "acceptance_artifacts";
  int failures = 0;
  auto run = [&](int id, const std::function<CheckResult()>& f) {
    CheckResult r("");
    try {
      r = timed(f);
    } catch (const std::exception& e) {
      r = CheckResult("exception");
      r.fail(e.what());
    }
    report(id, r);
    failures += !r.passed;
  };

  run(1, closed_forms_k2);
  run(2, golden_forms);
  run(3, ode_residuals);
  run(4, isq_checks);
  run(5, [] {
    return verify::coupling({2, 3}, {Policy::SRPT, Policy::FCFS}, Distribution::exponential(1), 0.9, 1'000'000,
                            {1, 2, 3, 4, 5});
  });
  run(6, [] {
    return verify::wine_mginf_identity({1, 2, 5},
                                       {Distribution::exponential(1), Distribution::deterministic(1),
                                        Distribution::uniform_mean_scv(1, 0.05), Distribution::hyperexp2_mean_scv(1, 5)},
                                       0.7);
  });
  run(7, [] { return verify::bar_residual({2, 3}, {0.3, 0.6, 0.9}, Distribution::exponential(1), 5'000'000, kSeed); });

  std::vector<std::pair<std::string, std::vector<SweepRow>>> sweeps;
  run(8, [&] {
    CheckResult r("k=2 sweeps over rho 0.3..0.95: (a) rec UIR vs MixEx > 30%, (b) total UIR 62+-5 pp, (c) uniform C^2=0.05 UIR vs MixEx 62+-5 pp");
    for (const auto& [name, dist] : {std::pair{"accept_k2_exp", "exp(1)"}, {"accept_k2_uniform_scv005", "uniform(mean=1,scv=0.05)"}}) {
      const auto res = run_sweep(sweep_config(name, dist), out);
      for (const auto& row : res.rows)
        if (row.status != "ok") r.fail(std::string(name) + " rho=" + num(row.rho) + ": " + row.status);
      r.note(std::string(name) + " -> " + res.csv.string());
      sweeps.emplace_back(name, res.rows);
    }
    const auto& e = sweeps[0].second;
    const auto& u = sweeps[1].second;
    const Peak a = peak(e, &SweepRow::uir_isqrec_vs_mixex);
    const Peak b = peak(e, &SweepRow::uir_isqrec_vs_naive);
    const Peak c = peak(u, &SweepRow::uir_isqrec_vs_mixex);
    auto judge = [&](const std::string& tag, const Peak& p, bool ok, const std::string& target) {
      const std::string msg = tag + ": peak " + pct(p.value) + " at rho=" + num(p.rho) + " (target " + target + ")";
      if (ok) r.note(msg);
      else r.fail(msg);
    };
    judge("(a) exp ISQ-Recycling vs MixEx", a, a.value > 0.30, "> 30%");
    judge("(b) exp total ISQ-Recycling vs naive", b, std::abs(b.value - 0.62) <= 0.05, "62% +- 5 pp");
    judge("(c) uniform C^2=0.05 ISQ-Recycling vs MixEx", c, std::abs(c.value - 0.62) <= 0.05, "62% +- 5 pp");
    return r;
  });
  run(9, [] { return verify::jump_values(); });
  run(10, [&] {
    if (sweeps.size() < 2) {
      CheckResult r("dominance vs simulation");
      r.fail("criterion 8 sweeps did not complete");
      return r;
    }
    return dominance(sweeps);
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criteria FAILED") << '\n';
  return failures == 0 ? 0 : 1;
}
