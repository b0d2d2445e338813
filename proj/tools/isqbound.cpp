#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "isqbound/experiments.hpp"
#include "isqbound/verify.hpp"
#include "json.hpp"

using namespace isqbound;
using nlohmann::json;

namespace {

struct Common {
  std::string dist = "exp(1)";
  int k = 2;
  std::optional<double> rho, lambda;
  double tol = 1e-6;
  bool conjecture = false;
  std::uint64_t seed = 1;
};

SystemParams params_of(const Common& c) {
  const auto d = parse_distribution(c.dist);
  if (c.rho && c.lambda) throw CLI::ValidationError("give either --rho or --lambda, not both");
  if (c.lambda) return SystemParams(c.k, *c.lambda, d);
  return SystemParams::from_load(c.k, c.rho.value_or(0.5), d);
}

json to_json(const WineResult& w) {
  json segs = json::array();
  for (const auto& s : w.breakdown)
    segs.push_back({{"kind", s.kind},
                    {"x_lo", s.x_lo},
                    {"x_hi", std::isfinite(s.x_hi) ? json(s.x_hi) : json("inf")},
                    {"dominant", to_string(s.dominant)},
                    {"contribution", s.contribution},
                    {"error", s.error}});
  return {{"value", w.value}, {"abs_error_estimate", w.abs_error_estimate}, {"families", w.families.label()},
          {"evaluations", w.evaluations}, {"breakdown", segs}};
}

int run_bounds(const Common& c, bool breakdown) {
  const auto p = params_of(c);
  BoundEngine::Options eo;
  eo.assume_jump_conjecture = c.conjecture;
  const BoundEngine eng(p.k, eo);
  WineOptions wo;
  wo.tol = c.tol;
  const auto s = bound_suite(eng, p, wo);
  auto entry = [&](const WineResult& w) { return breakdown ? to_json(w) : json{{"value", w.value}, {"abs_error_estimate", w.abs_error_estimate}}; };
  const json out = {{"k", p.k},
                    {"dist", p.dist.label()},
                    {"lambda", p.lambda},
                    {"rho", p.rho()},
                    {"assume_jump_conjecture", c.conjecture},
                    {"tol", c.tol},
                    {"naive", s.naive()},
                    {"srpt1_only", entry(s.srpt1_only)},
                    {"mginf_only", entry(s.mginf_only)},
                    {"mixex", entry(s.mixex)},
                    {"isq", entry(s.isq)},
                    {"isq_recycling", entry(s.isq_recycling)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_simulate(const Common& c, const std::string& model, const std::string& policy, std::uint64_t n, bool thresholds) {
  const auto p = params_of(c);
  const Policy pol = policy == "fcfs" ? Policy::FCFS : Policy::SRPT;
  SimOptions o;
  o.n_arrivals = n;
  o.seed = c.seed;
  if (thresholds) o.thresholds = default_thresholds(p.dist);
  json out = {{"k", p.k}, {"dist", p.dist.label()}, {"lambda", p.lambda}, {"rho", p.rho()}, {"model", model}};
  if (model == "mgk") {
    out["policy"] = policy;
    out["result"] = to_json(simulate_mgk(p, pol, o));
  } else if (model == "isq") {
    const auto s = simulate_isq(p, o);
    json occ = json::array();
    for (const auto& e : s.speed_occupancy) occ.push_back({{"mean", e.mean}, {"ci95", e.ci}});
    json rel = json::array();
    for (std::size_t i = 0; i < s.relevant_work.size(); ++i)
      rel.push_back({{"x", s.thresholds[i]}, {"mean", s.relevant_work[i].mean}, {"ci95", s.relevant_work[i].ci}});
    out["result"] = {{"mean_work", {{"mean", s.work.mean}, {"ci95", s.work.ci}}},
                     {"speed_occupancy", occ},
                     {"sep_isq_relevant_work", rel},
                     {"seed", s.seed}};
  } else {
    out["policy"] = policy;
    const auto r = simulate_coupled(p, pol, n, c.seed);
    out["result"] = {{"max_violation", r.max_violation}, {"violation_time", r.violation_time}, {"epochs", r.epochs}};
  }
  out["method"] = {{"warmup_fraction", o.warmup_fraction}, {"batches", o.batches}, {"ci", "batch means, Student t 95%"}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_sweep_cmd(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed,
                  std::optional<double> tol, bool conjecture) {
  auto cfg = load_config(config);
  if (seed) cfg.seeds = {*seed};
  if (tol) cfg.wine_tol = *tol;
  if (conjecture) cfg.assume_jump_conjecture = true;
  const auto dir = out_dir.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out_dir);
  const auto res = run_sweep(cfg, dir);
  int failures = 0;
  for (const auto& r : res.rows) failures += r.status != "ok";
  bool complete = true;
  for (const auto& r : res.rows)
    for (double v : {r.naive_lb, r.mixex_lb, r.isq_lb, r.isqrec_lb, r.sim_mean}) complete &= !std::isnan(v);
  if (complete) write_uir_csv(report_uir_curves(res.rows), dir / (cfg.name + ".uir.csv"));
  std::cerr << res.rows.size() << " rows -> " << res.csv.string() << " (" << failures << " with non-ok status)\n";
  return failures == 0 ? 0 : 2;
}

int run_verify(std::uint64_t seed, bool full) {
  const std::uint64_t n = full ? 5'000'000 : 200'000;
  const auto expo = Distribution::exponential(1);
  std::vector<verify::CheckResult> results;
  results.push_back(verify::isq_stationary(2, expo, 0.5, n, seed, full ? 1.0 : 3.0));
  results.push_back(verify::coupling({2, 3}, {Policy::SRPT, Policy::FCFS}, expo, 0.9, full ? 1'000'000 : 100'000,
                                     full ? std::vector<std::uint64_t>{1, 2, 3, 4, 5} : std::vector<std::uint64_t>{seed}));
  results.push_back(verify::wine_mginf_identity({1, 2, 5},
                                                {expo, Distribution::deterministic(1), Distribution::uniform_mean_scv(1, 0.05),
                                                 Distribution::hyperexp2_mean_scv(1, 5)},
                                                0.7));
  results.push_back(verify::bar_residual({2, 3}, {0.3, 0.6, 0.9}, expo, n, seed));
  results.push_back(verify::jump_values());
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << '\n';
    for (const auto& d : r.details) std::cout << "    " << d << '\n';
    all &= r.passed;
  }
  return all ? 0 : 1;
}

int run_print(int k, const std::string& family, std::optional<int> q, bool as_json) {
  TestFunctions tf;
  if (family == "u") tf = build_uv(k).u;
  else if (family == "v") tf = build_uv(k).v;
  else tf = build_l(k);
  const int lo = q.value_or(1), hi = q.value_or(k - 1);
  if (lo < 1 || hi > k - 1) throw CLI::ValidationError("--q must lie in 1..k-1");
  if (as_json) {
    json out = json::object();
    for (int i = lo; i <= hi; ++i) out[std::to_string(i)] = to_json(tf[i]);
    std::cout << out.dump(2) << '\n';
  } else {
    for (int i = lo; i <= hi; ++i)
      std::cout << family << "_" << i << " (speed " << i << "/" << k << ", " << tf[i].size() << " terms):\n"
                << to_string(tf[i], true) << "\n\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lower bounds on M/G/k mean response time, with a seeded simulator to check them"};
  app.require_subcommand(1);
  Common c;
  auto add_system = [&](CLI::App* sub) {
    sub->add_option("--dist", c.dist, "size distribution, e.g. exp(1), det(1), uniform(mean=1,scv=0.05), hyperexp2(mean=1,scv=3)")
        ->capture_default_str();
    sub->add_option("-k,--servers", c.k, "number of servers")->capture_default_str()->check(CLI::Range(1, 20));
    sub->add_option("--rho", c.rho, "load lambda E[S] (default 0.5)")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--lambda", c.lambda, "arrival rate, instead of --rho")->check(CLI::PositiveNumber);
  };

  auto* bounds = app.add_subcommand("bounds", "analytic lower bounds at one load");
  add_system(bounds);
  bool breakdown = false;
  bounds->add_option("--tol", c.tol, "absolute WINE tolerance")->capture_default_str();
  bounds->add_flag("--assume-jump-conjecture", c.conjecture, "take J_x = x^2 without the numeric minimization");
  bounds->add_flag("--breakdown", breakdown, "include per-segment WINE contributions");

  auto* simulate = app.add_subcommand("simulate", "discrete-event simulation at one load");
  add_system(simulate);
  std::string model = "mgk", policy = "srpt";
  std::uint64_t n = 1'000'000;
  bool thresholds = false;
  simulate->add_option("--model", model, "mgk, isq or coupled")->check(CLI::IsMember({"mgk", "isq", "coupled"}))->capture_default_str();
  simulate->add_option("--policy", policy, "srpt or fcfs")->check(CLI::IsMember({"srpt", "fcfs"}))->capture_default_str();
  simulate->add_option("-n,--arrivals", n, "number of arrivals")->capture_default_str()->check(CLI::Range(10'000ull, 1'000'000'000ull));
  simulate->add_option("--seed", c.seed, "random seed")->capture_default_str();
  simulate->add_flag("--relevant-work", thresholds, "also report W_x on the default 64-point threshold grid");

  auto* sweep = app.add_subcommand("sweep", "bounds and simulation over a load grid from a config file");
  std::string config, out_dir;
  std::optional<std::uint64_t> sweep_seed;
  std::optional<double> sweep_tol;
  bool sweep_conj = false;
  sweep->add_option("--config", config, "JSON experiment config (see docs/config.md)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "output directory (default: the config's output field)");
  sweep->add_option("--seed", sweep_seed, "replace the config's seed list with this seed");
  sweep->add_option("--tol", sweep_tol, "override tolerances.wine_tol");
  sweep->add_flag("--assume-jump-conjecture", sweep_conj, "override assume_jump_conjecture to true");

  auto* ver = app.add_subcommand("verify", "run the invariant suites (coupling, BAR, WINE identity, J_x, ISQ-2)");
  bool full = false;
  std::uint64_t verify_seed = 1;
  ver->add_option("--seed", verify_seed, "random seed")->capture_default_str();
  ver->add_flag("--full", full, "use the full horizons (minutes) instead of the quick ones");

  auto* print = app.add_subcommand("print-testfn", "dump the symbolic test functions");
  int pk = 3;
  std::string family = "u";
  std::optional<int> pq;
  bool as_json = false;
  print->add_option("-k,--servers", pk, "number of servers")->capture_default_str()->check(CLI::Range(2, 20));
  print->add_option("--family", family, "u (constant drift), v (affine drift) or l (recycling)")
      ->check(CLI::IsMember({"u", "v", "l"}))
      ->capture_default_str();
  print->add_option("--q", pq, "only this speed level q (1..k-1)");
  print->add_flag("--json", as_json, "emit the term list as JSON");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*bounds) return run_bounds(c, breakdown);
    if (*simulate) return run_simulate(c, model, policy, n, thresholds);
    if (*sweep) return run_sweep_cmd(config, out_dir, sweep_seed, sweep_tol, sweep_conj);
    if (*ver) return run_verify(verify_seed, full);
    if (*print) return run_print(pk, family, pq, as_json);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
