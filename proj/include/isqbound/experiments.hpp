#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "isqbound/bounds.hpp"
#include "isqbound/sim.hpp"
#include "isqbound/wine.hpp"
#include "json.hpp"

namespace isqbound {

inline constexpr const char* library_version = "0.1.0";
inline constexpr const char* sweep_schema_version = "isqbound-sweep/1";

// the first fifteen columns are the published interface; the rest were appended later and keep their order
inline const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> cols = {
      "k",        "dist",           "scv",           "rho",
      "naive_lb", "mixex_lb",       "isq_lb",        "isqrec_lb",
      "sim_srptk_mean", "sim_srptk_ci", "uir_mixex_vs_naive", "uir_isq_vs_mixex",
      "uir_isqrec_vs_mixex", "seed", "runtime_s", "srpt1_lb",
      "mginf_lb", "uir_isqrec_vs_naive", "status"};
  return cols;
}

enum class BoundKind { NAIVE, MIXEX, ISQ, ISQ_RECYCLING };

inline std::string to_string(BoundKind b) {
  switch (b) {
    case BoundKind::NAIVE: return "naive";
    case BoundKind::MIXEX: return "mixex";
    case BoundKind::ISQ: return "isq";
    case BoundKind::ISQ_RECYCLING: return "isq_recycling";
  }
  return "?";
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string name = "sweep";
  std::string distribution = "exp(1)";
  int k = 2;
  std::vector<double> rho_grid;
  std::uint64_t n_arrivals = 5'000'000;  // 0 skips simulation
  std::vector<std::uint64_t> seeds = {1};
  std::vector<BoundKind> bounds = {BoundKind::NAIVE, BoundKind::MIXEX, BoundKind::ISQ, BoundKind::ISQ_RECYCLING};
  double wine_tol = 1e-6;
  bool assume_jump_conjecture = false;
  Policy policy = Policy::SRPT;
  int threads = 0;  // 0 picks the hardware concurrency
  std::string output = "out";

  bool wants(BoundKind b) const { return std::find(bounds.begin(), bounds.end(), b) != bounds.end(); }

  // throws ConfigError naming the offending field
  void validate() const {
    auto bad = [](const std::string& field, const std::string& why) { throw ConfigError("config field '" + field + "': " + why); };
    if (k < 1 || k > 20) bad("k", "must be in 1..20, got " + std::to_string(k));
    try {
      (void)parse_distribution(distribution);
    } catch (const std::invalid_argument& e) {
      bad("distribution", e.what());
    }
    if (rho_grid.empty()) bad("rho_grid", "must contain at least one load");
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
      const double r = rho_grid[i];
      if (!(r > 0 && r < 1)) bad("rho_grid[" + std::to_string(i) + "]", "load must lie in (0, 1)");
      if (i > 0 && !(r > rho_grid[i - 1])) bad("rho_grid[" + std::to_string(i) + "]", "grid must be strictly increasing");
    }
    if (seeds.empty()) bad("seeds", "must contain at least one seed");
    if (bounds.empty()) bad("bounds", "must request at least one bound");
    if (n_arrivals != 0 && n_arrivals < 10'000) bad("n_arrivals", "must be 0 (no simulation) or at least 10000");
    if (!(wine_tol > 0)) bad("tolerances.wine_tol", "must be positive");
    if (threads < 0) bad("threads", "must be nonnegative");
  }
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline std::vector<double> expand_grid(const nlohmann::json& g) {
  if (g.is_array()) return g.get<std::vector<double>>();
  const double start = g.at("start").get<double>(), stop = g.at("stop").get<double>(), step = g.at("step").get<double>();
  if (!(step > 0) || stop < start) throw ConfigError("config field 'rho_grid': need step > 0 and stop >= start");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (long i = 0; i < n; ++i) out.push_back(std::round((start + i * step) * 1e12) / 1e12);
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known = {"name",   "distribution", "k",       "rho_grid",
                                                 "n_arrivals", "seeds", "bounds", "tolerances",
                                                 "assume_jump_conjecture", "policy", "threads", "output"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("config field '" + key + "': unknown key");

  ExperimentConfig c;
  std::string field;
  try {
    if (j.contains(field = "name")) c.name = j[field].get<std::string>();
    if (j.contains(field = "distribution")) c.distribution = j[field].get<std::string>();
    if (j.contains(field = "k")) c.k = j[field].get<int>();
    if (j.contains(field = "rho_grid")) c.rho_grid = detail::expand_grid(j[field]);
    if (j.contains(field = "n_arrivals")) c.n_arrivals = j[field].get<std::uint64_t>();
    if (j.contains(field = "seeds")) c.seeds = j[field].get<std::vector<std::uint64_t>>();
    if (j.contains(field = "bounds")) {
      c.bounds.clear();
      for (const auto& b : j[field]) {
        const auto s = b.get<std::string>();
        if (s == "naive") c.bounds.push_back(BoundKind::NAIVE);
        else if (s == "mixex") c.bounds.push_back(BoundKind::MIXEX);
        else if (s == "isq") c.bounds.push_back(BoundKind::ISQ);
        else if (s == "isq_recycling") c.bounds.push_back(BoundKind::ISQ_RECYCLING);
        else throw ConfigError("config field 'bounds': unknown bound '" + s + "'");
      }
    }
    if (j.contains(field = "tolerances")) {
      for (const auto& [key, v] : j[field].items()) {
        if (key != "wine_tol") throw ConfigError("config field 'tolerances." + key + "': unknown key");
        c.wine_tol = v.get<double>();
      }
    }
    if (j.contains(field = "assume_jump_conjecture")) c.assume_jump_conjecture = j[field].get<bool>();
    if (j.contains(field = "policy")) {
      const auto s = j[field].get<std::string>();
      if (s == "srpt") c.policy = Policy::SRPT;
      else if (s == "fcfs") c.policy = Policy::FCFS;
      else throw ConfigError("config field 'policy': expected srpt or fcfs, got '" + s + "'");
    }
    if (j.contains(field = "threads")) c.threads = j[field].get<int>();
    if (j.contains(field = "output")) c.output = j[field].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json b = nlohmann::json::array();
  for (auto x : c.bounds) b.push_back(to_string(x));
  return {{"name", c.name},
          {"distribution", c.distribution},
          {"k", c.k},
          {"rho_grid", c.rho_grid},
          {"n_arrivals", c.n_arrivals},
          {"seeds", c.seeds},
          {"bounds", b},
          {"tolerances", {{"wine_tol", c.wine_tol}}},
          {"assume_jump_conjecture", c.assume_jump_conjecture},
          {"policy", to_string(c.policy)},
          {"threads", c.threads},
          {"output", c.output}};
}

// (novel - prior) / (upper - prior): the fraction of the gap between a prior lower bound and an upper bound
// that a new lower bound closes
inline double uir(double novel_lower, double prior_lower, double upper) {
  if (!(upper > prior_lower)) throw std::domain_error("degenerate uncertainty region");
  return (novel_lower - prior_lower) / (upper - prior_lower);
}

inline constexpr double missing = std::numeric_limits<double>::quiet_NaN();

struct SweepRow {
  int k = 0;
  std::string dist;
  double scv = missing, rho = missing, lambda = missing;
  double srpt1_lb = missing, mginf_lb = missing, naive_lb = missing;
  double mixex_lb = missing, isq_lb = missing, isqrec_lb = missing;
  double bound_error = 0;  // largest WINE error estimate among the computed bounds
  double sim_mean = missing, sim_ci = missing;
  double uir_mixex_vs_naive = missing, uir_isq_vs_mixex = missing, uir_isqrec_vs_mixex = missing,
         uir_isqrec_vs_naive = missing;
  std::uint64_t seed = 0;
  double runtime_s = 0;
  std::string status = "ok";
};

namespace detail {

inline bool has(double v) { return !std::isnan(v); }

inline double checked_uir(double novel, double prior, double upper) {
  if (!has(novel) || !has(prior) || !has(upper) || !(upper > prior)) return missing;
  return uir(novel, prior, upper);
}

// ordering and UIR checks; returns a description of every violation
inline std::vector<std::string> row_violations(const SweepRow& r) {
  std::vector<std::string> out;
  const double slack = 2 * r.bound_error + 1e-12;
  auto le = [&](double a, double b, double s, const char* what) {
    if (has(a) && has(b) && a > b + s) out.push_back(what);
  };
  le(r.naive_lb, r.mixex_lb, slack, "naive > mixex");
  le(r.mixex_lb, r.isq_lb, slack, "mixex > isq");
  le(r.isq_lb, r.isqrec_lb, slack, "isq > isq_recycling");
  const double ci = has(r.sim_ci) ? r.sim_ci : 0.0;
  for (double b : {r.naive_lb, r.mixex_lb, r.isq_lb, r.isqrec_lb}) le(b, r.sim_mean, ci + slack, "bound above simulated E[T] + CI");
  for (double u : {r.uir_mixex_vs_naive, r.uir_isq_vs_mixex, r.uir_isqrec_vs_mixex, r.uir_isqrec_vs_naive})
    if (has(u) && u > 1) out.push_back("UIR above 1");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string fmt(double v) {
  if (!has(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string csv_header() {
  std::string h;
  for (const auto& c : sweep_csv_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

inline std::string to_csv_line(const SweepRow& r) {
  using detail::fmt;
  const std::vector<std::string> cells = {std::to_string(r.k),
                                          detail::csv_quote(r.dist),
                                          fmt(r.scv),
                                          fmt(r.rho),
                                          fmt(r.naive_lb),
                                          fmt(r.mixex_lb),
                                          fmt(r.isq_lb),
                                          fmt(r.isqrec_lb),
                                          fmt(r.sim_mean),
                                          fmt(r.sim_ci),
                                          fmt(r.uir_mixex_vs_naive),
                                          fmt(r.uir_isq_vs_mixex),
                                          fmt(r.uir_isqrec_vs_mixex),
                                          std::to_string(r.seed),
                                          fmt(r.runtime_s),
                                          fmt(r.srpt1_lb),
                                          fmt(r.mginf_lb),
                                          fmt(r.uir_isqrec_vs_naive),
                                          detail::csv_quote(r.status)};
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  return line;
}

// reads a sweep CSV back; the header must contain every published column
inline std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = detail::csv_split(line);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> absent;
  for (const auto& c : sweep_csv_columns())
    if (!col(c)) absent.push_back(c);
  if (!absent.empty()) {
    std::string msg = path.string() + ": missing columns:";
    for (const auto& a : absent) msg += " " + a;
    throw std::runtime_error(msg);
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::csv_split(line);
    if (cells.size() != header.size()) throw std::runtime_error(path.string() + ": ragged row");
    auto num = [&](const char* name) {
      const auto& s = cells[*col(name)];
      return s.empty() ? missing : std::stod(s);
    };
    SweepRow r;
    r.k = std::stoi(cells[*col("k")]);
    r.dist = cells[*col("dist")];
    r.scv = num("scv");
    r.rho = num("rho");
    r.naive_lb = num("naive_lb");
    r.mixex_lb = num("mixex_lb");
    r.isq_lb = num("isq_lb");
    r.isqrec_lb = num("isqrec_lb");
    r.sim_mean = num("sim_srptk_mean");
    r.sim_ci = num("sim_srptk_ci");
    r.uir_mixex_vs_naive = num("uir_mixex_vs_naive");
    r.uir_isq_vs_mixex = num("uir_isq_vs_mixex");
    r.uir_isqrec_vs_mixex = num("uir_isqrec_vs_mixex");
    r.seed = std::stoull(cells[*col("seed")]);
    r.runtime_s = num("runtime_s");
    r.srpt1_lb = num("srpt1_lb");
    r.mginf_lb = num("mginf_lb");
    r.uir_isqrec_vs_naive = num("uir_isqrec_vs_naive");
    r.status = cells[*col("status")];
    rows.push_back(r);
  }
  return rows;
}

// bounds, simulation and UIR for one (rho, seed) point; errors land in status instead of escaping
inline SweepRow run_point(const ExperimentConfig& cfg, const BoundEngine& eng, double rho, std::uint64_t seed,
                          SimResult* sim_out = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepRow r;
  r.k = cfg.k;
  r.seed = seed;
  r.rho = rho;
  try {
    const Distribution d = parse_distribution(cfg.distribution);
    r.dist = d.label();
    r.scv = d.scv();
    const auto p = SystemParams::from_load(cfg.k, rho, d);
    r.lambda = p.lambda;
    WineOptions wo;
    wo.tol = cfg.wine_tol;
    auto run = [&](CurveSet s) {
      const auto w = wine_integrate(eng, p, s, wo);
      r.bound_error = std::max(r.bound_error, w.abs_error_estimate);
      return w.value;
    };
    if (cfg.wants(BoundKind::NAIVE)) {
      r.srpt1_lb = run({Curve::SRPT1});
      r.mginf_lb = run({Curve::MGINF});
      r.naive_lb = std::max(r.srpt1_lb, r.mginf_lb);
    }
    if (cfg.wants(BoundKind::MIXEX)) r.mixex_lb = run(CurveSet::mixex());
    if (cfg.wants(BoundKind::ISQ)) r.isq_lb = run(CurveSet::isq());
    if (cfg.wants(BoundKind::ISQ_RECYCLING)) r.isqrec_lb = run(CurveSet::isq_recycling());
    if (cfg.n_arrivals > 0) {
      SimOptions so;
      so.n_arrivals = cfg.n_arrivals;
      so.seed = seed;
      const auto s = simulate_mgk(p, cfg.policy, so);
      r.sim_mean = s.response_time.mean;
      r.sim_ci = s.response_time.ci;
      if (sim_out) *sim_out = s;
    }
    r.uir_mixex_vs_naive = detail::checked_uir(r.mixex_lb, r.naive_lb, r.sim_mean);
    r.uir_isq_vs_mixex = detail::checked_uir(r.isq_lb, r.mixex_lb, r.sim_mean);
    r.uir_isqrec_vs_mixex = detail::checked_uir(r.isqrec_lb, r.mixex_lb, r.sim_mean);
    r.uir_isqrec_vs_naive = detail::checked_uir(r.isqrec_lb, r.naive_lb, r.sim_mean);
    auto v = detail::row_violations(r);
    if (std::abs(p.lambda * d.mean() - rho) > 1e-12) v.push_back("lambda E[S] != rho");
    if (!v.empty()) {
      r.status = "invariant:";
      for (const auto& s : v) r.status += " " + s + ";";
    }
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
  }
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline nlohmann::json to_json(const SimResult& s) {
  auto est = [](const Estimate& e) { return nlohmann::json{{"mean", e.mean}, {"ci95", e.ci}}; };
  nlohmann::json rel = nlohmann::json::array();
  for (std::size_t i = 0; i < s.relevant_work.size(); ++i) rel.push_back({{"x", s.thresholds[i]}, {"value", est(s.relevant_work[i])}});
  return {{"mean_response_time", est(s.response_time)},
          {"mean_work", est(s.work)},
          {"relevant_work", rel},
          {"arrivals", s.arrivals},
          {"arrivals_completed", s.arrivals_completed},
          {"horizon", s.horizon},
          {"seed", s.seed}};
}

struct SweepOutput {
  std::vector<SweepRow> rows;
  std::filesystem::path csv, sidecar, runs;
};

// runs every (rho, seed) point on a worker pool; rows reach the CSV in (rho, seed) order as soon as
// every earlier row is done
inline SweepOutput run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  SweepOutput out;
  out.csv = out_dir / (cfg.name + ".csv");
  out.sidecar = out_dir / (cfg.name + ".json");
  out.runs = out_dir / (cfg.name + ".runs.jsonl");

  BoundEngine::Options eo;
  eo.assume_jump_conjecture = cfg.assume_jump_conjecture;
  const BoundEngine eng(cfg.k, eo);

  struct Task {
    double rho;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double rho : cfg.rho_grid)
    for (auto seed : cfg.seeds) tasks.push_back({rho, seed});

  std::vector<std::optional<SweepRow>> done(tasks.size());
  std::vector<nlohmann::json> records(tasks.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      SimResult sim;
      SweepRow row = run_point(cfg, eng, tasks[i].rho, tasks[i].seed, &sim);
      nlohmann::json rec = {{"rho", row.rho}, {"seed", row.seed}, {"k", row.k}, {"dist", row.dist}, {"status", row.status}};
      if (cfg.n_arrivals > 0 && row.status.rfind("error", 0) != 0) rec["simulation"] = to_json(sim);
      {
        std::lock_guard<std::mutex> lock(mu);
        done[i] = std::move(row);
        records[i] = std::move(rec);
      }
      cv.notify_one();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min<std::size_t>(cfg.threads > 0 ? cfg.threads : hw, tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);

  std::ofstream csv(out.csv), runs(out.runs);
  if (!csv || !runs) throw std::runtime_error("cannot write into " + out_dir.string());
  csv << csv_header() << '\n' << std::flush;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[i].has_value(); });
    csv << to_csv_line(*done[i]) << '\n' << std::flush;
    runs << records[i].dump() << '\n' << std::flush;
    out.rows.push_back(*done[i]);
  }
  for (auto& t : pool) t.join();

  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : out.rows)
    if (r.status != "ok") failures.push_back({{"rho", r.rho}, {"seed", r.seed}, {"status", r.status}});
  const SimOptions sim_defaults;
  const nlohmann::json sidecar = {
      {"schema", sweep_schema_version},
      {"library_version", library_version},
      {"columns", sweep_csv_columns()},
      {"config", to_json(cfg)},
      {"seeds", cfg.seeds},
      {"tolerances", {{"wine_tol", cfg.wine_tol}}},
      {"assume_jump_conjecture", cfg.assume_jump_conjecture},
      {"simulation_method",
       {{"warmup_fraction", sim_defaults.warmup_fraction},
        {"batches", sim_defaults.batches},
        {"ci", "batch means, Student t 95%"},
        {"note", "warm-up and CI method are choices of this tool, not taken from the source experiments"}}},
      {"uir_upper_bound", "simulated mean response time"},
      {"naive_definition", "max of the SRPT1-only and MGINF-only WINE bounds"},
      {"rows", out.rows.size()},
      {"failures", failures}};
  std::ofstream(out.sidecar) << sidecar.dump(2) << '\n';
  return out;
}

struct UirPoint {
  double rho;
  std::uint64_t seed;
  double mixex_vs_naive, isq_vs_mixex, isqrec_vs_mixex, isqrec_vs_naive;
};

// UIR of MixEx against the naive bound and of ISQ / ISQ-Recycling against MixEx, per row
inline std::vector<UirPoint> report_uir_curves(const std::vector<SweepRow>& rows) {
  std::vector<UirPoint> out;
  for (const auto& r : rows) {
    const std::pair<const char*, double> need[] = {{"naive_lb", r.naive_lb}, {"mixex_lb", r.mixex_lb}, {"isq_lb", r.isq_lb},
                                                  {"isqrec_lb", r.isqrec_lb}, {"sim_srptk_mean", r.sim_mean}};
    for (const auto& [name, v] : need)
      if (!detail::has(v))
        throw std::invalid_argument(std::string("report_uir_curves: missing column ") + name + " at rho " +
                                    detail::fmt(r.rho));
    out.push_back({r.rho, r.seed, uir(r.mixex_lb, r.naive_lb, r.sim_mean), uir(r.isq_lb, r.mixex_lb, r.sim_mean),
                   uir(r.isqrec_lb, r.mixex_lb, r.sim_mean), uir(r.isqrec_lb, r.naive_lb, r.sim_mean)});
  }
  return out;
}

inline void write_uir_csv(const std::vector<UirPoint>& pts, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "rho,seed,uir_mixex_vs_naive,uir_isq_vs_mixex,uir_isqrec_vs_mixex,uir_isqrec_vs_naive\n";
  for (const auto& p : pts)
    f << detail::fmt(p.rho) << ',' << p.seed << ',' << detail::fmt(p.mixex_vs_naive) << ',' << detail::fmt(p.isq_vs_mixex)
      << ',' << detail::fmt(p.isqrec_vs_mixex) << ',' << detail::fmt(p.isqrec_vs_naive) << '\n';
}

}  // namespace isqbound
