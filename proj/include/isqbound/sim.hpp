#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isqbound/bounds.hpp"
#include "isqbound/symexpr.hpp"

namespace isqbound {

enum class Policy { SRPT, FCFS };

inline std::string to_string(Policy p) { return p == Policy::SRPT ? "srpt" : "fcfs"; }

// Poisson arrivals with i.i.d. sizes; one seed fixes the whole sequence
class ArrivalStream {
 public:
  struct Arrival {
    double gap;
    double size;
  };

  ArrivalStream(double lambda, Distribution d, std::uint64_t seed) : lambda_(lambda), dist_(std::move(d)), rng_(seed) {}

  Arrival next() {
    const double u = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    const double gap = -std::log(u) / lambda_;
    return {gap, dist_.sample(rng_)};
  }

 private:
  double lambda_;
  Distribution dist_;
  std::mt19937_64 rng_;
};

struct Estimate {
  double mean = 0;
  double ci = 0;  // 95% half-width from batch means
};

struct SimOptions {
  std::uint64_t n_arrivals = 5'000'000;
  std::uint64_t seed = 1;
  double warmup_fraction = 0.05;
  int batches = 20;
  std::vector<double> thresholds;
  double riemann_step = 0;  // > 0 also samples relevant work on a fixed time grid
};

struct SimResult {
  Estimate response_time;  // M/G/k only
  Estimate work;
  std::vector<double> thresholds;
  std::vector<Estimate> relevant_work;
  std::vector<double> riemann_relevant_work;
  std::vector<Estimate> speed_occupancy;  // ISQ only, index q = speed q/k
  std::uint64_t arrivals = 0;
  std::uint64_t arrivals_completed = 0;
  double horizon = 0;
  std::uint64_t seed = 0;
};

// 64 geometric thresholds from the 1% to the 99.99% quantile
inline std::vector<double> default_thresholds(const Distribution& d, int n = 64) {
  double lo = d.quantile(0.01), hi = d.quantile(0.9999);
  if (!(lo > 0)) lo = 1e-3 * d.mean();
  if (!(hi > lo)) hi = lo * (1 + 1e-9) + 1e-12;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
  return xs;
}

namespace detail {

// ratio estimator over batches with a Student-t half-width
class BatchStat {
 public:
  explicit BatchStat(int batches = 20) : num_(batches, 0.0), den_(batches, 0.0) {}
  void add(int b, double num, double den) {
    num_[b] += num;
    den_[b] += den;
  }
  Estimate estimate() const {
    const int n = static_cast<int>(num_.size());
    double tn = 0, td = 0;
    for (int b = 0; b < n; ++b) {
      tn += num_[b];
      td += den_[b];
    }
    Estimate e;
    e.mean = td > 0 ? tn / td : 0.0;
    double ss = 0;
    int used = 0;
    for (int b = 0; b < n; ++b)
      if (den_[b] > 0) {
        const double d = num_[b] / den_[b] - e.mean;
        ss += d * d;
        ++used;
      }
    if (used >= 2) {
      const boost::math::students_t t(used - 1);
      e.ci = boost::math::quantile(boost::math::complement(t, 0.025)) * std::sqrt(ss / (used - 1) / used);
    }
    return e;
  }

 private:
  std::vector<double> num_, den_;
};

// batch of arrival index i, or -1 during warm-up
struct BatchPlan {
  std::uint64_t warmup, per_batch;
  int batches;

  BatchPlan(std::uint64_t n, double warm, int b) : batches(b) {
    if (b < 2) throw std::invalid_argument("need at least 2 batches");
    warmup = static_cast<std::uint64_t>(std::floor(warm * static_cast<double>(n)));
    per_batch = (n - warmup) / b;
    if (per_batch == 0) throw std::invalid_argument("too few arrivals for the batch plan");
  }
  int of(std::uint64_t i) const {
    if (i < warmup) return -1;
    const std::uint64_t b = (i - warmup) / per_batch;
    return b < static_cast<std::uint64_t>(batches) ? static_cast<int>(b) : -1;
  }
  std::uint64_t end() const { return warmup + per_batch * batches; }
};

// integral over time of r * 1{r <= x} while r falls at rate 1/k for dt
inline double relevant_integral(double r0, double dt, int k, double x) {
  const double r1 = r0 - dt / k;
  const double top = std::min(r0, x);
  if (!(r1 < top)) return 0.0;
  return 0.5 * k * (top * top - r1 * r1);
}

}  // namespace detail

// M/G/k with k servers of rate 1/k under SRPT-k or FCFS-k
class MgkSystem {
 public:
  struct Job {
    double rem;
    double arrival;
    std::uint64_t id;
  };

  MgkSystem(int k, Policy policy, std::vector<double> thresholds = {})
      : k_(k), policy_(policy), x_(std::move(thresholds)), waiting_rel_(x_.size(), 0.0) {}

  double now() const { return t_; }
  double work() const { return work_; }
  std::size_t size() const { return served_.size() + waiting_count(); }
  bool empty() const { return size() == 0; }
  int served_count() const { return static_cast<int>(served_.size()); }
  const std::vector<double>& thresholds() const { return x_; }

  double relevant_work(std::size_t j) const {
    double acc = waiting_rel_[j];
    for (const auto& s : served_)
      if (s.rem <= x_[j]) acc += s.rem;
    return acc;
  }

  // W_x after the served jobs have run for a further off time units
  double relevant_work_after(std::size_t j, double off) const {
    double acc = waiting_rel_[j];
    for (const auto& s : served_) {
      const double r = s.rem - off / k_;
      if (r <= x_[j] && r > 0) acc += r;
    }
    return acc;
  }

  // sink(t0, dt, w_int, wx_int, sys) receives the integrals of W and W_x over each segment,
  // done(job, t) each completion, epoch(t, dt) each completion epoch with the segment length before it
  template <class Sink, class Done, class Epoch>
  void advance_to(double t_end, Sink&& sink, Done&& done, Epoch&& epoch) {
    advance_by(t_end - t_, sink, done, epoch);
    if (std::isfinite(t_end)) t_ = t_end;
  }

  // steps are built from durations so that a caller adding the same durations sees identical values
  // (absolute clocks near 1e6 would leave ~1e-10 of rounding per step)
  template <class Sink, class Done, class Epoch>
  void advance_by(double duration, Sink&& sink, Done&& done, Epoch&& epoch) {
    double left = duration;
    while (true) {
      double min_rem = std::numeric_limits<double>::infinity();
      std::size_t argmin = 0;
      for (std::size_t i = 0; i < served_.size(); ++i)
        if (served_[i].rem < min_rem) {
          min_rem = served_[i].rem;
          argmin = i;
        }
      const double need = k_ * min_rem;
      const bool completes = !served_.empty() && need <= left;
      if (!completes && !std::isfinite(left)) break;  // drained
      const double dt = completes ? need : left;
      if (dt > 0) integrate(dt, sink);
      t_ += dt;
      if (!completes) break;
      left -= dt;
      // the finishing job can keep a rounding residue after the drain
      served_[argmin].rem = 0;
      // every served job with the minimal remaining size finishes now
      for (std::size_t i = 0; i < served_.size();) {
        if (served_[i].rem <= 0) {
          done(served_[i], t_);
          served_[i] = served_.back();
          served_.pop_back();
        } else {
          ++i;
        }
      }
      refill();
      if (empty()) work_ = 0;
      epoch(t_, dt);
    }
  }

  void arrive(double size, std::uint64_t id) {
    Job j{size, t_, id};
    work_ += size;
    if (static_cast<int>(served_.size()) < k_) {
      served_.push_back(j);
      return;
    }
    if (policy_ == Policy::SRPT) {
      auto worst = std::max_element(served_.begin(), served_.end(), [](const Job& a, const Job& b) {
        return a.rem < b.rem || (a.rem == b.rem && a.arrival < b.arrival);
      });
      if (size < worst->rem) std::swap(*worst, j);
    }
    push_waiting(j);
  }

 private:
  struct Later {
    bool operator()(const Job& a, const Job& b) const {
      if (a.rem != b.rem) return a.rem > b.rem;
      return a.id > b.id;
    }
  };

  std::size_t waiting_count() const { return policy_ == Policy::SRPT ? srpt_wait_.size() : fcfs_wait_.size(); }

  void push_waiting(const Job& j) {
    add_waiting_rel(j.rem, +1);
    if (policy_ == Policy::SRPT) srpt_wait_.push(j);
    else fcfs_wait_.push_back(j);
  }

  void refill() {
    while (static_cast<int>(served_.size()) < k_ && waiting_count() > 0) {
      Job j;
      if (policy_ == Policy::SRPT) {
        j = srpt_wait_.top();
        srpt_wait_.pop();
      } else {
        j = fcfs_wait_.front();
        fcfs_wait_.pop_front();
      }
      add_waiting_rel(j.rem, -1);
      served_.push_back(j);
    }
  }

  void add_waiting_rel(double rem, int sign) {
    for (std::size_t i = 0; i < x_.size(); ++i)
      if (rem <= x_[i]) waiting_rel_[i] += sign * rem;
  }

  template <class Sink>
  void integrate(double dt, Sink& sink) {
    double w_int = work_ * dt;
    const double drain = dt / k_;
    w_int -= served_.size() * 0.5 * drain * dt;
    wx_scratch_.assign(x_.size(), 0.0);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      double acc = waiting_rel_[i] * dt;
      for (const auto& s : served_) acc += detail::relevant_integral(s.rem, dt, k_, x_[i]);
      wx_scratch_[i] = acc;
    }
    sink(t_, dt, w_int, wx_scratch_, *this);
    for (auto& s : served_) s.rem -= drain;
    work_ -= served_.size() * drain;
    if (work_ < 0) work_ = 0;
  }

  int k_;
  Policy policy_;
  std::vector<double> x_;
  std::vector<double> waiting_rel_;
  std::vector<double> wx_scratch_;
  std::vector<Job> served_;
  std::priority_queue<Job, std::vector<Job>, Later> srpt_wait_;
  std::deque<Job> fcfs_wait_;
  double t_ = 0;
  double work_ = 0;
};

// single-station increasing-speed queue; speed q/k rises by one step per arrival and resets when empty
struct IsqState {
  double w = 0;
  int q = 0;

  // integral of W over dt, then the state after dt; idle_time receives the part spent empty
  double advance(double dt, int k, double* idle_time = nullptr, double* busy_time = nullptr) {
    if (q == 0) {
      if (idle_time) *idle_time = dt;
      if (busy_time) *busy_time = 0;
      return 0.0;
    }
    const double rate = static_cast<double>(q) / k;
    const double t_empty = w / rate;
    if (t_empty <= dt) {
      const double integral = 0.5 * w * t_empty;
      if (idle_time) *idle_time = dt - t_empty;
      if (busy_time) *busy_time = t_empty;
      w = 0;
      q = 0;
      return integral;
    }
    const double integral = w * dt - 0.5 * rate * dt * dt;
    w -= rate * dt;
    if (idle_time) *idle_time = 0;
    if (busy_time) *busy_time = dt;
    return integral;
  }
  void arrive(double size, int k) {
    w += size;
    q = std::min(q + 1, k);
  }
};

inline SimResult simulate_mgk(const SystemParams& p, Policy policy, const SimOptions& opt) {
  const detail::BatchPlan plan(opt.n_arrivals, opt.warmup_fraction, opt.batches);
  ArrivalStream stream(p.lambda, p.dist, opt.seed);
  MgkSystem sys(p.k, policy, opt.thresholds);
  const std::size_t nx = opt.thresholds.size();
  detail::BatchStat resp(opt.batches), work(opt.batches);
  std::vector<detail::BatchStat> rel(nx, detail::BatchStat(opt.batches));
  std::vector<double> riemann(nx, 0.0);
  double riemann_next = 0, riemann_time = 0;
  bool riemann_started = false;
  int cur = -1;
  double horizon = 0;
  std::uint64_t completed = 0;

  auto sink = [&](double t0, double dt, double w_int, const std::vector<double>& wx, const MgkSystem& s) {
    if (cur < 0) return;
    work.add(cur, w_int, dt);
    for (std::size_t i = 0; i < nx; ++i) rel[i].add(cur, wx[i], dt);
    horizon += dt;
    if (opt.riemann_step > 0) {
      if (!riemann_started) {
        riemann_next = t0;
        riemann_started = true;
      }
      // left-point samples of W_x on the fixed grid, served jobs moved linearly
      while (riemann_next < t0 + dt) {
        const double off = riemann_next - t0;
        for (std::size_t i = 0; i < nx; ++i) riemann[i] += s.relevant_work_after(i, off) * opt.riemann_step;
        riemann_next += opt.riemann_step;
        riemann_time += opt.riemann_step;
      }
    }
  };
  auto done = [&](const MgkSystem::Job& j, double t) {
    const int b = plan.of(j.id);
    if (b >= 0) {
      resp.add(b, t - j.arrival, 1.0);
      ++completed;
    }
  };
  auto no_epoch = [](double, double) {};

  double t = 0;
  for (std::uint64_t i = 0; i < opt.n_arrivals; ++i) {
    const auto a = stream.next();
    t += a.gap;
    sys.advance_to(t, sink, done, no_epoch);
    cur = plan.of(i);
    if (i >= plan.end()) cur = -1;
    sys.arrive(a.size, i);
  }
  cur = -1;
  sys.advance_to(std::numeric_limits<double>::infinity(), sink, done, no_epoch);

  SimResult r;
  r.response_time = resp.estimate();
  r.work = work.estimate();
  r.thresholds = opt.thresholds;
  for (auto& s : rel) r.relevant_work.push_back(s.estimate());
  if (opt.riemann_step > 0 && riemann_time > 0)
    for (double v : riemann) r.riemann_relevant_work.push_back(v / riemann_time);
  r.arrivals = opt.n_arrivals;
  r.arrivals_completed = completed;
  r.horizon = horizon;
  r.seed = opt.seed;
  return r;
}

struct IsqSimResult {
  Estimate work;
  std::vector<double> thresholds;
  std::vector<Estimate> relevant_work;  // Sep-ISQ: truncated ISQ below x plus the M/G/inf part above x
  std::vector<Estimate> speed_occupancy;  // index q is speed q/k
  std::uint64_t arrivals = 0;
  double horizon = 0;
  std::uint64_t seed = 0;
};

// ISQ-k driven by the same arrival sequence as simulate_mgk with the same seed
inline IsqSimResult simulate_isq(const SystemParams& p, const SimOptions& opt) {
  const detail::BatchPlan plan(opt.n_arrivals, opt.warmup_fraction, opt.batches);
  ArrivalStream stream(p.lambda, p.dist, opt.seed);
  const int k = p.k;
  const std::size_t nx = opt.thresholds.size();
  IsqState main;
  std::vector<IsqState> trunc(nx);
  detail::BatchStat work(opt.batches);
  std::vector<detail::BatchStat> rel(nx, detail::BatchStat(opt.batches));
  std::vector<detail::BatchStat> occ(k + 1, detail::BatchStat(opt.batches));
  double horizon = 0;
  int cur = -1;
  double t = 0;
  for (std::uint64_t i = 0; i < opt.n_arrivals; ++i) {
    const auto a = stream.next();
    const double dt = a.gap;
    t += dt;
    const int q_before = main.q;
    double idle = 0, busy = 0;
    const double w_int = main.advance(dt, k, &idle, &busy);
    for (std::size_t j = 0; j < nx; ++j) {
      const double v = trunc[j].advance(dt, k);
      if (cur >= 0) rel[j].add(cur, v, dt);
    }
    if (cur >= 0) {
      work.add(cur, w_int, dt);
      for (int q = 0; q <= k; ++q) occ[q].add(cur, q == q_before ? busy : 0.0, dt);
      occ[0].add(cur, idle, 0.0);
      horizon += dt;
    }
    cur = plan.of(i);
    main.arrive(a.size, k);
    for (std::size_t j = 0; j < nx; ++j) {
      if (a.size <= opt.thresholds[j]) {
        trunc[j].arrive(a.size, k);
      } else if (cur >= 0) {
        // a job above x serves alone at rate 1/k and holds W_x = remaining for its last k x time units
        const double x = opt.thresholds[j];
        rel[j].add(cur, 0.5 * k * x * x, 0.0);
      }
    }
  }
  IsqSimResult r;
  r.work = work.estimate();
  r.thresholds = opt.thresholds;
  for (auto& s : rel) r.relevant_work.push_back(s.estimate());
  for (auto& s : occ) r.speed_occupancy.push_back(s.estimate());
  r.arrivals = opt.n_arrivals;
  r.horizon = horizon;
  r.seed = opt.seed;
  return r;
}

struct CoupledResult {
  double max_violation = -std::numeric_limits<double>::infinity();  // max over epochs of W_isq - W_k
  double violation_time = 0;
  std::uint64_t epochs = 0;
};

// runs M/G/k and ISQ-k on one arrival sequence and checks W_isq <= W_k at every M/G/k event epoch;
// between epochs the gap is piecewise linear with its only other kink where ISQ empties
inline CoupledResult simulate_coupled(const SystemParams& p, Policy policy, std::uint64_t n_arrivals,
                                      std::uint64_t seed) {
  ArrivalStream stream(p.lambda, p.dist, seed);
  MgkSystem sys(p.k, policy);
  IsqState isq;
  CoupledResult r;
  double t = 0, left = 0;
  auto check = [&](double at) {
    const double gap = isq.w - sys.work();
    if (gap > r.max_violation) {
      r.max_violation = gap;
      r.violation_time = at;
    }
    ++r.epochs;
  };
  // the ISQ side replays the exact segment lengths the M/G/k side used
  auto epoch = [&](double at, double dt) {
    isq.advance(dt, p.k);
    left -= dt;
    check(at);
  };
  auto sink = [](double, double, double, const std::vector<double>&, const MgkSystem&) {};
  auto done = [](const MgkSystem::Job&, double) {};
  for (std::uint64_t i = 0; i < n_arrivals; ++i) {
    const auto a = stream.next();
    t += a.gap;
    left = a.gap;
    sys.advance_by(a.gap, sink, done, epoch);
    isq.advance(left, p.k);
    check(t);
    sys.arrive(a.size, i);
    isq.arrive(a.size, p.k);
    check(t);
  }
  return r;
}

// time average of the generator applied to the u (drift) or v (second-moment) test functions along an
// ISQ-k path; stationarity makes it zero
inline Estimate measure_bar_residual(const SystemParams& p, Family family, const SimOptions& opt,
                                     const BuildOptions& build = {}) {
  if (family == Family::L) throw std::invalid_argument("measure_bar_residual: family must be U or V");
  const int k = p.k;
  const auto uv = build_uv(k, build);
  const TestFunctions& tf = family == Family::U ? uv.u : uv.v;
  std::vector<Compiled<double>> gen;
  for (int q = 0; q <= k; ++q)
    gen.push_back(Skeleton<double>(generator(tf, q)).compile(p.dist, p.lambda));
  const double idle_rate = gen[0](0.0);

  const detail::BatchPlan plan(opt.n_arrivals, opt.warmup_fraction, opt.batches);
  ArrivalStream stream(p.lambda, p.dist, opt.seed);
  IsqState s;
  detail::BatchStat stat(opt.batches);
  int cur = -1;
  for (std::uint64_t i = 0; i < opt.n_arrivals; ++i) {
    const auto a = stream.next();
    const double dt = a.gap;
    const int q = s.q;
    const double w0 = s.w;
    double idle = 0, busy = 0;
    s.advance(dt, k, &idle, &busy);
    if (cur >= 0) {
      double v = idle_rate * idle;
      // W falls at speed q/k, so dt = (k/q) dw
      if (q > 0) v += static_cast<double>(k) / q * gen[q].integral(s.w, w0);
      stat.add(cur, v, dt);
    }
    cur = plan.of(i);
    s.arrive(a.size, k);
  }
  return stat.estimate();
}

}  // namespace isqbound
