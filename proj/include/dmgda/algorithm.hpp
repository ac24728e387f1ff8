#pragma once

// The decentralized momentum gradient-descent-ascent loop.
//
// Per step t -> t+1, every node i:
//   (a) mixes neighbor iterates and takes a tracked-gradient step,
//         xt^i = sum_j W_ij x^j_t - gamma w^i_{x,t}
//         yt^i = sum_j W_ij y^j_t + lambda w^i_{y,t}
//   (b) relaxes,  x^i_{t+1} = x^i_t + eta_t (xt^i - x^i_t)   (same for y)
//   (c) draws ONE fresh sample and evaluates both partial gradients at the
//       new point and at the old point with that same sample (the shared
//       sample is what makes the momentum recursion variance-reducing)
//   (d) updates the momentum estimates
//         u^i_{x,t+1} = g_x(new) + (1 - alpha_{t+1}) (u^i_{x,t} - g_x(old))
//         u^i_{y,t+1} = g_y(new) + (1 - beta_{t+1}) (u^i_{y,t} - g_y(old))
//   (e) gossips the trackers,
//         w^i_{.,t+1} = sum_j W_ij (w^j_{.,t} + u^j_{.,t+1} - u^j_{.,t})
//
// Initialization (t = 0): all nodes at (x0, y0) (plus optional per-node
// spread), u_0 = one stochastic gradient sample per node, w_0 = mix(u_0).
//
// Invariants maintained and exposed for verification:
//   - tracking: mean(u) == mean(w) at every t (mixing preserves means)
//   - cost accounting: exactly 4 stochastic gradients per node per step,
//     plus the single sample at initialization (total 4mT + m)
//   - determinism: per-(node, iteration) RNG streams and per-column mixing
//     make serial and parallel execution bit-identical.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dmgda/problems.hpp"
#include "dmgda/topology.hpp"

namespace dmgda {

// ── configuration ─────────────────────────────────────────────────────────────

enum class ScheduleMode { theorem1, constant, custom };
enum class BaselineKind { dmgda, dsgda_gt };

inline const char* to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::theorem1: return "theorem1";
    case ScheduleMode::constant: return "constant";
    case ScheduleMode::custom: return "custom";
  }
  return "?";
}

inline const char* to_string(BaselineKind b) {
  return b == BaselineKind::dmgda ? "dmgda" : "dsgda_gt";
}

struct StepSizes {
  double eta = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
};

// Library-only hook for experimenting with bespoke schedules.
using ScheduleFn = std::function<StepSizes(long long t, long long T)>;

struct AlgoConfig {
  long long T = 0;
  double gamma = -1.0;   // < 0: derive the default from problem constants
  double lambda = -1.0;  // < 0: derive the default from problem constants
  // theorem1 mode: c_eta, c_alpha, c_beta. constant mode: the values
  // themselves (clamped into (0,1]).
  double eta_scale = 1.0;
  double alpha_scale = 1.0;
  double beta_scale = 1.0;
  ScheduleMode schedule_mode = ScheduleMode::theorem1;
  std::uint64_t seed = 0;
  BaselineKind baseline = BaselineKind::dmgda;
  // Scale of optional per-node Gaussian offsets added to (x0, y0) at
  // initialization; 0 keeps all nodes exactly identical.
  double init_spread = 0.0;
  ScheduleFn custom_schedule;  // required iff schedule_mode == custom
};

// The ablation baseline: momentum disabled (alpha = beta = 1 at every t, so
// u becomes the plain fresh stochastic gradient), gradient tracking kept.
inline AlgoConfig make_baseline_dsgda(AlgoConfig cfg) {
  cfg.baseline = BaselineKind::dsgda_gt;
  cfg.alpha_scale = 1.0;
  cfg.beta_scale = 1.0;
  return cfg;
}

// Step sizes used by the step from t-1 to t, valid for 1 <= t <= T.  In
// theorem1 mode the values are t-independent:
//   eta = min(1, c_eta T^{-1/3}),  alpha = beta = min(1, c T^{-2/3}).
inline StepSizes schedule(const AlgoConfig& cfg, long long t) {
  if (t < 1 || t > cfg.T)
    throw std::invalid_argument("schedule: t must be in [1, T]");
  StepSizes s;
  switch (cfg.schedule_mode) {
    case ScheduleMode::theorem1: {
      if (!(cfg.eta_scale > 0.0) || !(cfg.alpha_scale > 0.0) ||
          !(cfg.beta_scale > 0.0))
        throw std::invalid_argument("schedule: scales must be positive");
      const double tcb = std::cbrt(static_cast<double>(cfg.T));
      s.eta = std::min(1.0, cfg.eta_scale / tcb);
      s.alpha = std::min(1.0, cfg.alpha_scale / (tcb * tcb));
      s.beta = std::min(1.0, cfg.beta_scale / (tcb * tcb));
      break;
    }
    case ScheduleMode::constant: {
      if (!(cfg.eta_scale > 0.0) || !(cfg.alpha_scale > 0.0) ||
          !(cfg.beta_scale > 0.0))
        throw std::invalid_argument("schedule: scales must be positive");
      s.eta = std::min(1.0, cfg.eta_scale);
      s.alpha = std::min(1.0, cfg.alpha_scale);
      s.beta = std::min(1.0, cfg.beta_scale);
      break;
    }
    case ScheduleMode::custom: {
      if (!cfg.custom_schedule)
        throw std::invalid_argument(
            "schedule: custom mode requires a schedule callable");
      s = cfg.custom_schedule(t, cfg.T);
      if (!(s.eta > 0.0 && s.eta <= 1.0) || !(s.alpha > 0.0 && s.alpha <= 1.0) ||
          !(s.beta > 0.0 && s.beta <= 1.0))
        throw std::invalid_argument(
            "schedule: custom schedule returned values outside (0, 1]");
      break;
    }
  }
  if (cfg.baseline == BaselineKind::dsgda_gt) {
    s.alpha = 1.0;
    s.beta = 1.0;
  }
  return s;
}

// Fill in the derived defaults:
//   lambda = min(1, 1 / (2 L_f eta))      (the largest dual step the descent
//                                          analysis permits)
//   gamma  = lambda mu / (16 L)
// Requires explicit gamma/lambda in custom mode (there is no single eta).
inline AlgoConfig with_defaults(AlgoConfig cfg, const ProblemConstants& pc) {
  if (cfg.T < 0) throw std::invalid_argument("with_defaults: T must be >= 0");
  if (cfg.lambda < 0.0 || cfg.gamma < 0.0) {
    if (cfg.schedule_mode == ScheduleMode::custom)
      throw std::invalid_argument(
          "with_defaults: custom schedules need explicit gamma and lambda");
    AlgoConfig probe = cfg;
    probe.T = std::max<long long>(cfg.T, 1);
    const double eta = schedule(probe, 1).eta;
    if (cfg.lambda < 0.0) cfg.lambda = std::min(1.0, 1.0 / (2.0 * pc.L_f * eta));
    if (cfg.gamma < 0.0) cfg.gamma = cfg.lambda * pc.mu / (16.0 * pc.L);
  }
  if (!(cfg.gamma > 0.0))
    throw std::invalid_argument("with_defaults: gamma must be positive");
  if (!(cfg.lambda > 0.0))
    throw std::invalid_argument("with_defaults: lambda must be positive");
  return cfg;
}

// Step sizes violating the convergence analysis are legal to run (useful for
// exploring), but flagged.
inline std::vector<std::string> check_feasibility(const AlgoConfig& cfg,
                                                  const ProblemConstants& pc) {
  std::vector<std::string> warnings;
  if (cfg.T < 1) return warnings;
  double eta_max = 0.0;
  for (long long t = 1; t <= cfg.T;
       t += (cfg.schedule_mode == ScheduleMode::custom ? 1 : cfg.T)) {
    eta_max = std::max(eta_max, schedule(cfg, t).eta);
  }
  const double slack = 1.0 + 1e-12;
  const double gamma_cap = cfg.lambda * pc.mu / (16.0 * pc.L);
  if (cfg.gamma > gamma_cap * slack)
    warnings.push_back("gamma = " + detail::fmt_g(cfg.gamma) +
                       " exceeds lambda*mu/(16 L) = " +
                       detail::fmt_g(gamma_cap) +
                       "; convergence guarantees do not apply");
  const double lambda_cap = 1.0 / (2.0 * pc.L_f * eta_max);
  if (cfg.lambda > lambda_cap * slack)
    warnings.push_back("lambda = " + detail::fmt_g(cfg.lambda) +
                       " exceeds 1/(2 L_f eta) = " + detail::fmt_g(lambda_cap) +
                       "; convergence guarantees do not apply");
  return warnings;
}

// ── state ─────────────────────────────────────────────────────────────────────

// One column per node in every matrix.
struct SwarmState {
  long long t = 0;
  Mat X, Y;    // iterates              (d x m), (p x m)
  Mat Ux, Uy;  // momentum estimates
  Mat Wx, Wy;  // gossip trackers
  std::vector<long long> grad_calls;  // cumulative, per node

  int m() const { return static_cast<int>(X.cols()); }
  int d() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(Y.rows()); }

  Vec xbar() const { return X.rowwise().sum() / static_cast<double>(X.cols()); }
  Vec ybar() const { return Y.rowwise().sum() / static_cast<double>(Y.cols()); }

  long long grad_calls_total() const {
    long long total = 0;
    for (long long g : grad_calls) total += g;
    return total;
  }
};

using Trajectory = std::vector<SwarmState>;

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long long t, int node)
      : std::runtime_error("divergence: non-finite iterate at t = " +
                           std::to_string(t) + ", node " +
                           std::to_string(node)),
        t_(t),
        node_(node) {}
  long long t() const { return t_; }
  int node() const { return node_; }

 private:
  long long t_;
  int node_;
};

// ── initialization ────────────────────────────────────────────────────────────

inline SwarmState init_run(const AlgoConfig& cfg, const ProblemInstance& pb,
                           const MixingMatrix& W, const Vec& x0,
                           const Vec& y0) {
  if (W.m != pb.m())
    throw std::invalid_argument("init_run: W.m != problem node count");
  if (x0.size() != pb.d() || y0.size() != pb.p())
    throw std::invalid_argument("init_run: x0/y0 dimension mismatch");
  if (!x0.allFinite() || !y0.allFinite())
    throw std::invalid_argument("init_run: x0/y0 must be finite");
  if (cfg.T < 0) throw std::invalid_argument("init_run: T must be >= 0");

  const int m = pb.m(), d = pb.d(), p = pb.p();
  SwarmState s;
  s.t = 0;
  s.X = x0.replicate(1, m);
  s.Y = y0.replicate(1, m);
  if (cfg.init_spread > 0.0) {
    for (int i = 0; i < m; ++i) {
      rng::Stream st = rng::make_stream(cfg.seed, rng::Lane::init_spread,
                                        static_cast<std::uint64_t>(i));
      for (int k = 0; k < d; ++k) s.X(k, i) += cfg.init_spread * st.normal();
      for (int k = 0; k < p; ++k) s.Y(k, i) += cfg.init_spread * st.normal();
    }
  }
  s.Ux.resize(d, m);
  s.Uy.resize(p, m);
  for (int i = 0; i < m; ++i) {
    rng::Stream st = rng::node_stream(cfg.seed, i, 0);
    const GradPair g = pb.grad_sample(i, s.X.col(i), s.Y.col(i), st);
    s.Ux.col(i) = g.gx;
    s.Uy.col(i) = g.gy;
  }
  s.grad_calls.assign(static_cast<std::size_t>(m), 1);
  s.Wx.resize(d, m);
  s.Wy.resize(p, m);
  mix_into(W, s.Ux, s.Wx, 0, m);
  mix_into(W, s.Uy, s.Wy, 0, m);
  return s;
}

// ── the step kernel ───────────────────────────────────────────────────────────

namespace detail {

// Scratch buffers for one step; "n" suffix = next iterate.
struct StepBuffers {
  Mat Xn, Yn, Uxn, Uyn, Wxn, Wyn;
  Mat Zx, Zy;  // w + u_next - u_old, mixed in phase 2

  void resize(int d, int p, int m) {
    Xn.resize(d, m);
    Yn.resize(p, m);
    Uxn.resize(d, m);
    Uyn.resize(p, m);
    Wxn.resize(d, m);
    Wyn.resize(p, m);
    Zx.resize(d, m);
    Zy.resize(p, m);
  }
};

// Phases (a)-(d) for nodes [lo, hi): everything except the tracker gossip.
// Reads only the previous state plus this node range's new columns; returns
// the lowest node in the range that produced a non-finite value, or -1.
inline int step_phase1(const SwarmState& s, const AlgoConfig& cfg,
                       const ProblemInstance& pb, const MixingMatrix& W,
                       const StepSizes& sz, StepBuffers& b, int lo, int hi) {
  const double gamma = cfg.gamma, lambda = cfg.lambda;
  int bad = -1;
  for (int i = lo; i < hi; ++i) {
    const Vec xt = s.X * W.weights.col(i) - gamma * s.Wx.col(i);
    const Vec yt = s.Y * W.weights.col(i) + lambda * s.Wy.col(i);
    b.Xn.col(i) = s.X.col(i) + sz.eta * (xt - s.X.col(i));
    b.Yn.col(i) = s.Y.col(i) + sz.eta * (yt - s.Y.col(i));

    rng::Stream st = rng::node_stream(cfg.seed, i, s.t + 1);
    const NoiseDraw noise = pb.draw_noise(st);
    const GradPair g_new = pb.grad_with_noise(i, b.Xn.col(i), b.Yn.col(i), noise);
    const GradPair g_old = pb.grad_with_noise(i, s.X.col(i), s.Y.col(i), noise);
    b.Uxn.col(i) = g_new.gx + (1.0 - sz.alpha) * (s.Ux.col(i) - g_old.gx);
    b.Uyn.col(i) = g_new.gy + (1.0 - sz.beta) * (s.Uy.col(i) - g_old.gy);
    b.Zx.col(i) = s.Wx.col(i) + b.Uxn.col(i) - s.Ux.col(i);
    b.Zy.col(i) = s.Wy.col(i) + b.Uyn.col(i) - s.Uy.col(i);

    if (bad < 0 && !(b.Xn.col(i).allFinite() && b.Yn.col(i).allFinite() &&
                     b.Uxn.col(i).allFinite() && b.Uyn.col(i).allFinite()))
      bad = i;
  }
  return bad;
}

// Phase (e) for nodes [lo, hi): gossip the trackers. Requires phase 1
// complete for ALL nodes.
inline int step_phase2(const MixingMatrix& W, StepBuffers& b, int lo, int hi) {
  mix_into(W, b.Zx, b.Wxn, lo, hi);
  mix_into(W, b.Zy, b.Wyn, lo, hi);
  int bad = -1;
  for (int i = lo; i < hi; ++i) {
    if (!(b.Wxn.col(i).allFinite() && b.Wyn.col(i).allFinite())) {
      bad = i;
      break;
    }
  }
  return bad;
}

// Commit the step: swap the new iterate into place. O(1) pointer swaps.
inline void step_commit(SwarmState& s, StepBuffers& b) {
  std::swap(s.X, b.Xn);
  std::swap(s.Y, b.Yn);
  std::swap(s.Ux, b.Uxn);
  std::swap(s.Uy, b.Uyn);
  std::swap(s.Wx, b.Wxn);
  std::swap(s.Wy, b.Wyn);
  for (auto& g : s.grad_calls) g += 4;
  ++s.t;
}

}  // namespace detail

// One full step t -> t+1 (serial reference path). Throws DivergenceError on
// the first non-finite iterate, identifying the step and node.
inline SwarmState step(const SwarmState& state, const AlgoConfig& cfg,
                       const ProblemInstance& pb, const MixingMatrix& W) {
  if (state.t >= cfg.T)
    throw std::invalid_argument("step: state.t must be < T");
  if (!(cfg.gamma > 0.0) || !(cfg.lambda > 0.0))
    throw std::invalid_argument(
        "step: gamma/lambda unset; apply with_defaults first");
  const StepSizes sz_eta = schedule(cfg, std::max<long long>(state.t, 1));
  StepSizes sz = schedule(cfg, state.t + 1);
  sz.eta = sz_eta.eta;  // step t->t+1 relaxes with eta_t, corrects with
                        // alpha_{t+1}, beta_{t+1}

  SwarmState s = state;
  detail::StepBuffers b;
  b.resize(s.d(), s.p(), s.m());
  const int m = s.m();
  int bad1 = detail::step_phase1(s, cfg, pb, W, sz, b, 0, m);
  int bad2 = detail::step_phase2(W, b, 0, m);
  detail::step_commit(s, b);
  const int bad = bad1 >= 0 ? bad1 : bad2;
  if (bad >= 0) throw DivergenceError(s.t, bad);
  return s;
}

// ── full runs ─────────────────────────────────────────────────────────────────

struct RunSummary {
  long long T = 0;
  int m = 0;
  long long grad_calls_total = 0;
  double initial_stationarity = 0.0;
  double stationarity_t1 = std::numeric_limits<double>::quiet_NaN();
  double final_stationarity = 0.0;
  double min_stationarity = std::numeric_limits<double>::quiet_NaN();
  double mean_stationarity = std::numeric_limits<double>::quiet_NaN();
  double final_quarter_mean_stationarity =
      std::numeric_limits<double>::quiet_NaN();
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double max_node_stationarity_final = 0.0;
  bool diverged = false;
  long long diverged_t = -1;
  int diverged_node = -1;
};

struct RunOptions {
  // Record every `cadence` iterations (plus always t = 0, 1, and T).
  // 0 selects the default: 1 for T <= 10^4, else 10.
  long long cadence = 0;
  int threads = 1;
  // Called at each recorded iteration with a consistent state.
  std::function<void(const SwarmState&)> observer;
  // Keep a full per-iteration snapshot list (forces cadence 1); used by the
  // verification harness.
  bool keep_trajectory = false;
};

struct RunResult {
  SwarmState state;  // final (or last finite-ish state on divergence)
  RunSummary summary;
  Trajectory trajectory;  // nonempty iff keep_trajectory
};

inline long long effective_cadence(long long cadence, long long T) {
  if (cadence < 0) throw std::invalid_argument("cadence must be >= 0");
  if (cadence == 0) return T <= 10000 ? 1 : 10;
  return cadence;
}

namespace detail {

inline bool should_record(long long t, long long T, long long cadence) {
  return t == 0 || t == 1 || t == T || (cadence > 0 && t % cadence == 0);
}

// Accumulates the trajectory summary from the recorded iterations.
struct SummaryBuilder {
  const ProblemInstance& pb;
  long long T;
  RunSummary out;
  double sum = 0.0;
  long long n = 0;
  double tail_sum = 0.0;
  long long tail_n = 0;

  SummaryBuilder(const ProblemInstance& p, long long T_, int m) : pb(p), T(T_) {
    out.T = T_;
    out.m = m;
  }

  void observe(const SwarmState& s) {
    const Vec xb = s.xbar();
    const double stat = pb.oracle_F(xb).second.norm();
    const double res = pb.residual(xb, s.ybar());
    if (s.t == 0) {
      out.initial_stationarity = stat;
      out.initial_residual = res;
    }
    if (s.t == 1) out.stationarity_t1 = stat;
    if (s.t >= 1) {
      sum += stat;
      ++n;
      if (!(stat >= out.min_stationarity)) out.min_stationarity = stat;
      if (4 * s.t > 3 * T) {
        tail_sum += stat;
        ++tail_n;
      }
    }
    out.final_stationarity = stat;
    out.final_residual = res;
  }

  void finalize(const SwarmState& s) {
    out.grad_calls_total = s.grad_calls_total();
    if (n > 0) out.mean_stationarity = sum / static_cast<double>(n);
    if (tail_n > 0)
      out.final_quarter_mean_stationarity =
          tail_sum / static_cast<double>(tail_n);
    double worst = 0.0;
    for (int i = 0; i < s.m(); ++i)
      worst = std::max(worst, pb.oracle_F(s.X.col(i)).second.norm());
    out.max_node_stationarity_final = worst;
  }
};

}  // namespace detail

// Execute T steps from init_run. On divergence the error carries the partial
// result (trajectory, summary, and recorded metrics up to the failing step).
class RunAbort : public std::runtime_error {
 public:
  RunAbort(const DivergenceError& cause, std::shared_ptr<RunResult> partial)
      : std::runtime_error(cause.what()),
        t_(cause.t()),
        node_(cause.node()),
        partial_(std::move(partial)) {}
  long long t() const { return t_; }
  int node() const { return node_; }
  const RunResult& partial() const { return *partial_; }
  std::shared_ptr<RunResult> partial_ptr() const { return partial_; }

 private:
  long long t_;
  int node_;
  std::shared_ptr<RunResult> partial_;
};

inline RunResult run(const AlgoConfig& cfg_in, const ProblemInstance& pb,
                     const MixingMatrix& W, const Vec& x0, const Vec& y0,
                     const RunOptions& opt = {}) {
  const AlgoConfig cfg = with_defaults(cfg_in, pb.constants());
  const long long T = cfg.T;
  const long long cadence =
      opt.keep_trajectory ? 1 : effective_cadence(opt.cadence, T);
  const int m = pb.m();
  int threads = std::max(1, opt.threads);
  threads = std::min(threads, m);

  auto result = std::make_shared<RunResult>();
  result->state = init_run(cfg, pb, W, x0, y0);
  SwarmState& s = result->state;

  detail::SummaryBuilder summary(pb, T, m);
  const auto record = [&](const SwarmState& st) {
    summary.observe(st);
    if (opt.keep_trajectory) result->trajectory.push_back(st);
    if (opt.observer) opt.observer(st);
  };
  record(s);

  detail::StepBuffers buf;
  buf.resize(s.d(), s.p(), s.m());

  int diverged_node = -1;
  long long diverged_t = -1;

  const auto run_serial = [&]() {
    for (long long t = 0; t < T; ++t) {
      const double eta = schedule(cfg, std::max<long long>(t, 1)).eta;
      StepSizes sz = schedule(cfg, t + 1);
      sz.eta = eta;
      const int bad1 = detail::step_phase1(s, cfg, pb, W, sz, buf, 0, m);
      const int bad2 = detail::step_phase2(W, buf, 0, m);
      detail::step_commit(s, buf);
      const int bad = bad1 >= 0 ? bad1 : bad2;
      if (bad >= 0) {
        diverged_node = bad;
        diverged_t = s.t;
        record(s);
        return;
      }
      if (detail::should_record(s.t, T, cadence)) record(s);
    }
  };

  const auto run_parallel = [&]() {
    // Persistent team; two rendezvous per step. The completion handler of
    // the second barrier commits the step and performs all serial work
    // (recording, stop decisions) while every worker is blocked, so workers
    // only ever touch their own node range.
    std::vector<int> lo(static_cast<std::size_t>(threads)),
        hi(static_cast<std::size_t>(threads));
    for (int k = 0; k < threads; ++k) {
      lo[static_cast<std::size_t>(k)] = static_cast<int>(
          (static_cast<long long>(m) * k) / threads);
      hi[static_cast<std::size_t>(k)] = static_cast<int>(
          (static_cast<long long>(m) * (k + 1)) / threads);
    }
    std::vector<int> bad_slot(static_cast<std::size_t>(2 * threads), -1);
    std::atomic<bool> stop{false};
    std::exception_ptr commit_error;
    StepSizes sz;  // set serially before each step

    // Runs on exactly one thread per step while all others are blocked at
    // the barrier, so it may touch shared state freely. Must not throw
    // (std::barrier requirement); failures are parked and rethrown after
    // the team joins.
    auto on_step_done = [&]() noexcept {
      try {
        detail::step_commit(s, buf);
        int bad = -1;
        for (int v : bad_slot)
          if (v >= 0 && (bad < 0 || v < bad)) bad = v;
        std::fill(bad_slot.begin(), bad_slot.end(), -1);
        if (bad >= 0) {
          diverged_node = bad;
          diverged_t = s.t;
          record(s);
          stop.store(true, std::memory_order_relaxed);
          return;
        }
        if (detail::should_record(s.t, T, cadence)) record(s);
        if (s.t >= T) {
          stop.store(true, std::memory_order_relaxed);
          return;
        }
        const long long t = s.t;
        sz = schedule(cfg, t + 1);
        sz.eta = schedule(cfg, std::max<long long>(t, 1)).eta;
      } catch (...) {
        commit_error = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
      }
    };

    std::barrier mid(threads);
    std::barrier done(threads, on_step_done);

    if (T == 0) return;
    sz = schedule(cfg, 1);

    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    auto worker = [&](int k) {
      const auto ks = static_cast<std::size_t>(k);
      try {
        while (!stop.load(std::memory_order_relaxed)) {
          bad_slot[ks] =
              detail::step_phase1(s, cfg, pb, W, sz, buf, lo[ks], hi[ks]);
          mid.arrive_and_wait();
          bad_slot[static_cast<std::size_t>(threads) + ks] =
              detail::step_phase2(W, buf, lo[ks], hi[ks]);
          done.arrive_and_wait();
        }
      } catch (...) {
        errors[ks] = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
        mid.arrive_and_drop();
        done.arrive_and_drop();
      }
    };

    std::vector<std::thread> team;
    team.reserve(static_cast<std::size_t>(threads - 1));
    for (int k = 1; k < threads; ++k) team.emplace_back(worker, k);
    worker(0);
    for (auto& th : team) th.join();
    if (commit_error) std::rethrow_exception(commit_error);
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  };

  if (threads <= 1)
    run_serial();
  else
    run_parallel();

  summary.finalize(s);
  result->summary = std::move(summary.out);
  if (diverged_node >= 0) {
    result->summary.diverged = true;
    result->summary.diverged_t = diverged_t;
    result->summary.diverged_node = diverged_node;
    throw RunAbort(DivergenceError(diverged_t, diverged_node), result);
  }
  return *result;
}

}  // namespace dmgda
