#pragma once

// Per-iteration diagnostics over swarm states, plus the post-hoc log-log
// rate fit used to measure the empirical convergence order.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmgda/algorithm.hpp"
#include "dmgda/problems.hpp"
#include "dmgda/topology.hpp"

namespace dmgda {

struct MetricsRecord {
  long long t = 0;
  double stationarity = 0.0;    // |grad F(xbar)|
  double consensus_x = 0.0;     // (1/m) sum_i |x_i - xbar|^2
  double consensus_y = 0.0;
  double tracking_dev_x = 0.0;  // |ubar_x - wbar_x|
  double tracking_dev_y = 0.0;
  double residual = 0.0;        // F(xbar) - f(xbar, ybar)  (>= 0 up to fp)
  double dual_dist = 0.0;       // dist(ybar, argmax_y f(xbar, .))
  long long grad_calls = 0;     // cumulative, all nodes
  bool ok = true;               // false if an oracle could not be evaluated
  std::string note;             // reason when !ok (not part of the CSV row)
};

// Pure read: never mutates state and draws no randomness. A best-response
// fallback failure is reported as a flagged record, not an exception.
inline MetricsRecord measure(const SwarmState& s, const ProblemInstance& pb,
                             const MixingMatrix& /*W*/) {
  MetricsRecord r;
  r.t = s.t;
  const int m = s.m();
  const Vec xb = s.xbar();
  const Vec yb = s.ybar();

  double cx = 0.0, cy = 0.0;
  for (int i = 0; i < m; ++i) {
    cx += (s.X.col(i) - xb).squaredNorm();
    cy += (s.Y.col(i) - yb).squaredNorm();
  }
  r.consensus_x = cx / static_cast<double>(m);
  r.consensus_y = cy / static_cast<double>(m);

  const double inv_m = 1.0 / static_cast<double>(m);
  r.tracking_dev_x =
      (s.Ux.rowwise().sum() * inv_m - s.Wx.rowwise().sum() * inv_m).norm();
  r.tracking_dev_y =
      (s.Uy.rowwise().sum() * inv_m - s.Wy.rowwise().sum() * inv_m).norm();

  r.grad_calls = s.grad_calls_total();

  try {
    r.stationarity = pb.oracle_F(xb).second.norm();
    r.residual = pb.residual(xb, yb);
    r.dual_dist = pb.dual_dist(xb, yb);
  } catch (const AscentFailure& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.stationarity = nan;
    r.residual = nan;
    r.dual_dist = nan;
    r.ok = false;
    r.note = e.what();
  }
  return r;
}

// ── finite-difference spot checks ────────────────────────────────────────────

// Central-difference gradient of F from the value oracle.
inline Vec fd_grad_F(const ProblemInstance& pb, const Vec& x,
                     double h = 1e-5) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (int k = 0; k < x.size(); ++k) {
    const double step = h * (1.0 + std::abs(x(k)));
    xp(k) = x(k) + step;
    xm(k) = x(k) - step;
    g(k) = (pb.oracle_F(xp).first - pb.oracle_F(xm).first) / (2.0 * step);
    xp(k) = x(k);
    xm(k) = x(k);
  }
  return g;
}

// Central-difference gradients of one node objective from its value.
inline GradPair fd_grad_node(const ProblemInstance& pb, int i, const Vec& x,
                             const Vec& y, double h = 1e-5) {
  GradPair g;
  g.gx.resize(x.size());
  g.gy.resize(y.size());
  Vec xp = x, xm = x;
  for (int k = 0; k < x.size(); ++k) {
    const double step = h * (1.0 + std::abs(x(k)));
    xp(k) = x(k) + step;
    xm(k) = x(k) - step;
    g.gx(k) = (pb.value(i, xp, y) - pb.value(i, xm, y)) / (2.0 * step);
    xp(k) = x(k);
    xm(k) = x(k);
  }
  Vec yp = y, ym = y;
  for (int k = 0; k < y.size(); ++k) {
    const double step = h * (1.0 + std::abs(y(k)));
    yp(k) = y(k) + step;
    ym(k) = y(k) - step;
    g.gy(k) = (pb.value(i, x, yp) - pb.value(i, x, ym)) / (2.0 * step);
    yp(k) = y(k);
    ym(k) = y(k);
  }
  return g;
}

// ── rate fitting ──────────────────────────────────────────────────────────────

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

// Ordinary least squares of log(value) on log(T). A constant series fits its
// own model perfectly, so r_squared is 1 when the total variance is zero.
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& samples) {
  const std::size_t n = samples.size();
  if (n < 3)
    throw std::invalid_argument("rate_fit: need at least 3 samples");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(samples[i].first > 0.0))
      throw std::invalid_argument("rate_fit: T values must be positive");
    if (!(samples[i].second > 0.0))
      throw std::invalid_argument("rate_fit: sample values must be positive");
    for (std::size_t j = i + 1; j < n; ++j)
      if (samples[i].first == samples[j].first)
        throw std::invalid_argument("rate_fit: duplicate T value " +
                                    std::to_string(samples[i].first));
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [T, v] : samples) {
    mx += std::log(T);
    my += std::log(v);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [T, v] : samples) {
    const double dx = std::log(T) - mx;
    const double dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.points = static_cast<int>(n);
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (const auto& [T, v] : samples) {
      const double e = std::log(v) - (fit.intercept + fit.slope * std::log(T));
      ss_res += e * e;
    }
    fit.r_squared = 1.0 - ss_res / syy;
  }
  return fit;
}

}  // namespace dmgda
