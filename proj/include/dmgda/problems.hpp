#pragma once

// Per-node stochastic minimax objectives.
//
// A ProblemInstance provides m node objectives f^i(x, y) whose average
// f(x,y) = (1/m) sum_i f^i(x,y) defines the envelope F(x) = max_y f(x,y).
// Each family ships with certified constants:
//   L_f    joint-block smoothness constant of every node objective
//   mu     PL constant of f(x, .) for maximization:
//          |grad_y f(x,y)|^2 >= 2 mu (F(x) - f(x,y))
//   kappa  L_f / mu
//   L      L_f (1 + kappa/2), a smoothness constant for the envelope F
// and exact oracles for F, grad F, and a best response y*(x).
//
// Stochastic gradients use an additive linear noise model: the sampled
// objective is f^i(x,y) + sigma (xi_x . x + xi_y . y) with xi ~ N(0, I), so a
// sampled gradient is the exact gradient plus a per-coordinate N(0, sigma^2)
// vector that does not depend on the evaluation point. This is the noise
// structure that keeps every sample path L_f-smooth with an unchanged
// constant, and it makes the shared-sample evaluations of the optimizer
// meaningful: the same draw used at two points contributes the same offset.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgda/rng.hpp"

namespace dmgda {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using json = nlohmann::json;

struct ProblemConstants {
  double L_f = 0.0;
  double mu = 0.0;
  double kappa = 0.0;   // L_f / mu
  double L = 0.0;       // L_f (1 + kappa/2)
  double sigma = 0.0;
  double F_star_lower_bound = 0.0;

  static ProblemConstants certify(double L_f, double mu, double sigma,
                                  double F_star_lower_bound) {
    if (!(L_f > 0.0)) throw std::invalid_argument("constants: L_f must be > 0");
    if (!(mu > 0.0)) throw std::invalid_argument("constants: mu must be > 0");
    if (!(sigma >= 0.0))
      throw std::invalid_argument("constants: sigma must be >= 0");
    if (!std::isfinite(F_star_lower_bound))
      throw std::invalid_argument("constants: lower bound must be finite");
    ProblemConstants c;
    c.L_f = L_f;
    c.mu = mu;
    c.kappa = L_f / mu;
    c.L = L_f * (1.0 + c.kappa / 2.0);
    c.sigma = sigma;
    c.F_star_lower_bound = F_star_lower_bound;
    return c;
  }
};

struct GradPair {
  Vec gx;
  Vec gy;
};

// One shared stochastic draw: the additive offsets (already sigma-scaled).
struct NoiseDraw {
  Vec ex;
  Vec ey;
};

class ProblemInstance {
 public:
  virtual ~ProblemInstance() = default;

  int m() const { return m_; }
  int d() const { return d_; }
  int p() const { return p_; }
  double sigma() const { return constants_.sigma; }
  const ProblemConstants& constants() const { return constants_; }

  virtual const char* family() const = 0;

  // Node objective value f^i(x, y).
  virtual double value(int i, const Vec& x, const Vec& y) const = 0;

  // Exact partial gradients (grad_x f^i, grad_y f^i).
  virtual GradPair grad(int i, const Vec& x, const Vec& y) const = 0;

  // Exact envelope oracle: (F(x), grad F(x)).
  virtual std::pair<double, Vec> oracle_F(const Vec& x) const = 0;

  // A maximizer of f(x, .).
  virtual Vec best_response(const Vec& x) const = 0;

  // Distance from y to the argmax set of f(x, .); equals |y - y*(x)| when
  // the maximizer is unique.
  virtual double dual_dist(const Vec& x, const Vec& y) const = 0;

  // Canonical serialization (family tag + full parameter arrays).
  virtual json to_json() const = 0;

  // ── stochastic sampling ───────────────────────────────────────────────────

  NoiseDraw draw_noise(rng::Stream& stream) const {
    NoiseDraw n;
    n.ex = Vec::Zero(d_);
    n.ey = Vec::Zero(p_);
    const double s = constants_.sigma;
    if (s > 0.0) {
      for (int k = 0; k < d_; ++k) n.ex(k) = s * stream.normal();
      for (int k = 0; k < p_; ++k) n.ey(k) = s * stream.normal();
    }
    return n;
  }

  GradPair grad_with_noise(int i, const Vec& x, const Vec& y,
                           const NoiseDraw& noise) const {
    GradPair g = grad(i, x, y);
    g.gx += noise.ex;
    g.gy += noise.ey;
    return g;
  }

  // Unbiased stochastic gradient; identical stream state => identical draw.
  GradPair grad_sample(int i, const Vec& x, const Vec& y,
                       rng::Stream& stream) const {
    return grad_with_noise(i, x, y, draw_noise(stream));
  }

  // ── aggregates over nodes (fixed summation order) ─────────────────────────

  double f_avg(const Vec& x, const Vec& y) const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += value(i, x, y);
    return s / static_cast<double>(m_);
  }

  GradPair grad_avg(const Vec& x, const Vec& y) const {
    GradPair acc{Vec::Zero(d_), Vec::Zero(p_)};
    for (int i = 0; i < m_; ++i) {
      const GradPair g = grad(i, x, y);
      acc.gx += g.gx;
      acc.gy += g.gy;
    }
    acc.gx /= static_cast<double>(m_);
    acc.gy /= static_cast<double>(m_);
    return acc;
  }

  // Primal residual F(x) - f(x, y) (>= 0 up to roundoff).
  double residual(const Vec& x, const Vec& y) const {
    return oracle_F(x).first - f_avg(x, y);
  }

 protected:
  void set_shape(int m, int d, int p) {
    if (m < 1) throw std::invalid_argument("problem: m must be >= 1");
    if (d < 1 || p < 1)
      throw std::invalid_argument("problem: dimensions must be >= 1");
    m_ = m;
    d_ = d;
    p_ = p;
  }

  void check_node(int i) const {
    if (i < 0 || i >= m_)
      throw std::out_of_range("problem: node index out of range");
  }

  void check_dims(const Vec& x, const Vec& y) const {
    if (x.size() != d_ || y.size() != p_)
      throw std::invalid_argument("problem: (x, y) dimension mismatch");
  }

  int m_ = 0, d_ = 0, p_ = 0;
  ProblemConstants constants_;
};

using ProblemPtr = std::shared_ptr<const ProblemInstance>;

// ── validation utility: same objectives, overridden certified constants ─────
//
// Used by certificate checks to demonstrate that a deliberately wrong
// constant is caught (e.g. an understated L_f fails the smoothness check).
class ConstantsOverride final : public ProblemInstance {
 public:
  ConstantsOverride(ProblemPtr base, const ProblemConstants& constants)
      : base_(std::move(base)) {
    set_shape(base_->m(), base_->d(), base_->p());
    constants_ = constants;
  }
  const char* family() const override { return base_->family(); }
  double value(int i, const Vec& x, const Vec& y) const override {
    return base_->value(i, x, y);
  }
  GradPair grad(int i, const Vec& x, const Vec& y) const override {
    return base_->grad(i, x, y);
  }
  std::pair<double, Vec> oracle_F(const Vec& x) const override {
    return base_->oracle_F(x);
  }
  Vec best_response(const Vec& x) const override {
    return base_->best_response(x);
  }
  double dual_dist(const Vec& x, const Vec& y) const override {
    return base_->dual_dist(x, y);
  }
  json to_json() const override { return base_->to_json(); }

 private:
  ProblemPtr base_;
};

inline ProblemPtr with_constants(ProblemPtr base,
                                 const ProblemConstants& constants) {
  return std::make_shared<ConstantsOverride>(std::move(base), constants);
}

// ── fallback inner maximizer ─────────────────────────────────────────────────
//
// Multi-start gradient ascent on f(x, .) with step 1/L_f, for families (or
// cross-checks) without a closed-form best response. Results are flagged as
// approximate via AscentResult::approximate.
struct AscentResult {
  Vec y;
  double grad_norm = 0.0;
  long long iterations = 0;
  bool approximate = true;
};

// Diagnostic failure carrying the best iterate found.
class AscentFailure : public std::runtime_error {
 public:
  AscentFailure(std::string msg, Vec best_y, double best_grad_norm)
      : std::runtime_error(std::move(msg)),
        best_y(std::move(best_y)),
        best_grad_norm(best_grad_norm) {}
  Vec best_y;
  double best_grad_norm;
};

inline AscentResult ascend_dual(const ProblemInstance& pb, const Vec& x,
                                int starts = 16, double tol = 1e-10,
                                long long budget = 400000,
                                std::uint64_t seed = 0) {
  if (x.size() != pb.d())
    throw std::invalid_argument("ascend_dual: x dimension mismatch");
  const double step = 1.0 / pb.constants().L_f;
  const long long per_start = std::max<long long>(1, budget / starts);

  bool have_converged = false;
  AscentResult best;          // best converged start (highest value)
  double best_value = 0.0;
  Vec diag_y;                 // best iterate overall (smallest gradient norm)
  double diag_norm = std::numeric_limits<double>::infinity();
  long long total_iters = 0;

  for (int s = 0; s < starts; ++s) {
    rng::Stream stream =
        rng::make_stream(seed, rng::Lane::certificate, 0xa5ce, s);
    Vec y = Vec::Zero(pb.p());
    if (s > 0) {
      const double scale = static_cast<double>(s);
      for (int k = 0; k < pb.p(); ++k) y(k) = scale * stream.normal();
    }
    double gnorm = 0.0;
    bool converged = false;
    for (long long it = 0; it < per_start; ++it) {
      const Vec gy = pb.grad_avg(x, y).gy;
      gnorm = gy.norm();
      ++total_iters;
      if (gnorm <= tol) {
        converged = true;
        break;
      }
      y += step * gy;
    }
    if (gnorm < diag_norm) {
      diag_norm = gnorm;
      diag_y = y;
    }
    if (converged) {
      const double v = pb.f_avg(x, y);
      if (!have_converged || v > best_value) {
        have_converged = true;
        best_value = v;
        best.y = y;
        best.grad_norm = gnorm;
      }
    }
  }
  if (!have_converged)
    throw AscentFailure(
        "ascend_dual: no start reached tolerance " + std::to_string(tol) +
            " within budget; best gradient norm " + std::to_string(diag_norm),
        diag_y, diag_norm);
  best.iterations = total_iters;
  best.approximate = true;
  return best;
}

// ── shared small helpers for the problem families ───────────────────────────
namespace detail {

// Shortest informative rendering for diagnostics (std::to_string flattens
// small magnitudes to 0.000000).
inline std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline Vec linspace(double lo, double hi, int n) {
  Vec v(n);
  if (n == 1) {
    v(0) = lo;
    return v;
  }
  for (int k = 0; k < n; ++k)
    v(k) = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

inline double spectral_norm_sym(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

inline double spectral_norm(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  return svd.singularValues()(0);
}

inline void require_symmetric(const Mat& M, const std::string& what) {
  if (M.rows() != M.cols())
    throw std::invalid_argument(what + " must be square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  double asym = 0.0;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = i + 1; j < M.cols(); ++j)
      asym = std::max(asym, std::abs(M(i, j) - M(j, i)));
  if (asym > 1e-12 * scale)
    throw std::invalid_argument(what + " is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
}

inline Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

inline Vec gauss_vec(rng::Stream& stream, int n, double scale = 1.0) {
  Vec v(n);
  for (int k = 0; k < n; ++k) v(k) = scale * stream.normal();
  return v;
}

inline Mat gauss_mat(rng::Stream& stream, int rows, int cols,
                     double scale = 1.0) {
  Mat M(rows, cols);
  for (int r = 0; r < rows; ++r)      // fixed row-major draw order
    for (int c = 0; c < cols; ++c) M(r, c) = scale * stream.normal();
  return M;
}

// Haar-ish orthogonal matrix with a deterministic sign convention.
inline Mat random_orthogonal(rng::Stream& stream, int n) {
  const Mat G = gauss_mat(stream, n, n);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < n; ++k)
    if (R(k, k) < 0.0) Q.col(k) = -Q.col(k);
  return Q;
}

// Zero-sum families: entries of the last element are the exact negated
// fixed-order sum of the others, so the family averages to zero exactly.
inline std::vector<Mat> zero_sum_sym(rng::Stream& stream, int m, int n,
                                     double scale) {
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(m));
  if (m == 1) {
    out.push_back(Mat::Zero(n, n));
    return out;
  }
  Mat acc = Mat::Zero(n, n);
  for (int i = 0; i + 1 < m; ++i) {
    const Mat S = symmetrize(gauss_mat(stream, n, n, scale));
    acc += S;
    out.push_back(S);
  }
  out.push_back(-acc);
  return out;
}

inline std::vector<Mat> zero_sum_mat(rng::Stream& stream, int m, int rows,
                                     int cols, double scale) {
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(m));
  if (m == 1) {
    out.push_back(Mat::Zero(rows, cols));
    return out;
  }
  Mat acc = Mat::Zero(rows, cols);
  for (int i = 0; i + 1 < m; ++i) {
    const Mat S = gauss_mat(stream, rows, cols, scale);
    acc += S;
    out.push_back(S);
  }
  out.push_back(-acc);
  return out;
}

inline std::vector<Vec> zero_sum_vec(rng::Stream& stream, int m, int n,
                                     double scale) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(m));
  if (m == 1) {
    out.push_back(Vec::Zero(n));
    return out;
  }
  Vec acc = Vec::Zero(n);
  for (int i = 0; i + 1 < m; ++i) {
    const Vec v = gauss_vec(stream, n, scale);
    acc += v;
    out.push_back(v);
  }
  out.push_back(-acc);
  return out;
}

// ── JSON <-> Eigen ───────────────────────────────────────────────────────────

inline json mat_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

inline Mat mat_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(what + ": expected a non-empty array of rows");
  const auto rows = j.size();
  const auto& first = j.at(0);
  if (!first.is_array() || first.empty())
    throw std::invalid_argument(what + ": rows must be non-empty arrays");
  const auto cols = first.size();
  Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != cols)
      throw std::invalid_argument(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      const auto& cell = row.at(c);
      if (!cell.is_number())
        throw std::invalid_argument(what + ": non-numeric entry");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cell.get<double>();
    }
  }
  return M;
}

inline Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(what + ": expected a non-empty array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& cell = j.at(k);
    if (!cell.is_number())
      throw std::invalid_argument(what + ": non-numeric entry");
    v(static_cast<Eigen::Index>(k)) = cell.get<double>();
  }
  return v;
}

}  // namespace detail
}  // namespace dmgda
