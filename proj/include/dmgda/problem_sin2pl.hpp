#pragma once

// The sin^2-coupled PL family.
//
//   f^i(x, y) = g_i(x) - sum_{j=1..p} phi((y - P x)_j)
//   g_i(x)    = (1/2) (x - c_i)^T D_i (x - c_i),   D_i symmetric (possibly
//               indefinite, so f^i can be nonconvex in x)
//   phi(z)    = z^2 + 3 sin^2(z)
//
// All nodes share the coupling matrix P (p x d), so the dual part of the
// average objective is node-independent and
//   y*(x) = P x,            F(x) = (1/m) sum_i g_i(x),
//   F(x) - f(x, y) = sum_j phi(r_j),   r = y - P x.
//
// Certified constants:
//   mu = 1/32. phi satisfies phi'(z)^2 >= 2 mu phi(z) pointwise (dense-grid
//   certified in the test suite), and summing coordinates preserves the
//   constant, so f(x, .) is mu-PL toward its maximum for every x.
//
//   L_f = max_i |D_i|_2 + 8 (1 + |P|_2^2). Derivation (documented in
//   docs/problem_families.md): with S = diag(phi''(r)), |phi''| <= 8, the
//   node Hessian splits as
//     H = [[D_i, 0], [0, 0]] - [P^T; -I] S [P, -I],
//   and |[P^T; -I] S [P, -I]|_2 <= 8 |[P, -I]|_2^2 = 8 (1 + |P|_2^2).
//   The smaller-looking bound max(8(1+|P|^2), |D_i| + 8|P|^2) is NOT valid
//   for indefinite D_i (counterexample: D = [-1], P = [1] at r = 0 gives
//   |H| = (17+sqrt(257))/2 > 16), hence the sum form.
//
// Boundedness: F is a quadratic with Hessian Dbar = (1/m) sum D_i; the
// family requires Dbar PSD with a consistent stationary equation, otherwise
// F has no finite lower bound and construction fails.

#include <cmath>

#include "dmgda/problems.hpp"

namespace dmgda {

inline double phi_sin2(double z) {
  const double s = std::sin(z);
  return z * z + 3.0 * s * s;
}

inline double phi_sin2_prime(double z) {
  return 2.0 * z + 3.0 * std::sin(2.0 * z);
}

inline double phi_sin2_second(double z) { return 2.0 + 6.0 * std::cos(2.0 * z); }

// PL constant of phi certified by the dense-grid oracle in the tests.
inline constexpr double kPhiPL = 1.0 / 32.0;

class Sin2PL final : public ProblemInstance {
 public:
  Sin2PL(std::vector<Mat> D, std::vector<Vec> c, Mat P, double sigma)
      : D_(std::move(D)), c_(std::move(c)), P_(std::move(P)) {
    const int m = static_cast<int>(D_.size());
    if (m < 1) throw std::invalid_argument("sin2pl: need at least one node");
    if (c_.size() != D_.size())
      throw std::invalid_argument("sin2pl: need one center per node");
    const int p = static_cast<int>(P_.rows());
    const int d = static_cast<int>(P_.cols());
    if (p < 1 || d < 1)
      throw std::invalid_argument("sin2pl: coupling matrix must be p x d");
    set_shape(m, d, p);
    double maxD = 0.0;
    for (int i = 0; i < m; ++i) {
      detail::require_symmetric(D_[static_cast<std::size_t>(i)],
                                "sin2pl: D[" + std::to_string(i) + "]");
      if (D_[static_cast<std::size_t>(i)].rows() != d)
        throw std::invalid_argument("sin2pl: D[" + std::to_string(i) +
                                    "] must be d x d");
      if (c_[static_cast<std::size_t>(i)].size() != d)
        throw std::invalid_argument("sin2pl: c[" + std::to_string(i) +
                                    "] must have dimension d");
      maxD = std::max(
          maxD, detail::spectral_norm_sym(D_[static_cast<std::size_t>(i)]));
    }

    //   F(x) = (1/2) x^T Dbar x - g0^T x + const_term
    Dbar_ = Mat::Zero(d, d);
    g0_ = Vec::Zero(d);
    const_term_ = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto& Di = D_[static_cast<std::size_t>(i)];
      const auto& ci = c_[static_cast<std::size_t>(i)];
      Dbar_ += Di;
      g0_ += Di * ci;
      const_term_ += ci.dot(Di * ci);
    }
    Dbar_ /= static_cast<double>(m);
    g0_ /= static_cast<double>(m);
    const_term_ /= 2.0 * static_cast<double>(m);

    // Bounded-below check: Dbar PSD and g0 in range(Dbar).
    Eigen::SelfAdjointEigenSolver<Mat> es(detail::symmetrize(Dbar_));
    const Vec ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev(d - 1)));
    if (ev(0) < -1e-12 * scale)
      throw std::invalid_argument(
          "sin2pl: average curvature Dbar is not PSD; F is unbounded below");
    const double rank_tol = 1e-10 * scale;
    Vec pinv_g = Vec::Zero(d);
    Vec proj_g = Vec::Zero(d);
    for (int k = 0; k < d; ++k) {
      if (ev(k) > rank_tol) {
        const double coeff = es.eigenvectors().col(k).dot(g0_);
        pinv_g += (coeff / ev(k)) * es.eigenvectors().col(k);
        proj_g += coeff * es.eigenvectors().col(k);
      }
    }
    if ((g0_ - proj_g).norm() > 1e-10 * (1.0 + g0_.norm()))
      throw std::invalid_argument(
          "sin2pl: stationarity equation inconsistent; F is unbounded below");
    const double F_star = -0.5 * g0_.dot(pinv_g) + const_term_;

    const double P_norm = detail::spectral_norm(P_);
    const double L_f = maxD + 8.0 * (1.0 + P_norm * P_norm);
    constants_ = ProblemConstants::certify(L_f, kPhiPL, sigma, F_star);
  }

  const char* family() const override { return "sin2pl"; }

  double value(int i, const Vec& x, const Vec& y) const override {
    check_node(i);
    check_dims(x, y);
    const Vec dx = x - c_[static_cast<std::size_t>(i)];
    double v = 0.5 * dx.dot(D_[static_cast<std::size_t>(i)] * dx);
    const Vec r = y - P_ * x;
    for (int j = 0; j < p_; ++j) v -= phi_sin2(r(j));
    return v;
  }

  GradPair grad(int i, const Vec& x, const Vec& y) const override {
    check_node(i);
    check_dims(x, y);
    const Vec r = y - P_ * x;
    Vec phi_p(p_);
    for (int j = 0; j < p_; ++j) phi_p(j) = phi_sin2_prime(r(j));
    GradPair g;
    g.gx = D_[static_cast<std::size_t>(i)] *
               (x - c_[static_cast<std::size_t>(i)]) +
           P_.transpose() * phi_p;
    g.gy = -phi_p;
    return g;
  }

  std::pair<double, Vec> oracle_F(const Vec& x) const override {
    if (x.size() != d_)
      throw std::invalid_argument("sin2pl: x dimension mismatch");
    // Same fixed-order average as f_avg's quadratic part, so the residual
    // vanishes exactly at the best response.
    double F = 0.0;
    for (int i = 0; i < m_; ++i) {
      const Vec dx = x - c_[static_cast<std::size_t>(i)];
      F += 0.5 * dx.dot(D_[static_cast<std::size_t>(i)] * dx);
    }
    F /= static_cast<double>(m_);
    return {F, Dbar_ * x - g0_};
  }

  Vec best_response(const Vec& x) const override {
    if (x.size() != d_)
      throw std::invalid_argument("sin2pl: x dimension mismatch");
    return P_ * x;
  }

  double dual_dist(const Vec& x, const Vec& y) const override {
    check_dims(x, y);
    return (y - P_ * x).norm();
  }

  json to_json() const override {
    json j;
    j["family"] = "sin2pl";
    j["m"] = m_;
    j["d"] = d_;
    j["p"] = p_;
    j["sigma"] = constants_.sigma;
    j["P"] = detail::mat_to_json(P_);
    json D = json::array(), c = json::array();
    for (int i = 0; i < m_; ++i) {
      D.push_back(detail::mat_to_json(D_[static_cast<std::size_t>(i)]));
      c.push_back(detail::vec_to_json(c_[static_cast<std::size_t>(i)]));
    }
    j["D"] = std::move(D);
    j["c"] = std::move(c);
    return j;
  }

  const Mat& coupling() const { return P_; }
  const Mat& Dbar() const { return Dbar_; }

 private:
  std::vector<Mat> D_;
  std::vector<Vec> c_;
  Mat P_;
  Mat Dbar_;
  Vec g0_;
  double const_term_ = 0.0;
};

inline ProblemPtr make_sin2pl(std::vector<Mat> D, std::vector<Vec> c, Mat P,
                              double sigma) {
  return std::make_shared<Sin2PL>(std::move(D), std::move(c), std::move(P),
                                  sigma);
}

// Seeded synthetic generator. The average curvature gets an orthogonally
// rotated spectrum in [h_min, h_max]; nodes add zero-sum symmetric
// heterogeneity (scale het) so individual D_i may be indefinite while Dbar
// stays PD; coupling P is scaled to spectral norm p_norm.
struct Sin2PLGen {
  double h_min = 0.5;
  double h_max = 2.0;
  double het = 0.5;
  double c_scale = 2.0;
  double p_norm = 1.0;
};

inline ProblemPtr generate_sin2pl(int m, int d, int p, const Sin2PLGen& gen,
                                  std::uint64_t seed, double sigma) {
  if (m < 1 || d < 1 || p < 1)
    throw std::invalid_argument("generate_sin2pl: m, d, p must be >= 1");
  if (!(gen.h_min > 0.0) || gen.h_max < gen.h_min)
    throw std::invalid_argument(
        "generate_sin2pl: need 0 < h_min <= h_max for a PD average curvature");
  if (gen.het < 0.0 || gen.c_scale < 0.0 || gen.p_norm < 0.0)
    throw std::invalid_argument("generate_sin2pl: scales must be >= 0");

  rng::Stream stream = rng::make_stream(seed, rng::Lane::generator, 0x51712);
  const Mat Q = detail::random_orthogonal(stream, d);
  const Mat Dbar = detail::symmetrize(
      Q * detail::linspace(gen.h_min, gen.h_max, d).asDiagonal() *
      Q.transpose());
  const auto Z = detail::zero_sum_sym(stream, m, d, gen.het);

  std::vector<Mat> D;
  std::vector<Vec> c;
  D.reserve(static_cast<std::size_t>(m));
  c.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    D.push_back(Dbar + Z[static_cast<std::size_t>(i)]);
    c.push_back(detail::gauss_vec(stream, d, gen.c_scale));
  }

  Mat P = detail::gauss_mat(stream, p, d);
  const double top = detail::spectral_norm(P);
  P *= (top > 0.0 ? gen.p_norm / top : 0.0);

  return make_sin2pl(std::move(D), std::move(c), std::move(P), sigma);
}

}  // namespace dmgda
