#pragma once

// The singular quadratic game family (PL but not strongly concave dual).
//
//   f^i(x, y) = (1/2) x^T A_i x + x^T B_i y - (1/2) y^T C_i y
//               + a_i^T x + b_i^T y
//
// with A_i, C_i symmetric. The averaged dual curvature Cbar = (1/m) sum C_i
// must be PSD (possibly singular, so the dual maximizer is a set, not a
// point). Writing Cbar^+ for the pseudoinverse (eigenvalues below
// 1e-10 * lambda_max treated as zero):
//
//   y*(x) = Cbar^+ (Bbar^T x + bbar)            (any maximizer)
//   F(x)  = (1/2) x^T H x + l^T x + (1/2) bbar^T Cbar^+ bbar,
//           H = Abar + Bbar Cbar^+ Bbar^T,  l = abar + Bbar Cbar^+ bbar
//
// For max_y f(x, y) to be attained for every x, each row of every B_i and
// every b_i must lie in range(Cbar); construction enforces this (otherwise F
// would be +infinity). The PL constant of f(x, .) is exactly the smallest
// nonzero eigenvalue of Cbar: in the eigenbasis of Cbar the dual gap is
// (1/2) sum_k lambda_k delta_k^2 and the gradient norm squared is
// sum_k lambda_k^2 delta_k^2, so the PL ratio is minimized at lambda_min>0.
// The same decomposition gives the error-bound and quadratic-growth
// constants against dist(y, argmax) = |range-projection of y - y*(x)|.
//
// L_f is the exact per-node joint Hessian norm
//   max_i | [[A_i, B_i], [B_i^T, -C_i]] |_2
// computed by symmetric eigendecomposition at construction.
//
// Boundedness: F is quadratic with Hessian H; construction requires H PSD
// with a consistent stationary equation, else no finite lower bound exists.

#include "dmgda/problems.hpp"

namespace dmgda {

class PLQuadratic final : public ProblemInstance {
 public:
  PLQuadratic(std::vector<Mat> A, std::vector<Mat> B, std::vector<Mat> C,
              std::vector<Vec> a, std::vector<Vec> b, double sigma)
      : A_(std::move(A)),
        B_(std::move(B)),
        C_(std::move(C)),
        a_(std::move(a)),
        b_(std::move(b)) {
    const int m = static_cast<int>(A_.size());
    if (m < 1)
      throw std::invalid_argument("plquadratic: need at least one node");
    if (B_.size() != A_.size() || C_.size() != A_.size() ||
        a_.size() != A_.size() || b_.size() != A_.size())
      throw std::invalid_argument(
          "plquadratic: A, B, C, a, b must all have one block per node");
    const int d = static_cast<int>(A_[0].rows());
    const int p = static_cast<int>(C_[0].rows());
    set_shape(m, d, p);
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      detail::require_symmetric(A_[s], "plquadratic: A[" + std::to_string(i) + "]");
      detail::require_symmetric(C_[s], "plquadratic: C[" + std::to_string(i) + "]");
      if (A_[s].rows() != d || C_[s].rows() != p || B_[s].rows() != d ||
          B_[s].cols() != p || a_[s].size() != d || b_[s].size() != p)
        throw std::invalid_argument("plquadratic: block " + std::to_string(i) +
                                    " has inconsistent dimensions");
    }

    Abar_ = Mat::Zero(d, d);
    Bbar_ = Mat::Zero(d, p);
    Cbar_ = Mat::Zero(p, p);
    abar_ = Vec::Zero(d);
    bbar_ = Vec::Zero(p);
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      Abar_ += A_[s];
      Bbar_ += B_[s];
      Cbar_ += C_[s];
      abar_ += a_[s];
      bbar_ += b_[s];
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    Abar_ *= inv_m;
    Bbar_ *= inv_m;
    Cbar_ *= inv_m;
    abar_ *= inv_m;
    bbar_ *= inv_m;

    // Dual eigenstructure and pseudoinverse.
    Eigen::SelfAdjointEigenSolver<Mat> esc(detail::symmetrize(Cbar_));
    const Vec cev = esc.eigenvalues();
    const double cmax = std::abs(cev(p - 1));
    if (cev(0) < -1e-12 * std::max(1.0, cmax))
      throw std::invalid_argument(
          "plquadratic: average dual curvature Cbar is not PSD");
    const double rank_tol = 1e-10 * std::max(cmax, 1e-300);
    int rank = 0;
    for (int k = 0; k < p; ++k)
      if (cev(k) > rank_tol) ++rank;
    if (rank == 0)
      throw std::invalid_argument(
          "plquadratic: Cbar vanishes; no PL constant exists");
    rank_ = rank;
    Ur_ = Mat(p, rank);
    lam_r_ = Vec(rank);
    int col = 0;
    for (int k = 0; k < p; ++k) {
      if (cev(k) > rank_tol) {
        Ur_.col(col) = esc.eigenvectors().col(k);
        lam_r_(col) = cev(k);
        ++col;
      }
    }

    // Range conditions: rows of each B_i and each b_i must lie in
    // range(Cbar), else max_y f(x, y) = +inf for some x.
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const Mat Bt = B_[s].transpose();  // columns are rows of B_i
      for (int k = 0; k < d; ++k) {
        const Vec v = Bt.col(k);
        const Vec res = v - Ur_ * (Ur_.transpose() * v);
        if (res.norm() > 1e-10 * (1.0 + v.norm()))
          throw std::invalid_argument(
              "plquadratic: row " + std::to_string(k) + " of B[" +
              std::to_string(i) +
              "] lies outside range(Cbar); the dual maximum is not attained");
      }
      const Vec res = b_[s] - Ur_ * (Ur_.transpose() * b_[s]);
      if (res.norm() > 1e-10 * (1.0 + b_[s].norm()))
        throw std::invalid_argument(
            "plquadratic: b[" + std::to_string(i) +
            "] lies outside range(Cbar); the dual maximum is not attained");
    }

    // Envelope data.
    HF_ = detail::symmetrize(Abar_ + Bbar_ * pinv_apply_mat(Bbar_.transpose()));
    lF_ = abar_ + Bbar_ * pinv_apply(bbar_);
    F_const_ = 0.5 * bbar_.dot(pinv_apply(bbar_));

    // Bounded-below check on the envelope.
    Eigen::SelfAdjointEigenSolver<Mat> esh(HF_);
    const Vec hev = esh.eigenvalues();
    const double hmax = std::max(1.0, std::abs(hev(d - 1)));
    if (hev(0) < -1e-12 * hmax)
      throw std::invalid_argument(
          "plquadratic: envelope curvature is not PSD; F is unbounded below");
    const double h_tol = 1e-10 * hmax;
    Vec pinv_l = Vec::Zero(d);
    Vec proj_l = Vec::Zero(d);
    for (int k = 0; k < d; ++k) {
      if (hev(k) > h_tol) {
        const double coeff = esh.eigenvectors().col(k).dot(lF_);
        pinv_l += (coeff / hev(k)) * esh.eigenvectors().col(k);
        proj_l += coeff * esh.eigenvectors().col(k);
      }
    }
    if ((lF_ - proj_l).norm() > 1e-10 * (1.0 + lF_.norm()))
      throw std::invalid_argument(
          "plquadratic: envelope stationarity equation inconsistent; F is "
          "unbounded below");
    const double F_star = -0.5 * lF_.dot(pinv_l) + F_const_;

    // Exact per-node joint Hessian norms.
    double L_f = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto s = static_cast<std::size_t>(i);
      Mat H(d + p, d + p);
      H.topLeftCorner(d, d) = A_[s];
      H.topRightCorner(d, p) = B_[s];
      H.bottomLeftCorner(p, d) = B_[s].transpose();
      H.bottomRightCorner(p, p) = -C_[s];
      L_f = std::max(L_f, detail::spectral_norm_sym(H));
    }
    if (L_f == 0.0)
      throw std::invalid_argument(
          "plquadratic: all blocks vanish; L_f would be zero");

    constants_ = ProblemConstants::certify(L_f, lam_r_.minCoeff(), sigma, F_star);
  }

  const char* family() const override { return "plquadratic"; }

  double value(int i, const Vec& x, const Vec& y) const override {
    check_node(i);
    check_dims(x, y);
    const auto s = static_cast<std::size_t>(i);
    return 0.5 * x.dot(A_[s] * x) + x.dot(B_[s] * y) -
           0.5 * y.dot(C_[s] * y) + a_[s].dot(x) + b_[s].dot(y);
  }

  GradPair grad(int i, const Vec& x, const Vec& y) const override {
    check_node(i);
    check_dims(x, y);
    const auto s = static_cast<std::size_t>(i);
    GradPair g;
    g.gx = A_[s] * x + B_[s] * y + a_[s];
    g.gy = B_[s].transpose() * x - C_[s] * y + b_[s];
    return g;
  }

  std::pair<double, Vec> oracle_F(const Vec& x) const override {
    if (x.size() != d_)
      throw std::invalid_argument("plquadratic: x dimension mismatch");
    const double F = 0.5 * x.dot(HF_ * x) + lF_.dot(x) + F_const_;
    return {F, HF_ * x + lF_};
  }

  Vec best_response(const Vec& x) const override {
    if (x.size() != d_)
      throw std::invalid_argument("plquadratic: x dimension mismatch");
    return pinv_apply(Bbar_.transpose() * x + bbar_);
  }

  double dual_dist(const Vec& x, const Vec& y) const override {
    check_dims(x, y);
    // Distance to the argmax set y*(x) + null(Cbar): range components only.
    const Vec delta = y - best_response(x);
    return (Ur_.transpose() * delta).norm();
  }

  json to_json() const override {
    json j;
    j["family"] = "plquadratic";
    j["m"] = m_;
    j["d"] = d_;
    j["p"] = p_;
    j["sigma"] = constants_.sigma;
    json A = json::array(), B = json::array(), C = json::array(),
         a = json::array(), b = json::array();
    for (int i = 0; i < m_; ++i) {
      const auto s = static_cast<std::size_t>(i);
      A.push_back(detail::mat_to_json(A_[s]));
      B.push_back(detail::mat_to_json(B_[s]));
      C.push_back(detail::mat_to_json(C_[s]));
      a.push_back(detail::vec_to_json(a_[s]));
      b.push_back(detail::vec_to_json(b_[s]));
    }
    j["A"] = std::move(A);
    j["B"] = std::move(B);
    j["C"] = std::move(C);
    j["a"] = std::move(a);
    j["b"] = std::move(b);
    return j;
  }

  int dual_rank() const { return rank_; }
  const Mat& range_basis() const { return Ur_; }

 private:
  Vec pinv_apply(const Vec& v) const {
    const Vec coeffs = Ur_.transpose() * v;
    return Ur_ * coeffs.cwiseQuotient(lam_r_);
  }
  Mat pinv_apply_mat(const Mat& V) const {
    const Mat coeffs = Ur_.transpose() * V;
    return Ur_ * lam_r_.cwiseInverse().asDiagonal() * coeffs;
  }

  std::vector<Mat> A_, B_, C_;
  std::vector<Vec> a_, b_;
  Mat Abar_, Bbar_, Cbar_;
  Vec abar_, bbar_;
  int rank_ = 0;
  Mat Ur_;     // orthonormal basis of range(Cbar)
  Vec lam_r_;  // its positive eigenvalues
  Mat HF_;
  Vec lF_;
  double F_const_ = 0.0;
};

inline ProblemPtr make_plquadratic(std::vector<Mat> A, std::vector<Mat> B,
                                   std::vector<Mat> C, std::vector<Vec> a,
                                   std::vector<Vec> b, double sigma) {
  return std::make_shared<PLQuadratic>(std::move(A), std::move(B),
                                       std::move(C), std::move(a),
                                       std::move(b), sigma);
}

// Seeded synthetic generator with spectrum controls.
//
//   dual_rank    rank of Cbar (default p-1 for p >= 2, so the nullspace is
//                nontrivial; 1 for p = 1)
//   mu, c_max    spectrum of Cbar on its range: linspace(mu, c_max, rank)
//   h_min, h_max spectrum of the envelope Hessian H = Abar + Bbar Cbar^+
//                Bbar^T; with h_min > 0 the envelope is strongly convex even
//                though Abar = H - Bbar Cbar^+ Bbar^T is typically indefinite
//   coupling     scale of the coupling factor (drives Abar indefinite)
//   het          zero-sum per-node heterogeneity scale
//   lin_scale    scale of the linear terms
struct PLQuadraticGen {
  int dual_rank = 0;  // 0 = default
  double mu = 0.1;
  double c_max = 1.0;
  double h_min = 0.25;
  double h_max = 1.5;
  double coupling = 1.0;
  double het = 0.3;
  double lin_scale = 1.0;
};

inline ProblemPtr generate_plquadratic(int m, int d, int p,
                                       const PLQuadraticGen& gen,
                                       std::uint64_t seed, double sigma) {
  if (m < 1 || d < 1 || p < 1)
    throw std::invalid_argument("generate_plquadratic: m, d, p must be >= 1");
  int rank = gen.dual_rank;
  if (rank == 0) rank = (p >= 2) ? p - 1 : 1;
  if (rank < 1 || rank > p || (p >= 2 && rank >= p))
    throw std::invalid_argument(
        "generate_plquadratic: dual_rank must be in [1, p), with a "
        "nontrivial nullspace for p >= 2");
  if (!(gen.mu > 0.0) || gen.c_max < gen.mu)
    throw std::invalid_argument(
        "generate_plquadratic: need 0 < mu <= c_max");
  if (!(gen.h_min > 0.0) || gen.h_max < gen.h_min)
    throw std::invalid_argument(
        "generate_plquadratic: need 0 < h_min <= h_max");

  rng::Stream stream = rng::make_stream(seed, rng::Lane::generator, 0x91a9);

  const Mat Qy = detail::random_orthogonal(stream, p);
  const Mat Ur = Qy.leftCols(rank);
  const Vec lam = detail::linspace(gen.mu, gen.c_max, rank);
  const Mat Cbar = detail::symmetrize(Ur * lam.asDiagonal() * Ur.transpose());

  const Mat N = detail::gauss_mat(stream, d, rank, gen.coupling);
  const Mat Bbar = N * Ur.transpose();  // rows in range(Cbar) by construction

  const Mat Qx = detail::random_orthogonal(stream, d);
  const Mat H = detail::symmetrize(
      Qx * detail::linspace(gen.h_min, gen.h_max, d).asDiagonal() *
      Qx.transpose());
  const Mat Abar =
      detail::symmetrize(H - N * lam.cwiseInverse().asDiagonal() * N.transpose());

  const Vec abar = detail::gauss_vec(stream, d, gen.lin_scale);
  const Vec tbar = detail::gauss_vec(stream, rank, gen.lin_scale);

  const auto ZA = detail::zero_sum_sym(stream, m, d, gen.het);
  const auto ZC = detail::zero_sum_sym(stream, m, p, gen.het);
  const auto ZN = detail::zero_sum_mat(stream, m, d, rank, gen.het);
  const auto za = detail::zero_sum_vec(stream, m, d, gen.het);
  const auto zt = detail::zero_sum_vec(stream, m, rank, gen.het);

  std::vector<Mat> A, B, C;
  std::vector<Vec> a, b;
  for (int i = 0; i < m; ++i) {
    const auto s = static_cast<std::size_t>(i);
    A.push_back(Abar + ZA[s]);
    B.push_back((N + ZN[s]) * Ur.transpose());
    C.push_back(Cbar + ZC[s]);
    a.push_back(abar + za[s]);
    b.push_back(Ur * (tbar + zt[s]));
  }
  return make_plquadratic(std::move(A), std::move(B), std::move(C),
                          std::move(a), std::move(b), sigma);
}

}  // namespace dmgda
