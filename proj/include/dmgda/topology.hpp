#pragma once

// Gossip-network mixing matrices.
//
// A mixing matrix W encodes one averaging round over an undirected connected
// graph. Valid W are symmetric, doubly stochastic, nonnegative, with support
// on edges-plus-diagonal. Their consensus speed is governed by
//
//     nu = max(|lambda_2|, |lambda_m|)  <  1,
//
// the largest eigenvalue magnitude after excluding the single top eigenvalue
// lambda_1 = 1 (eigenvector 1/sqrt(m)). We compute nu as the spectral norm of
// W - (1/m) 1 1^T, which maps lambda_1 to 0 and leaves the rest of the
// spectrum intact; for the exactly-uniform complete-graph matrix this is the
// zero matrix, so nu(complete) = 0 holds exactly.
//
// Two weightings are provided for every graph family:
//   metropolis:   W_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
//                 W_ii = 1 - sum_{j != i} W_ij
//   lazy-uniform: W = I/2 + A_hat/2 with A_hat_ij = 1/d_max on edges,
//                 i.e. W_ij = 1/(2 d_max), W_ii = 1 - deg_i/(2 d_max)
// Both are symmetric and doubly stochastic for any connected graph.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmgda {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class GraphFamily { complete, ring, path, grid2d, custom };
enum class Weighting { metropolis, lazy_uniform };

inline const char* to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::complete: return "complete";
    case GraphFamily::ring: return "ring";
    case GraphFamily::path: return "path";
    case GraphFamily::grid2d: return "grid2d";
    case GraphFamily::custom: return "custom";
  }
  return "?";
}

inline const char* to_string(Weighting w) {
  return w == Weighting::metropolis ? "metropolis" : "lazy-uniform";
}

// ── graphs ──────────────────────────────────────────────────────────────────

// Undirected simple graph as a deduplicated edge set (i < j), no self-loops.
struct EdgeList {
  int m = 0;
  std::vector<std::pair<int, int>> edges;
};

namespace detail {

inline std::vector<std::vector<int>> adjacency(const EdgeList& g) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.m));
  for (auto [i, j] : g.edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  return adj;
}

// Connected components via BFS, each sorted ascending.
inline std::vector<std::vector<int>> components(const EdgeList& g) {
  const auto adj = adjacency(g);
  std::vector<bool> seen(static_cast<std::size_t>(g.m), false);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < g.m; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    std::vector<int> comp, queue{s};
    seen[static_cast<std::size_t>(s)] = true;
    while (!queue.empty()) {
      const int v = queue.back();
      queue.pop_back();
      comp.push_back(v);
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = true;
          queue.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline std::string format_components(const std::vector<std::vector<int>>& cs) {
  std::ostringstream os;
  for (const auto& c : cs) {
    os << '{';
    for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k];
    os << '}';
  }
  return os.str();
}

}  // namespace detail

// Standard families. grid2d requires m == rows * cols with the given sides.
inline EdgeList make_graph(GraphFamily family, int m, int rows = 0,
                           int cols = 0) {
  if (m < 1) throw std::invalid_argument("make_graph: m must be >= 1");
  EdgeList g;
  g.m = m;
  switch (family) {
    case GraphFamily::complete:
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) g.edges.emplace_back(i, j);
      break;
    case GraphFamily::ring:
      if (m == 2) {
        g.edges.emplace_back(0, 1);  // a 2-ring degenerates to one edge
      } else {
        for (int i = 0; i + 1 < m; ++i) g.edges.emplace_back(i, i + 1);
        if (m > 2) g.edges.emplace_back(0, m - 1);
      }
      break;
    case GraphFamily::path:
      for (int i = 0; i + 1 < m; ++i) g.edges.emplace_back(i, i + 1);
      break;
    case GraphFamily::grid2d: {
      if (rows < 1 || cols < 1 || rows * cols != m)
        throw std::invalid_argument(
            "make_graph: grid2d requires rows*cols == m with positive sides");
      auto id = [cols](int r, int c) { return r * cols + c; };
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          if (c + 1 < cols) g.edges.emplace_back(id(r, c), id(r, c + 1));
          if (r + 1 < rows) g.edges.emplace_back(id(r, c), id(r + 1, c));
        }
      break;
    }
    case GraphFamily::custom:
      throw std::invalid_argument(
          "make_graph: custom graphs come from an edge list, not a family");
  }
  return g;
}

// Edge-list text format: one "i j" pair per line, 0-indexed, whitespace
// separated; '#' starts a comment; blank lines ignored. Node count is
// max index + 1, or m_hint if that is larger.
inline EdgeList parse_edge_list(std::istream& in, int m_hint = 0) {
  std::set<std::pair<int, int>> edges;
  int max_node = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long i = 0, j = 0;
    if (!(ls >> i)) continue;  // blank or comment-only line
    if (!(ls >> j))
      throw std::invalid_argument("parse_edge_list: line " +
                                  std::to_string(lineno) +
                                  ": expected two node indices");
    std::string extra;
    if (ls >> extra)
      throw std::invalid_argument("parse_edge_list: line " +
                                  std::to_string(lineno) +
                                  ": trailing tokens after edge");
    if (i < 0 || j < 0)
      throw std::invalid_argument("parse_edge_list: line " +
                                  std::to_string(lineno) +
                                  ": negative node index");
    if (i == j)
      throw std::invalid_argument("parse_edge_list: line " +
                                  std::to_string(lineno) +
                                  ": self-loops are not allowed");
    const int a = static_cast<int>(std::min(i, j));
    const int b = static_cast<int>(std::max(i, j));
    edges.insert({a, b});
    max_node = std::max(max_node, b);
  }
  EdgeList g;
  g.m = std::max(max_node + 1, m_hint);
  if (g.m < 1)
    throw std::invalid_argument("parse_edge_list: no nodes in edge list");
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

inline EdgeList load_edge_list(const std::string& path, int m_hint = 0) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("load_edge_list: cannot open '" + path + "'");
  return parse_edge_list(in, m_hint);
}

// ── mixing matrices ─────────────────────────────────────────────────────────

struct MixingMatrix {
  int m = 0;
  Mat weights;                          // m x m, symmetric doubly stochastic
  double nu = 0.0;                      // max |eig| off the consensus direction
  std::vector<std::pair<int, int>> edges;
};

// nu of a symmetric doubly stochastic matrix: spectral norm of W - 11^T/m.
inline double compute_nu(const Mat& W) {
  const auto m = W.rows();
  if (m == 1) return 0.0;
  Mat centered = W;
  centered.array() -= 1.0 / static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(centered,
                                        Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(m - 1)));
}

struct ValidationItem {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // worst violation magnitude (0 when clean)
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
};

// Stochasticity tolerance: ~100x double-precision accumulation error at the
// node counts this library targets.
inline constexpr double kStochasticTol = 1e-12;

// Reports pass/fail per structural invariant of a candidate mixing matrix.
inline ValidationReport validate_mixing(const Mat& W) {
  if (W.rows() != W.cols())
    throw std::invalid_argument("validate_mixing: matrix must be square");
  const auto m = W.rows();
  ValidationReport rep;

  double asym = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      asym = std::max(asym, std::abs(W(i, j) - W(j, i)));
  rep.items.push_back({"symmetry", asym == 0.0, asym});

  const double row_err = (W.rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.items.push_back({"row_sums", row_err <= kStochasticTol, row_err});

  const double col_err = (W.colwise().sum().array() - 1.0).abs().maxCoeff();
  rep.items.push_back({"col_sums", col_err <= kStochasticTol, col_err});

  const double neg = std::max(0.0, -W.minCoeff());
  rep.items.push_back({"nonnegativity", neg == 0.0, neg});

  // Spectral check only makes sense on (near-)symmetric stochastic input;
  // `worst` records the measured nu itself. Matrices whose true nu equals 1
  // (no contraction, e.g. the identity) can round to just below 1 in the
  // eigensolver, so the pass condition keeps a safety margin.
  const bool structural_ok = asym == 0.0 && row_err <= kStochasticTol &&
                             col_err <= kStochasticTol;
  const double nu = structural_ok ? compute_nu(W) : 1.0;
  rep.items.push_back({"nu_lt_1", structural_ok && nu < 1.0 - kStochasticTol, nu});
  return rep;
}

inline MixingMatrix build_mixing(const EdgeList& g, Weighting weighting,
                                 bool exactly_uniform = false) {
  if (g.m < 1) throw std::invalid_argument("build_mixing: m must be >= 1");
  const auto comps = detail::components(g);
  if (comps.size() > 1)
    throw std::invalid_argument(
        "build_mixing: graph is disconnected; components: " +
        detail::format_components(comps));

  const auto m = g.m;
  MixingMatrix M;
  M.m = m;
  M.edges = g.edges;
  Mat& W = M.weights;
  W = Mat::Zero(m, m);

  std::vector<int> deg(static_cast<std::size_t>(m), 0);
  for (auto [i, j] : g.edges) {
    ++deg[static_cast<std::size_t>(i)];
    ++deg[static_cast<std::size_t>(j)];
  }

  if (exactly_uniform) {
    // Complete graph under metropolis weights: uniformly 1/m in exact
    // arithmetic. Built directly so nu == 0 exactly.
    W.setConstant(1.0 / static_cast<double>(m));
  } else if (weighting == Weighting::metropolis) {
    for (auto [i, j] : g.edges)
      W(i, j) = W(j, i) =
          1.0 / (1.0 + static_cast<double>(std::max(
                           deg[static_cast<std::size_t>(i)],
                           deg[static_cast<std::size_t>(j)])));
    for (int i = 0; i < m; ++i) {
      double off = 0.0;
      for (int j = 0; j < m; ++j)
        if (j != i) off += W(i, j);
      W(i, i) = 1.0 - off;
    }
  } else {  // lazy-uniform
    int d_max = 0;
    for (int d : deg) d_max = std::max(d_max, d);
    if (d_max == 0) {
      W(0, 0) = 1.0;  // single isolated node (m == 1)
    } else {
      const double w = 1.0 / (2.0 * static_cast<double>(d_max));
      for (auto [i, j] : g.edges) W(i, j) = W(j, i) = w;
      for (int i = 0; i < m; ++i)
        W(i, i) = 1.0 - static_cast<double>(deg[static_cast<std::size_t>(i)]) * w;
    }
  }

  M.nu = compute_nu(W);
  if (!(M.nu < 1.0))
    throw std::invalid_argument(
        "build_mixing: spectral quantity nu >= 1 (graph effectively "
        "disconnected)");
  return M;
}

inline MixingMatrix build_mixing(GraphFamily family, int m,
                                 Weighting weighting = Weighting::metropolis,
                                 int rows = 0, int cols = 0) {
  const EdgeList g = make_graph(family, m, rows, cols);
  const bool uniform = family == GraphFamily::complete &&
                       weighting == Weighting::metropolis;
  return build_mixing(g, weighting, uniform);
}

// Validated spectral quantity of an arbitrary candidate matrix.
inline double spectral_gap(const Mat& W) {
  const auto rep = validate_mixing(W);
  for (const auto& it : rep.items)
    if (!it.pass && it.name != "nu_lt_1")
      throw std::invalid_argument("spectral_gap: candidate fails '" + it.name +
                                  "' (violation " + std::to_string(it.worst) +
                                  ")");
  return compute_nu(W);
}

inline double spectral_gap(const MixingMatrix& M) { return M.nu; }

// ── the gossip primitive ────────────────────────────────────────────────────
//
// Columns of `in` are per-node vectors; out.col(i) = sum_j W_ij in.col(j).
// Each output column is a single fixed-order matrix-vector product, so the
// arithmetic is identical whether columns are computed serially or in
// parallel (the determinism contract relies on this).
inline void mix_into(const MixingMatrix& M, const Mat& in, Mat& out, int lo,
                     int hi) {
  for (int i = lo; i < hi; ++i)
    out.col(i).noalias() = in * M.weights.col(i);
}

inline Mat mix(const MixingMatrix& M, const Mat& in) {
  if (in.cols() != M.m)
    throw std::invalid_argument("mix: expected one column per node");
  Mat out(in.rows(), in.cols());
  mix_into(M, in, out, 0, M.m);
  return out;
}

// Convenience overload for per-node vector collections.
inline std::vector<Vec> mix(const MixingMatrix& M,
                            const std::vector<Vec>& vectors) {
  if (static_cast<int>(vectors.size()) != M.m)
    throw std::invalid_argument("mix: expected exactly m vectors");
  const auto dim = vectors.front().size();
  for (const auto& v : vectors)
    if (v.size() != dim)
      throw std::invalid_argument("mix: vectors must share one dimension");
  Mat in(dim, M.m);
  for (int j = 0; j < M.m; ++j) in.col(j) = vectors[static_cast<std::size_t>(j)];
  const Mat out = mix(M, in);
  std::vector<Vec> res(static_cast<std::size_t>(M.m));
  for (int j = 0; j < M.m; ++j) res[static_cast<std::size_t>(j)] = out.col(j);
  return res;
}

}  // namespace dmgda
