// Mixing-matrix construction, validation, spectra, and the gossip primitive.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "dmgda/rng.hpp"
#include "dmgda/topology.hpp"

using namespace dmgda;

namespace {

Vec random_vec(rng::Stream& st, int n) {
  Vec v(n);
  for (int k = 0; k < n; ++k) v(k) = st.normal();
  return v;
}

const ValidationItem& item(const ValidationReport& rep, const std::string& n) {
  for (const auto& it : rep.items)
    if (it.name == n) return it;
  FAIL("missing validation item " + n);
  return rep.items.front();
}

}  // namespace

TEST_CASE("complete graph under metropolis is the exact averaging matrix",
          "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::complete, 4);
  CHECK((W.weights.array() == 0.25).all());
  CHECK(W.nu == 0.0);  // exact: W - 11^T/m is the zero matrix
  CHECK(spectral_gap(W.weights) == 0.0);
  CHECK(build_mixing(GraphFamily::complete, 8).nu == 0.0);
}

TEST_CASE("single node gives W = [1] for every family", "[topology]") {
  for (GraphFamily f : {GraphFamily::complete, GraphFamily::ring,
                        GraphFamily::path}) {
    const MixingMatrix W = build_mixing(f, 1);
    REQUIRE(W.m == 1);
    CHECK(W.weights(0, 0) == 1.0);
    CHECK(W.nu == 0.0);
  }
  const MixingMatrix Wl =
      build_mixing(GraphFamily::ring, 1, Weighting::lazy_uniform);
  CHECK(Wl.weights(0, 0) == 1.0);
}

TEST_CASE("ring of 4 with metropolis weights has nu = 1/3", "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::ring, 4);
  // Every vertex has degree 2, so each edge weight is 1/(1+2) and the
  // diagonal absorbs the rest: the circulant (1/3, 1/3, 0, 1/3) whose
  // eigenvalues are 1/3 + (2/3) cos(2 pi k / 4) = {1, 1/3, -1/3, 1/3}.
  for (int i = 0; i < 4; ++i) {
    CHECK(W.weights(i, i) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(W.weights(i, (i + 1) % 4) == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK(W.weights(i, (i + 2) % 4) == 0.0);
  }
  CHECK(std::abs(W.nu - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("ring of 4 with lazy-uniform weights has nu = 1/2", "[topology]") {
  const MixingMatrix W =
      build_mixing(GraphFamily::ring, 4, Weighting::lazy_uniform);
  // d_max = 2: edges get 1/4, diagonal 1/2; circulant eigenvalues
  // 1/2 + (1/2) cos(2 pi k / 4) = {1, 1/2, 0, 1/2}.
  for (int i = 0; i < 4; ++i) {
    CHECK(W.weights(i, i) == Catch::Approx(0.5).margin(1e-15));
    CHECK(W.weights(i, (i + 1) % 4) == Catch::Approx(0.25).margin(1e-15));
  }
  CHECK(std::abs(W.nu - 0.5) <= 1e-12);
}

TEST_CASE("path of 2 is the exact pairwise average", "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::path, 2);
  CHECK(W.weights(0, 0) == 0.5);
  CHECK(W.weights(0, 1) == 0.5);
  CHECK(W.nu == 0.0);  // eigenvalues {1, 0}
}

TEST_CASE("2x2 grid is the 4-cycle", "[topology]") {
  const EdgeList g = make_graph(GraphFamily::grid2d, 4, 2, 2);
  CHECK(g.edges.size() == 4);
  const MixingMatrix W = build_mixing(GraphFamily::grid2d, 4,
                                      Weighting::metropolis, 2, 2);
  CHECK(std::abs(W.nu - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("grid2d demands matching side lengths", "[topology]") {
  CHECK(make_graph(GraphFamily::grid2d, 6, 2, 3).edges.size() == 7);
  CHECK_THROWS_AS(make_graph(GraphFamily::grid2d, 6, 2, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_graph(GraphFamily::grid2d, 6, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("make_graph rejects m < 1 and custom family", "[topology]") {
  CHECK_THROWS_AS(make_graph(GraphFamily::ring, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(GraphFamily::custom, 4), std::invalid_argument);
}

TEST_CASE("validate_mixing reports per-invariant results", "[topology]") {
  SECTION("identity matrix fails only the spectral check") {
    const ValidationReport rep = validate_mixing(Mat::Identity(2, 2));
    CHECK(item(rep, "symmetry").pass);
    CHECK(item(rep, "row_sums").pass);
    CHECK(item(rep, "col_sums").pass);
    CHECK(item(rep, "nonnegativity").pass);
    CHECK_FALSE(item(rep, "nu_lt_1").pass);
    CHECK(item(rep, "nu_lt_1").worst == Catch::Approx(1.0).margin(1e-12));
    CHECK_FALSE(rep.all_pass());
  }
  SECTION("complete-graph averaging matrix passes everything") {
    const ValidationReport rep =
        validate_mixing(Mat::Constant(3, 3, 1.0 / 3.0));
    CHECK(rep.all_pass());
  }
  SECTION("asymmetric column-stochastic matrix fails symmetry and sums") {
    Mat W(2, 2);
    W << 0.6, 0.5, 0.4, 0.5;
    const ValidationReport rep = validate_mixing(W);
    CHECK_FALSE(item(rep, "symmetry").pass);
    CHECK(item(rep, "symmetry").worst == Catch::Approx(0.1).margin(1e-15));
    // One orientation of sums is exactly 1, the other is off by 0.1.
    CHECK(item(rep, "row_sums").pass != item(rep, "col_sums").pass);
    CHECK_FALSE(rep.all_pass());
  }
  SECTION("negative entries are caught") {
    Mat W(2, 2);
    W << 1.5, -0.5, -0.5, 1.5;
    CHECK_FALSE(item(validate_mixing(W), "nonnegativity").pass);
  }
  SECTION("non-square input is an argument error") {
    CHECK_THROWS_AS(validate_mixing(Mat::Zero(2, 3)), std::invalid_argument);
  }
}

TEST_CASE("spectral_gap rejects structurally invalid candidates", "[topology]") {
  Mat W(2, 2);
  W << 0.6, 0.5, 0.4, 0.5;
  CHECK_THROWS_AS(spectral_gap(W), std::invalid_argument);
}

TEST_CASE("spectral_gap is invariant under node relabeling", "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::path, 5);
  Eigen::PermutationMatrix<Eigen::Dynamic> P(5);
  P.setIdentity();
  P.indices() << 3, 0, 4, 1, 2;
  const Mat conj = P * W.weights * P.transpose();
  CHECK(std::abs(spectral_gap(conj) - W.nu) <= 1e-12);
}

TEST_CASE("disconnected custom graphs fail with named components",
          "[topology]") {
  EdgeList g;
  g.m = 4;
  g.edges = {{0, 1}, {2, 3}};
  CHECK_THROWS_WITH(build_mixing(g, Weighting::metropolis),
                    Catch::Matchers::ContainsSubstring("{0,1}") &&
                        Catch::Matchers::ContainsSubstring("{2,3}"));
}

TEST_CASE("edge-list parsing", "[topology]") {
  SECTION("comments, blanks, duplicates, and orientation are normalized") {
    std::istringstream in(
        "# star on 4 nodes\n"
        "0 1\n"
        "\n"
        "2 0   # reversed duplicate below\n"
        "0 2\n"
        "0 3\n");
    const EdgeList g = parse_edge_list(in);
    REQUIRE(g.m == 4);
    REQUIRE(g.edges.size() == 3);
    CHECK(g.edges[0] == std::make_pair(0, 1));
    CHECK(g.edges[1] == std::make_pair(0, 2));
    CHECK(g.edges[2] == std::make_pair(0, 3));
  }
  SECTION("m_hint can extend the node count") {
    std::istringstream in("0 1\n");
    CHECK(parse_edge_list(in, 6).m == 6);
  }
  SECTION("malformed lines raise argument errors") {
    std::istringstream self("0 0\n");
    CHECK_THROWS_AS(parse_edge_list(self), std::invalid_argument);
    std::istringstream neg("-1 2\n");
    CHECK_THROWS_AS(parse_edge_list(neg), std::invalid_argument);
    std::istringstream lone("3\n");
    CHECK_THROWS_AS(parse_edge_list(lone), std::invalid_argument);
    std::istringstream extra("0 1 2\n");
    CHECK_THROWS_AS(parse_edge_list(extra), std::invalid_argument);
    std::istringstream empty("# nothing\n");
    CHECK_THROWS_AS(parse_edge_list(empty), std::invalid_argument);
  }
  SECTION("missing file raises an argument error") {
    CHECK_THROWS_AS(load_edge_list("/nonexistent/edges.txt"),
                    std::invalid_argument);
  }
}

TEST_CASE("mix on identical inputs returns them unchanged", "[topology]") {
  rng::Stream st = rng::make_stream(11, rng::Lane::certificate, 0x701);
  const Vec v = random_vec(st, 5);
  for (GraphFamily f : {GraphFamily::complete, GraphFamily::ring,
                        GraphFamily::path}) {
    const MixingMatrix W = build_mixing(f, 6);
    const std::vector<Vec> out = mix(W, std::vector<Vec>(6, v));
    for (const Vec& o : out)
      CHECK((o - v).cwiseAbs().maxCoeff() <=
            1e-12 * (1.0 + v.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("mix on the complete pair averages exactly", "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::complete, 2);
  Vec e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  const std::vector<Vec> out = mix(W, std::vector<Vec>{e1, e2});
  CHECK(out[0](0) == 0.5);
  CHECK(out[0](1) == 0.5);
  CHECK(out[1](0) == 0.5);
  CHECK(out[1](1) == 0.5);
}

TEST_CASE("mix of the standard basis exposes the weights row by row",
          "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::ring, 4);
  std::vector<Vec> basis;
  for (int j = 0; j < 4; ++j) {
    Vec e = Vec::Zero(4);
    e(j) = 1.0;
    basis.push_back(e);
  }
  const std::vector<Vec> out = mix(W, basis);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const bool neighbor =
          j == i || j == (i + 1) % 4 || j == (i + 3) % 4;
      CHECK(out[static_cast<std::size_t>(i)](j) ==
            Catch::Approx(neighbor ? 1.0 / 3.0 : 0.0).margin(1e-15));
    }
}

TEST_CASE("mix rejects mismatched inputs", "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::ring, 3);
  CHECK_THROWS_AS(mix(W, std::vector<Vec>(2, Vec::Zero(4))),
                  std::invalid_argument);
  std::vector<Vec> ragged{Vec::Zero(4), Vec::Zero(3), Vec::Zero(4)};
  CHECK_THROWS_AS(mix(W, ragged), std::invalid_argument);
  CHECK_THROWS_AS(mix(W, Mat::Zero(4, 2)), std::invalid_argument);
}

TEST_CASE("mix preserves the mean and contracts around it", "[topology]") {
  rng::Stream st = rng::make_stream(5, rng::Lane::certificate, 0x702);
  int cases = 0;
  for (int m = 1; m <= 16; ++m) {
    std::vector<MixingMatrix> Ws;
    for (Weighting w : {Weighting::metropolis, Weighting::lazy_uniform}) {
      Ws.push_back(build_mixing(GraphFamily::complete, m, w));
      Ws.push_back(build_mixing(GraphFamily::ring, m, w));
      Ws.push_back(build_mixing(GraphFamily::path, m, w));
    }
    if (m == 6) Ws.push_back(build_mixing(GraphFamily::grid2d, 6,
                                          Weighting::metropolis, 2, 3));
    if (m == 16) Ws.push_back(build_mixing(GraphFamily::grid2d, 16,
                                           Weighting::metropolis, 4, 4));
    for (const MixingMatrix& W : Ws) {
      REQUIRE(validate_mixing(W.weights).all_pass());
      for (int rep = 0; rep < 11; ++rep) {
        Mat in(3, m);
        for (int j = 0; j < m; ++j) in.col(j) = random_vec(st, 3);
        const Mat out = mix(W, in);
        const Vec mean_in = in.rowwise().mean();
        const Vec mean_out = out.rowwise().mean();
        CHECK((mean_out - mean_in).norm() <=
              1e-12 * (1.0 + mean_in.norm()));
        // Contraction toward consensus with the measured nu.
        const Mat dev_in = in.colwise() - mean_in;
        const Mat dev_out = out.colwise() - mean_out;
        CHECK(dev_out.norm() <= W.nu * dev_in.norm() + 1e-12);
        ++cases;
      }
    }
  }
  CHECK(cases >= 1000);  // >= 1000 property evaluations overall
}

TEST_CASE("mix_into computes exactly the per-column products mix uses",
          "[topology]") {
  const MixingMatrix W = build_mixing(GraphFamily::path, 5);
  rng::Stream st = rng::make_stream(17, rng::Lane::certificate, 0x703);
  Mat in(4, 5);
  for (int j = 0; j < 5; ++j) in.col(j) = random_vec(st, 4);
  const Mat whole = mix(W, in);
  Mat pieces(4, 5);
  mix_into(W, in, pieces, 0, 2);
  mix_into(W, in, pieces, 2, 5);
  CHECK((whole - pieces).cwiseAbs().maxCoeff() == 0.0);
}
