#pragma once

// Deserialization of problem instances (inverse of ProblemInstance::to_json)
// and generator dispatch by family name.

#include <algorithm>

#include "dmgda/problem_plquadratic.hpp"
#include "dmgda/problem_sin2pl.hpp"

namespace dmgda {

namespace detail {

inline Mat shaped_mat_from_json(const json& j, int rows, int cols,
                                const std::string& what) {
  Mat M = mat_from_json(j, what);
  if (M.rows() != rows || M.cols() != cols)
    throw std::invalid_argument(what + ": expected " + std::to_string(rows) +
                                "x" + std::to_string(cols) + ", got " +
                                std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()));
  return M;
}

inline Vec shaped_vec_from_json(const json& j, int size,
                                const std::string& what) {
  Vec v = vec_from_json(j, what);
  if (v.size() != size)
    throw std::invalid_argument(what + ": expected " + std::to_string(size) +
                                " entries, got " + std::to_string(v.size()));
  return v;
}

inline std::vector<Mat> mats_from_json(const json& j, int rows, int cols,
                                       const std::string& what) {
  if (!j.is_array())
    throw std::invalid_argument("problem_from_json: " + what +
                                " must be an array of matrices");
  std::vector<Mat> out;
  out.reserve(j.size());
  for (const auto& jm : j)
    out.push_back(shaped_mat_from_json(jm, rows, cols, what));
  return out;
}

inline std::vector<Vec> vecs_from_json(const json& j, int size,
                                       const std::string& what) {
  if (!j.is_array())
    throw std::invalid_argument("problem_from_json: " + what +
                                " must be an array of vectors");
  std::vector<Vec> out;
  out.reserve(j.size());
  for (const auto& jv : j)
    out.push_back(shaped_vec_from_json(jv, size, what));
  return out;
}

}  // namespace detail

// Rebuild an instance from the exact shape emitted by to_json().
inline ProblemPtr problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family"))
    throw std::invalid_argument(
        "problem_from_json: expected an object with a \"family\" field");
  const std::string family = j.at("family").get<std::string>();
  if (family != "sin2pl" && family != "plquadratic")
    throw std::invalid_argument("problem_from_json: unknown family \"" +
                                family + "\"");
  const double sigma = j.value("sigma", 0.0);
  const int d = j.at("d").get<int>();
  const int p = j.at("p").get<int>();
  if (family == "sin2pl") {
    return make_sin2pl(detail::mats_from_json(j.at("D"), d, d, "D"),
                       detail::vecs_from_json(j.at("c"), d, "c"),
                       detail::shaped_mat_from_json(j.at("P"), p, d, "P"),
                       sigma);
  }
  return make_plquadratic(detail::mats_from_json(j.at("A"), d, d, "A"),
                          detail::mats_from_json(j.at("B"), d, p, "B"),
                          detail::mats_from_json(j.at("C"), p, p, "C"),
                          detail::vecs_from_json(j.at("a"), d, "a"),
                          detail::vecs_from_json(j.at("b"), p, "b"), sigma);
}

// Generate a seeded instance by family name. Generator knobs are read from
// `knobs` (missing fields keep their defaults); unknown fields are rejected
// so config typos fail loudly.
inline ProblemPtr generate_problem(const std::string& family, int m, int d,
                                   int p, const json& knobs,
                                   std::uint64_t seed, double sigma) {
  const auto get = [&knobs](const char* key, double dflt) {
    return knobs.contains(key) ? knobs.at(key).get<double>() : dflt;
  };
  if (family == "sin2pl") {
    static const std::vector<std::string> known = {"h_min", "h_max", "het",
                                                   "c_scale", "p_norm"};
    for (const auto& [key, val] : knobs.items()) {
      (void)val;
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw std::invalid_argument(
            "generate_problem: unknown sin2pl generator field \"" + key +
            "\"");
    }
    Sin2PLGen g;
    g.h_min = get("h_min", g.h_min);
    g.h_max = get("h_max", g.h_max);
    g.het = get("het", g.het);
    g.c_scale = get("c_scale", g.c_scale);
    g.p_norm = get("p_norm", g.p_norm);
    return generate_sin2pl(m, d, p, g, seed, sigma);
  }
  if (family == "plquadratic") {
    static const std::vector<std::string> known = {
        "dual_rank", "mu",  "c_max",    "h_min",
        "h_max",     "het", "coupling", "lin_scale"};
    for (const auto& [key, val] : knobs.items()) {
      (void)val;
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw std::invalid_argument(
            "generate_problem: unknown plquadratic generator field \"" + key +
            "\"");
    }
    PLQuadraticGen g;
    if (knobs.contains("dual_rank")) g.dual_rank = knobs.at("dual_rank").get<int>();
    g.mu = get("mu", g.mu);
    g.c_max = get("c_max", g.c_max);
    g.h_min = get("h_min", g.h_min);
    g.h_max = get("h_max", g.h_max);
    g.het = get("het", g.het);
    g.coupling = get("coupling", g.coupling);
    g.lin_scale = get("lin_scale", g.lin_scale);
    return generate_plquadratic(m, d, p, g, seed, sigma);
  }
  throw std::invalid_argument("generate_problem: unknown family \"" + family +
                              "\"");
}

}  // namespace dmgda
