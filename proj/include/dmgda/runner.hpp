#pragma once

// Experiment runner: JSON config -> runs/sweeps/verification -> artifacts.
//
// Commands (exit codes: 0 ok, 1 verification failure, 2 config error,
// 3 divergence):
//   run    -> metrics.csv, summary.json
//   sweep  -> sweep.csv, rate.json
//   verify -> verify_report.json, verify_report.txt, metrics.csv,
//             summary.json
//
// metrics.csv schema (fixed):
//   t,stationarity,consensus_x,consensus_y,tracking_dev_x,tracking_dev_y,
//   residual,dual_dist,grad_calls
// with 17-significant-digit decimal floats and LF line endings, so rate fits
// downstream are not quantization-limited and byte-identity across reruns is
// meaningful.
//
// summary.json echoes the exact post-defaulting config, so a summary can be
// re-executed verbatim.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgda/algorithm.hpp"
#include "dmgda/metrics.hpp"
#include "dmgda/problem_factory.hpp"
#include "dmgda/topology.hpp"
#include "dmgda/verify.hpp"
#include "dmgda/version.hpp"

namespace dmgda {

// ── config errors carry the JSON pointer of the offending field ──────────────

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : std::runtime_error("config error at " + path + ": " + msg),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace cfgdetail {

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, val] : j.items()) {
    (void)val;
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) throw ConfigError(path + "/" + key, "unknown field");
  }
}

inline const json* find(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double num(const json& j, const std::string& path, const char* key,
                  std::optional<double> dflt = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (dflt) return *dflt;
    throw ConfigError(path + "/" + key, "required field missing");
  }
  if (!v->is_number())
    throw ConfigError(path + "/" + key, "expected a number");
  return v->get<double>();
}

inline long long integer(const json& j, const std::string& path,
                         const char* key,
                         std::optional<long long> dflt = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (dflt) return *dflt;
    throw ConfigError(path + "/" + key, "required field missing");
  }
  if (!v->is_number_integer())
    throw ConfigError(path + "/" + key, "expected an integer");
  return v->get<long long>();
}

inline std::string str(const json& j, const std::string& path, const char* key,
                       std::optional<std::string> dflt = std::nullopt) {
  const json* v = find(j, key);
  if (!v) {
    if (dflt) return *dflt;
    throw ConfigError(path + "/" + key, "required field missing");
  }
  if (!v->is_string())
    throw ConfigError(path + "/" + key, "expected a string");
  return v->get<std::string>();
}

inline std::uint64_t seed_of(const json& j, const std::string& path,
                             const char* key) {
  const long long s = integer(j, path, key);  // required: no wall-clock seeds
  if (s < 0) throw ConfigError(path + "/" + key, "seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

// x0/y0: absent -> zeros; scalar -> broadcast; array -> exact length.
inline Vec point(const json& j, const std::string& path, const char* key,
                 int dim) {
  const json* v = find(j, key);
  if (!v) return Vec::Zero(dim);
  if (v->is_number()) return Vec::Constant(dim, v->get<double>());
  if (v->is_array()) {
    if (static_cast<int>(v->size()) != dim)
      throw ConfigError(path + "/" + key,
                        "expected " + std::to_string(dim) + " entries, got " +
                            std::to_string(v->size()));
    Vec out(dim);
    for (int k = 0; k < dim; ++k) {
      const json& e = (*v)[static_cast<std::size_t>(k)];
      if (!e.is_number())
        throw ConfigError(path + "/" + key + "/" + std::to_string(k),
                          "expected a number");
      out(k) = e.get<double>();
    }
    return out;
  }
  throw ConfigError(path + "/" + key, "expected a number or array");
}

inline json vec_echo(const Vec& v) {
  json a = json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

}  // namespace cfgdetail

// ── parsed experiment ─────────────────────────────────────────────────────────

enum class CommandKind { run, sweep, verify };

struct Experiment {
  ProblemPtr problem;
  MixingMatrix W;
  AlgoConfig algo;           // post-defaulting
  Vec x0, y0;
  long long cadence = 0;     // resolved (never 0)
  int threads = 1;           // resolved
  std::string out_dir;
  std::vector<long long> T_list;  // sweep
  int repeats = 5;                // sweep
  VerifyOptions verify;           // verify
  std::vector<std::string> warnings;
  json echo;  // exact post-defaulting config
};

struct Overrides {
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<long long> cadence;
};

inline Experiment parse_experiment(const json& cfg, CommandKind kind,
                                   const Overrides& ov = {}) {
  Experiment ex;
  cfgdetail::require_object(cfg, "");
  cfgdetail::reject_unknown(cfg, "",
                            {"problem", "topology", "algorithm", "run",
                             "verify"});

  // problem
  const json* jp = cfgdetail::find(cfg, "problem");
  if (!jp) throw ConfigError("/problem", "required section missing");
  cfgdetail::require_object(*jp, "/problem");
  cfgdetail::reject_unknown(
      *jp, "/problem",
      {"family", "m", "d", "p", "sigma", "seed", "generator", "instance"});
  const std::string family = cfgdetail::str(*jp, "/problem", "family");
  if (family != "sin2pl" && family != "plquadratic")
    throw ConfigError("/problem/family", "unknown family '" + family + "'");
  const json* inst = cfgdetail::find(*jp, "instance");
  if (inst) {
    for (const char* banned : {"sigma", "seed", "generator"})
      if (cfgdetail::find(*jp, banned))
        throw ConfigError(std::string("/problem/") + banned,
                          "not allowed together with an explicit instance");
    try {
      ex.problem = problem_from_json(*inst);
    } catch (const std::exception& e) {
      throw ConfigError("/problem/instance", e.what());
    }
    if (ex.problem->family() != family)
      throw ConfigError("/problem/family",
                        "does not match the instance family");
  } else {
    const auto m = cfgdetail::integer(*jp, "/problem", "m");
    const auto d = cfgdetail::integer(*jp, "/problem", "d");
    const auto p = cfgdetail::integer(*jp, "/problem", "p");
    if (m < 1) throw ConfigError("/problem/m", "must be >= 1");
    if (d < 1) throw ConfigError("/problem/d", "must be >= 1");
    if (p < 1) throw ConfigError("/problem/p", "must be >= 1");
    const double sigma = cfgdetail::num(*jp, "/problem", "sigma", 0.0);
    if (sigma < 0.0) throw ConfigError("/problem/sigma", "must be >= 0");
    const std::uint64_t pseed = cfgdetail::seed_of(*jp, "/problem", "seed");
    json knobs = json::object();
    if (const json* g = cfgdetail::find(*jp, "generator")) {
      cfgdetail::require_object(*g, "/problem/generator");
      knobs = *g;
    }
    try {
      ex.problem = generate_problem(family, static_cast<int>(m),
                                    static_cast<int>(d), static_cast<int>(p),
                                    knobs, pseed, sigma);
    } catch (const std::exception& e) {
      throw ConfigError("/problem/generator", e.what());
    }
  }
  // Cross-check declared shapes when both are present.
  if (inst) {
    for (const char* key : {"m", "d", "p"}) {
      if (cfgdetail::find(*jp, key)) {
        const long long declared = cfgdetail::integer(*jp, "/problem", key);
        const long long actual = key[0] == 'm'   ? ex.problem->m()
                                 : key[0] == 'd' ? ex.problem->d()
                                                 : ex.problem->p();
        if (declared != actual)
          throw ConfigError(std::string("/problem/") + key,
                            "conflicts with the instance (" +
                                std::to_string(actual) + ")");
      }
    }
  }
  const int m = ex.problem->m();

  // topology
  const json* jt = cfgdetail::find(cfg, "topology");
  if (!jt) throw ConfigError("/topology", "required section missing");
  cfgdetail::require_object(*jt, "/topology");
  cfgdetail::reject_unknown(*jt, "/topology",
                            {"family", "weighting", "rows", "cols",
                             "edge_list"});
  const std::string tf = cfgdetail::str(*jt, "/topology", "family");
  const std::string ws =
      cfgdetail::str(*jt, "/topology", "weighting", "metropolis");
  Weighting weighting;
  if (ws == "metropolis")
    weighting = Weighting::metropolis;
  else if (ws == "lazy-uniform")
    weighting = Weighting::lazy_uniform;
  else
    throw ConfigError("/topology/weighting", "unknown weighting '" + ws + "'");
  try {
    if (tf == "custom") {
      const std::string path =
          cfgdetail::str(*jt, "/topology", "edge_list");
      EdgeList el = load_edge_list(path, m);
      if (el.m != m)
        throw std::invalid_argument("edge list has " + std::to_string(el.m) +
                                    " nodes, problem has " +
                                    std::to_string(m));
      ex.W = build_mixing(el, weighting);
    } else {
      GraphFamily gf;
      if (tf == "complete")
        gf = GraphFamily::complete;
      else if (tf == "ring")
        gf = GraphFamily::ring;
      else if (tf == "path")
        gf = GraphFamily::path;
      else if (tf == "grid2d")
        gf = GraphFamily::grid2d;
      else
        throw ConfigError("/topology/family",
                          "unknown family '" + tf + "'");
      const int rows =
          static_cast<int>(cfgdetail::integer(*jt, "/topology", "rows", 0));
      const int cols =
          static_cast<int>(cfgdetail::integer(*jt, "/topology", "cols", 0));
      ex.W = build_mixing(gf, m, weighting, rows, cols);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("/topology", e.what());
  }

  // algorithm
  const json* ja = cfgdetail::find(cfg, "algorithm");
  if (!ja) throw ConfigError("/algorithm", "required section missing");
  cfgdetail::require_object(*ja, "/algorithm");
  cfgdetail::reject_unknown(*ja, "/algorithm",
                            {"T", "schedule", "eta_scale", "alpha_scale",
                             "beta_scale", "gamma", "lambda", "seed",
                             "baseline", "init_spread", "x0", "y0"});
  AlgoConfig ac;
  if (kind == CommandKind::sweep) {
    ac.T = cfgdetail::integer(*ja, "/algorithm", "T", 0);  // per-T overridden
  } else {
    ac.T = cfgdetail::integer(*ja, "/algorithm", "T");
  }
  if (ac.T < 0) throw ConfigError("/algorithm/T", "must be >= 0");
  const std::string sched =
      cfgdetail::str(*ja, "/algorithm", "schedule", "theorem1");
  if (sched == "theorem1")
    ac.schedule_mode = ScheduleMode::theorem1;
  else if (sched == "constant")
    ac.schedule_mode = ScheduleMode::constant;
  else if (sched == "custom")
    throw ConfigError("/algorithm/schedule",
                      "custom schedules are library-only");
  else
    throw ConfigError("/algorithm/schedule",
                      "unknown schedule '" + sched + "'");
  ac.eta_scale = cfgdetail::num(*ja, "/algorithm", "eta_scale", 1.0);
  ac.alpha_scale = cfgdetail::num(*ja, "/algorithm", "alpha_scale", 1.0);
  ac.beta_scale = cfgdetail::num(*ja, "/algorithm", "beta_scale", 1.0);
  if (!(ac.eta_scale > 0.0))
    throw ConfigError("/algorithm/eta_scale", "must be > 0");
  if (!(ac.alpha_scale > 0.0))
    throw ConfigError("/algorithm/alpha_scale", "must be > 0");
  if (!(ac.beta_scale > 0.0))
    throw ConfigError("/algorithm/beta_scale", "must be > 0");
  ac.gamma = cfgdetail::num(*ja, "/algorithm", "gamma", -1.0);
  ac.lambda = cfgdetail::num(*ja, "/algorithm", "lambda", -1.0);
  if (cfgdetail::find(*ja, "gamma") && !(ac.gamma > 0.0))
    throw ConfigError("/algorithm/gamma", "must be > 0");
  if (cfgdetail::find(*ja, "lambda") && !(ac.lambda > 0.0))
    throw ConfigError("/algorithm/lambda", "must be > 0");
  ac.seed = cfgdetail::seed_of(*ja, "/algorithm", "seed");
  const std::string base =
      cfgdetail::str(*ja, "/algorithm", "baseline", "dmgda");
  if (base == "dmgda")
    ac.baseline = BaselineKind::dmgda;
  else if (base == "dsgda_gt")
    ac.baseline = BaselineKind::dsgda_gt;
  else
    throw ConfigError("/algorithm/baseline", "unknown baseline '" + base + "'");
  ac.init_spread = cfgdetail::num(*ja, "/algorithm", "init_spread", 0.0);
  if (ac.init_spread < 0.0)
    throw ConfigError("/algorithm/init_spread", "must be >= 0");
  ex.x0 = cfgdetail::point(*ja, "/algorithm", "x0", ex.problem->d());
  ex.y0 = cfgdetail::point(*ja, "/algorithm", "y0", ex.problem->p());
  if (kind == CommandKind::sweep) {
    // gamma/lambda defaults depend on eta(T), so a sweep resolves them per
    // horizon; keep what the user gave (possibly the -1 sentinel).
    ex.algo = ac;
  } else {
    ex.algo = with_defaults(ac, ex.problem->constants());
    ex.warnings = check_feasibility(ex.algo, ex.problem->constants());
  }

  // run
  json jr = json::object();
  if (const json* r = cfgdetail::find(cfg, "run")) {
    cfgdetail::require_object(*r, "/run");
    cfgdetail::reject_unknown(
        *r, "/run", {"T_list", "repeats", "cadence", "threads", "out"});
    jr = *r;
  }
  long long cadence = cfgdetail::integer(jr, "/run", "cadence", 0);
  if (cadence < 0) throw ConfigError("/run/cadence", "must be >= 0");
  if (ov.cadence) cadence = *ov.cadence;
  ex.cadence = cadence;  // resolved per-run (depends on T) later
  int threads = static_cast<int>(cfgdetail::integer(jr, "/run", "threads", 1));
  if (const char* env = std::getenv("DMGDA_THREADS")) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("/run/threads",
                        "DMGDA_THREADS is not an integer: '" +
                            std::string(env) + "'");
    }
  }
  if (ov.threads) threads = *ov.threads;
  if (threads < 1) throw ConfigError("/run/threads", "must be >= 1");
  ex.threads = threads;
  ex.out_dir = cfgdetail::str(jr, "/run", "out", "out");
  if (ov.out) ex.out_dir = *ov.out;
  if (kind == CommandKind::sweep) {
    const json* tl = cfgdetail::find(jr, "T_list");
    if (!tl) throw ConfigError("/run/T_list", "required for sweeps");
    if (!tl->is_array() || tl->size() < 3)
      throw ConfigError("/run/T_list", "need an array of >= 3 horizons");
    for (std::size_t k = 0; k < tl->size(); ++k) {
      const json& e = (*tl)[k];
      if (!e.is_number_integer() || e.get<long long>() < 1)
        throw ConfigError("/run/T_list/" + std::to_string(k),
                          "expected a positive integer");
      const long long T = e.get<long long>();
      for (long long seen : ex.T_list)
        if (seen == T)
          throw ConfigError("/run/T_list/" + std::to_string(k),
                            "duplicate horizon " + std::to_string(T));
      ex.T_list.push_back(T);
    }
    ex.repeats =
        static_cast<int>(cfgdetail::integer(jr, "/run", "repeats", 5));
    if (ex.repeats < 1) throw ConfigError("/run/repeats", "must be >= 1");
  }

  // verify
  ex.verify.threads = ex.threads;
  if (const json* jv = cfgdetail::find(cfg, "verify")) {
    cfgdetail::require_object(*jv, "/verify");
    cfgdetail::reject_unknown(*jv, "/verify", {"n_samples", "seed", "hooks"});
    ex.verify.n_samples = static_cast<int>(
        cfgdetail::integer(*jv, "/verify", "n_samples", 1000));
    if (ex.verify.n_samples < 1)
      throw ConfigError("/verify/n_samples", "must be >= 1");
    if (cfgdetail::find(*jv, "seed"))
      ex.verify.seed = cfgdetail::seed_of(*jv, "/verify", "seed");
    if (const json* jh = cfgdetail::find(*jv, "hooks")) {
      cfgdetail::require_object(*jh, "/verify/hooks");
      cfgdetail::reject_unknown(*jh, "/verify/hooks",
                                {"perturb_tracking", "nu_scale"});
      ex.verify.hooks.nu_scale =
          cfgdetail::num(*jh, "/verify/hooks", "nu_scale", 1.0);
      if (!(ex.verify.hooks.nu_scale > 0.0))
        throw ConfigError("/verify/hooks/nu_scale", "must be > 0");
      if (const json* jpert = cfgdetail::find(*jh, "perturb_tracking")) {
        cfgdetail::require_object(*jpert, "/verify/hooks/perturb_tracking");
        cfgdetail::reject_unknown(*jpert, "/verify/hooks/perturb_tracking",
                                  {"t", "node", "delta"});
        ex.verify.hooks.perturb_tracking = true;
        ex.verify.hooks.perturb_t =
            cfgdetail::integer(*jpert, "/verify/hooks/perturb_tracking", "t");
        ex.verify.hooks.perturb_node = static_cast<int>(cfgdetail::integer(
            *jpert, "/verify/hooks/perturb_tracking", "node"));
        ex.verify.hooks.perturb_delta = cfgdetail::num(
            *jpert, "/verify/hooks/perturb_tracking", "delta");
      }
    }
  }

  // Echo: the exact configuration used, with every default resolved, valid
  // as an input config.
  json echo;
  json ep;
  ep["family"] = ex.problem->family();
  ep["m"] = ex.problem->m();
  ep["d"] = ex.problem->d();
  ep["p"] = ex.problem->p();
  ep["instance"] = ex.problem->to_json();
  echo["problem"] = std::move(ep);
  json et;
  et["family"] = tf;
  et["weighting"] = ws;
  if (tf == "grid2d") {
    if (cfgdetail::find(*jt, "rows"))
      et["rows"] = cfgdetail::integer(*jt, "/topology", "rows", 0);
    if (cfgdetail::find(*jt, "cols"))
      et["cols"] = cfgdetail::integer(*jt, "/topology", "cols", 0);
  }
  if (tf == "custom")
    et["edge_list"] = cfgdetail::str(*jt, "/topology", "edge_list");
  echo["topology"] = std::move(et);
  json ea;
  ea["T"] = ex.algo.T;
  ea["schedule"] = to_string(ex.algo.schedule_mode);
  ea["eta_scale"] = ex.algo.eta_scale;
  ea["alpha_scale"] = ex.algo.alpha_scale;
  ea["beta_scale"] = ex.algo.beta_scale;
  if (ex.algo.gamma > 0.0) ea["gamma"] = ex.algo.gamma;
  if (ex.algo.lambda > 0.0) ea["lambda"] = ex.algo.lambda;
  ea["seed"] = ex.algo.seed;
  ea["baseline"] = to_string(ex.algo.baseline);
  ea["init_spread"] = ex.algo.init_spread;
  ea["x0"] = cfgdetail::vec_echo(ex.x0);
  ea["y0"] = cfgdetail::vec_echo(ex.y0);
  echo["algorithm"] = std::move(ea);
  json er;
  er["cadence"] = ex.cadence;
  er["threads"] = ex.threads;
  er["out"] = ex.out_dir;
  if (kind == CommandKind::sweep) {
    er["T_list"] = ex.T_list;
    er["repeats"] = ex.repeats;
  }
  echo["run"] = std::move(er);
  if (kind == CommandKind::verify) {
    json ev;
    ev["n_samples"] = ex.verify.n_samples;
    ev["seed"] = ex.verify.seed;
    if (ex.verify.hooks.perturb_tracking || ex.verify.hooks.nu_scale != 1.0) {
      json eh;
      eh["nu_scale"] = ex.verify.hooks.nu_scale;
      if (ex.verify.hooks.perturb_tracking) {
        eh["perturb_tracking"] = {{"t", ex.verify.hooks.perturb_t},
                                  {"node", ex.verify.hooks.perturb_node},
                                  {"delta", ex.verify.hooks.perturb_delta}};
      }
      ev["hooks"] = std::move(eh);
    }
    echo["verify"] = std::move(ev);
  }
  ex.echo = std::move(echo);
  return ex;
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("JSON parse failure: ") + e.what());
  }
}

// ── artifact writers ──────────────────────────────────────────────────────────

namespace cfgdetail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace cfgdetail

inline void write_metrics_csv(const std::string& path,
                              const std::vector<MetricsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_metrics_csv: cannot open '" + path + "'");
  out << "t,stationarity,consensus_x,consensus_y,tracking_dev_x,"
         "tracking_dev_y,residual,dual_dist,grad_calls\n";
  for (const auto& r : records) {
    out << r.t << ',' << cfgdetail::fmt17(r.stationarity) << ','
        << cfgdetail::fmt17(r.consensus_x) << ','
        << cfgdetail::fmt17(r.consensus_y) << ','
        << cfgdetail::fmt17(r.tracking_dev_x) << ','
        << cfgdetail::fmt17(r.tracking_dev_y) << ','
        << cfgdetail::fmt17(r.residual) << ','
        << cfgdetail::fmt17(r.dual_dist) << ',' << r.grad_calls << '\n';
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_json_file: cannot open '" + path + "'");
  out << j.dump(2) << '\n';
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_text_file: cannot open '" + path + "'");
  out << text;
}

inline json summary_to_json(const RunSummary& s, const Experiment& ex,
                            const std::string& command, double wall_seconds,
                            const std::vector<std::string>& extra_warnings) {
  json j;
  j["version"] = version();
  j["command"] = command;
  j["wall_time_seconds"] = wall_seconds;
  j["m"] = s.m;
  j["T"] = s.T;
  j["topology_nu"] = ex.W.nu;
  j["grad_calls_total"] = s.grad_calls_total;
  j["initial_stationarity"] = s.initial_stationarity;
  j["stationarity_t1"] = s.stationarity_t1;
  j["final_stationarity"] = s.final_stationarity;
  j["min_stationarity"] = s.min_stationarity;
  j["mean_stationarity"] = s.mean_stationarity;
  j["final_quarter_mean_stationarity"] = s.final_quarter_mean_stationarity;
  j["initial_residual"] = s.initial_residual;
  j["final_residual"] = s.final_residual;
  j["max_node_stationarity_final"] = s.max_node_stationarity_final;
  j["diverged"] = s.diverged;
  if (s.diverged) {
    j["diverged_t"] = s.diverged_t;
    j["diverged_node"] = s.diverged_node;
  }
  std::vector<std::string> warnings = ex.warnings;
  warnings.insert(warnings.end(), extra_warnings.begin(),
                  extra_warnings.end());
  j["warnings"] = warnings;
  j["config"] = ex.echo;
  return j;
}

// ── commands ──────────────────────────────────────────────────────────────────

inline int cmd_run(const std::string& config_path, const Overrides& ov = {}) {
  const json cfg = load_config_file(config_path);
  Experiment ex = parse_experiment(cfg, CommandKind::run, ov);
  std::filesystem::create_directories(ex.out_dir);
  const long long cadence = effective_cadence(ex.cadence, ex.algo.T);
  ex.cadence = cadence;
  ex.echo["run"]["cadence"] = cadence;

  std::vector<MetricsRecord> records;
  RunOptions ro;
  ro.cadence = cadence;
  ro.threads = ex.threads;
  ro.observer = [&](const SwarmState& s) {
    records.push_back(measure(s, *ex.problem, ex.W));
  };

  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary;
  int exit_code = 0;
  std::optional<SwarmState> final_state;
  try {
    RunResult res = run(ex.algo, *ex.problem, ex.W, ex.x0, ex.y0, ro);
    summary = res.summary;
    final_state = std::move(res.state);
  } catch (const RunAbort& abort) {
    summary = abort.partial().summary;
    exit_code = 3;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::vector<std::string> extra;
  for (const auto& r : records)
    if (!r.ok) {
      extra.push_back("metrics flagged at t=" + std::to_string(r.t) + ": " +
                      r.note);
      break;
    }
  // Spot-check the exact envelope gradient against finite differences at the
  // final mean iterate.
  double fd_rel = std::numeric_limits<double>::quiet_NaN();
  if (final_state) {
    const Vec xb = final_state->xbar();
    const Vec g = ex.problem->oracle_F(xb).second;
    fd_rel = (fd_grad_F(*ex.problem, xb) - g).norm() / (1.0 + g.norm());
    if (!(fd_rel <= 1e-5))
      extra.push_back(
          "finite-difference spot check of grad F at the final iterate "
          "deviates by " +
          std::to_string(fd_rel) + " relative (threshold 1e-5)");
  }

  write_metrics_csv(ex.out_dir + "/metrics.csv", records);
  json sj = summary_to_json(summary, ex, "run", wall, extra);
  sj["fd_spot_check_rel_error"] = fd_rel;
  write_json_file(ex.out_dir + "/summary.json", sj);
  return exit_code;
}

inline int cmd_sweep(const std::string& config_path,
                     const Overrides& ov = {}) {
  const json cfg = load_config_file(config_path);
  Experiment ex = parse_experiment(cfg, CommandKind::sweep, ov);
  std::filesystem::create_directories(ex.out_dir);

  struct Row {
    long long T;
    int repeat;
    double mean_stat;
  };
  std::vector<Row> rows;
  std::vector<std::pair<double, double>> fit_points;
  json points = json::array();
  int exit_code = 0;

  for (const long long T : ex.T_list) {
    std::vector<double> means;
    {
      // Defaults depend on eta(T), so feasibility is per horizon.
      AlgoConfig probe = ex.algo;
      probe.T = T;
      probe = with_defaults(probe, ex.problem->constants());
      for (const auto& w :
           check_feasibility(probe, ex.problem->constants())) {
        const std::string tagged = "T=" + std::to_string(T) + ": " + w;
        if (std::find(ex.warnings.begin(), ex.warnings.end(), tagged) ==
            ex.warnings.end())
          ex.warnings.push_back(tagged);
      }
    }
    for (int r = 0; r < ex.repeats && exit_code == 0; ++r) {
      AlgoConfig ac = ex.algo;  // gamma/lambda still raw; run() resolves
      ac.T = T;
      ac.seed = ex.algo.seed + static_cast<std::uint64_t>(r);
      RunOptions ro;
      ro.cadence = ex.cadence;
      ro.threads = ex.threads;
      try {
        RunResult res = run(ac, *ex.problem, ex.W, ex.x0, ex.y0, ro);
        means.push_back(res.summary.mean_stationarity);
        rows.push_back({T, r, res.summary.mean_stationarity});
      } catch (const RunAbort&) {
        exit_code = 3;
      }
    }
    if (exit_code != 0) break;
    double mean = 0.0;
    for (double v : means) mean += v;
    mean /= static_cast<double>(means.size());
    double stderr_ = 0.0;
    if (means.size() > 1) {
      double ss = 0.0;
      for (double v : means) ss += (v - mean) * (v - mean);
      stderr_ = std::sqrt(ss / static_cast<double>(means.size() - 1)) /
                std::sqrt(static_cast<double>(means.size()));
    }
    fit_points.push_back({static_cast<double>(T), mean});
    points.push_back({{"T", T},
                      {"mean", mean},
                      {"stderr", stderr_},
                      {"repeats", static_cast<int>(means.size())}});
  }

  // sweep.csv: one row per repeat, with the per-horizon aggregate repeated.
  {
    std::ofstream out(ex.out_dir + "/sweep.csv", std::ios::binary);
    if (!out)
      throw std::runtime_error("cmd_sweep: cannot open sweep.csv");
    out << "T,repeat,trajectory_mean_stationarity,T_mean,T_stderr\n";
    for (const auto& row : rows) {
      double mean = 0.0, stderr_ = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k]["T"].get<long long>() == row.T) {
          mean = points[k]["mean"].get<double>();
          stderr_ = points[k]["stderr"].get<double>();
        }
      }
      out << row.T << ',' << row.repeat << ','
          << cfgdetail::fmt17(row.mean_stat) << ',' << cfgdetail::fmt17(mean)
          << ',' << cfgdetail::fmt17(stderr_) << '\n';
    }
  }

  if (exit_code == 0) {
    const RateFit fit = rate_fit(fit_points);
    json j;
    j["version"] = version();
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r_squared"] = fit.r_squared;
    j["points"] = points;
    j["warnings"] = ex.warnings;
    j["config"] = ex.echo;
    write_json_file(ex.out_dir + "/rate.json", j);
  }
  return exit_code;
}

inline int cmd_verify(const std::string& config_path,
                      const Overrides& ov = {}) {
  const json cfg = load_config_file(config_path);
  Experiment ex = parse_experiment(cfg, CommandKind::verify, ov);
  std::filesystem::create_directories(ex.out_dir);
  ex.cadence = 1;  // full instrumentation
  ex.echo["run"]["cadence"] = 1;

  std::vector<MetricsRecord> records;
  ex.verify.observer = [&](const SwarmState& s) {
    records.push_back(measure(s, *ex.problem, ex.W));
  };

  const auto t0 = std::chrono::steady_clock::now();
  RunSummary summary;
  int exit_code = 0;
  VerificationReport report;
  try {
    VerifyOutcome out = run_verification(*ex.problem, ex.W, ex.algo, ex.x0,
                                         ex.y0, ex.verify);
    report = std::move(out.report);
    summary = out.run.summary;
  } catch (const RunAbort& abort) {
    summary = abort.partial().summary;
    exit_code = 3;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  write_metrics_csv(ex.out_dir + "/metrics.csv", records);
  write_json_file(ex.out_dir + "/summary.json",
                  summary_to_json(summary, ex, "verify", wall, {}));
  if (exit_code == 3) return 3;

  write_json_file(ex.out_dir + "/verify_report.json", report.to_json());
  write_text_file(ex.out_dir + "/verify_report.txt", report.to_text());
  return report.all_pass() ? 0 : 1;
}

}  // namespace dmgda
