#include "bmsense/experiment.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/matrix_io.hpp"
#include "bmsense/random.hpp"

namespace bmsense {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kNoiseless:
      return "noiseless";
    case Scenario::kNoisy:
      return "noisy";
    case Scenario::kHighRank:
      return "high-rank";
    case Scenario::kSaddle:
      return "saddle";
    case Scenario::kRipSweep:
      return "rip-sweep";
    case Scenario::kPhase:
      return "phase";
  }
  return "noiseless";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "noiseless") return Scenario::kNoiseless;
  if (name == "noisy") return Scenario::kNoisy;
  if (name == "high-rank") return Scenario::kHighRank;
  if (name == "saddle") return Scenario::kSaddle;
  if (name == "rip-sweep") return Scenario::kRipSweep;
  if (name == "phase") return Scenario::kPhase;
  throw InvalidInputError("unknown scenario '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (m < 1 || n < 1 || r < 1) throw InvalidInputError("config: m, n, r must be >= 1");
  if (r > std::min(m, n)) throw InvalidInputError("config: r must not exceed min(m, n)");
  if (p < 1) throw InvalidInputError("config: p must be >= 1");
  for (Index q : p_grid)
    if (q < 1) throw InvalidInputError("config: p_grid entries must be >= 1");
  if (trials < 1) throw InvalidInputError("config: trials must be >= 1");
  if (workers < 1) throw InvalidInputError("config: workers must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InvalidInputError("config: noise_sigma must be >= 0");
  if (noise_relative && !(*noise_relative >= 0.0)) {
    throw InvalidInputError("config: noise_relative must be >= 0");
  }
  if (condition_number && !(*condition_number >= 1.0)) {
    throw InvalidInputError("config: condition_number must be >= 1");
  }
  if (rip.trials < 1) throw InvalidInputError("config: rip.trials must be >= 1");
  for (Index k : rip.ranks) {
    if (k < 1 || k > std::min(m, n)) {
      throw InvalidInputError("config: rip.ranks entries must lie in [1, min(m, n)]");
    }
  }
  if (!(success_dist_rel > 0.0)) throw InvalidInputError("config: success_dist_rel must be > 0");

  switch (scenario) {
    case Scenario::kNoisy:
      if (!(noise_sigma > 0.0) && !(noise_relative && *noise_relative > 0.0)) {
        throw InvalidInputError("config: noisy scenario needs noise_sigma > 0 or noise_relative > 0");
      }
      break;
    case Scenario::kHighRank:
      if (!r_true || *r_true <= r) {
        throw InvalidInputError("config: high-rank scenario needs r_true > r");
      }
      if (*r_true > std::min(m, n)) {
        throw InvalidInputError("config: r_true must not exceed min(m, n)");
      }
      break;
    case Scenario::kPhase:
      if (p_grid.empty()) throw InvalidInputError("config: phase scenario needs a p_grid");
      break;
    default:
      break;
  }
  solver.validate();
}

std::vector<Index> ExperimentConfig::p_values() const {
  if (op_kind == OperatorKind::kFullSampling) return {m * n};
  if (!p_grid.empty()) return p_grid;
  return {p};
}

namespace {

const std::set<std::string> kTopKeys = {
    "scenario", "m", "n", "r", "r_true", "p", "p_grid", "operator", "noise_sigma",
    "noise_relative", "condition_number", "trials", "master_seed", "solver", "rip",
    "tolerances", "success_dist_rel", "xstar_path", "points", "workers", "out_dir", "constants"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw InvalidInputError("config: unknown field '" + where + it.key() + "'");
    }
  }
}

ojson constants_json() {
  ojson c;
  c["noiseless_delta4r"] = bounds::kNoiselessDelta4r;
  c["noisy_delta4r"] = bounds::kNoisyDelta4r;
  c["noisy_gap_factor"] = bounds::kNoisyGapFactor;
  c["high_rank_delta4r"] = bounds::kHighRankDelta4r;
  c["high_rank_dist_factor"] = bounds::kHighRankDistFactor;
  c["saddle_delta4r"] = bounds::kSaddleDelta4r;
  c["saddle_fraction"] = bounds::kSaddleFraction;
  return c;
}

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

SolverConfig parse_solver(const json& j) {
  reject_unknown(j, {"step", "max_iters", "grad_tol", "perturb", "init", "record_every"}, "solver.");
  SolverConfig s;
  if (j.contains("step")) {
    const json& step = j.at("step");
    if (step.is_string()) {
      if (step.get<std::string>() != "backtracking") {
        throw InvalidInputError("config: solver.step must be \"backtracking\" or a number");
      }
    } else {
      s.fixed_step = step.get<double>();
    }
  }
  s.max_iters = j.value("max_iters", s.max_iters);
  s.grad_tol = j.value("grad_tol", s.grad_tol);
  s.record_every = j.value("record_every", s.record_every);
  if (j.contains("perturb")) {
    const json& pj = j.at("perturb");
    reject_unknown(pj, {"enabled", "radius", "stall_window", "max_perturbations"}, "solver.perturb.");
    s.perturb.enabled = pj.value("enabled", s.perturb.enabled);
    s.perturb.radius = opt<double>(pj, "radius");
    s.perturb.stall_window = pj.value("stall_window", s.perturb.stall_window);
    s.perturb.max_perturbations = pj.value("max_perturbations", s.perturb.max_perturbations);
  }
  if (j.contains("init")) {
    const json& ij = j.at("init");
    reject_unknown(ij, {"kind", "scale"}, "solver.init.");
    if (ij.contains("kind")) s.init.kind = init_kind_from_string(ij.at("kind").get<std::string>());
    s.init.scale = opt<double>(ij, "scale");
  }
  return s;
}

ojson solver_json(const SolverConfig& s) {
  ojson j;
  if (s.fixed_step) {
    j["step"] = *s.fixed_step;
  } else {
    j["step"] = "backtracking";
  }
  j["max_iters"] = s.max_iters;
  j["grad_tol"] = s.grad_tol;
  j["record_every"] = s.record_every;
  ojson pj;
  pj["enabled"] = s.perturb.enabled;
  pj["radius"] = s.perturb.radius ? ojson(*s.perturb.radius) : ojson(nullptr);
  pj["stall_window"] = s.perturb.stall_window;
  pj["max_perturbations"] = s.perturb.max_perturbations;
  j["perturb"] = pj;
  ojson ij;
  ij["kind"] = to_string(s.init.kind);
  ij["scale"] = s.init.scale ? ojson(*s.init.scale) : ojson(nullptr);
  j["init"] = ij;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInputError("config: top level must be an object");

  ExperimentConfig c;
  try {
    reject_unknown(j, kTopKeys, "");
    if (j.contains("scenario")) c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    c.m = j.value("m", c.m);
    c.n = j.value("n", c.n);
    c.r = j.value("r", c.r);
    c.r_true = opt<Index>(j, "r_true");
    c.p = j.value("p", c.p);
    if (j.contains("p_grid")) c.p_grid = j.at("p_grid").get<std::vector<Index>>();
    if (j.contains("operator")) c.op_kind = operator_kind_from_string(j.at("operator").get<std::string>());
    if (c.op_kind == OperatorKind::kCustom) {
      throw InvalidInputError("config: operator must be gaussian or full-sampling");
    }
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.noise_relative = opt<double>(j, "noise_relative");
    c.condition_number = opt<double>(j, "condition_number");
    c.trials = j.value("trials", c.trials);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
    if (j.contains("rip")) {
      const json& rj = j.at("rip");
      reject_unknown(rj, {"ranks", "trials"}, "rip.");
      if (rj.contains("ranks")) c.rip.ranks = rj.at("ranks").get<std::vector<Index>>();
      c.rip.trials = rj.value("trials", c.rip.trials);
    }
    if (j.contains("tolerances")) {
      const json& tj = j.at("tolerances");
      reject_unknown(tj, {"eps_crit", "eps_eig_rel", "eps_dist", "eps_cert_rel", "eps_gap"},
                     "tolerances.");
      c.tolerances.eps_crit = tj.value("eps_crit", c.tolerances.eps_crit);
      c.tolerances.eps_eig_rel = tj.value("eps_eig_rel", c.tolerances.eps_eig_rel);
      c.tolerances.eps_dist = tj.value("eps_dist", c.tolerances.eps_dist);
      c.tolerances.eps_cert_rel = tj.value("eps_cert_rel", c.tolerances.eps_cert_rel);
      c.tolerances.eps_gap = tj.value("eps_gap", c.tolerances.eps_gap);
    }
    c.success_dist_rel = j.value("success_dist_rel", c.success_dist_rel);
    if (auto x = opt<std::string>(j, "xstar_path")) c.xstar_path = fs::path(*x);
    if (j.contains("points")) {
      for (const auto& pt : j.at("points")) c.points.emplace_back(pt.get<std::string>());
    }
    c.workers = j.value("workers", c.workers);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("constants")) {
      const json& cj = j.at("constants");
      const ojson expected = constants_json();
      for (auto it = cj.begin(); it != cj.end(); ++it) {
        if (!expected.contains(it.key())) {
          throw InvalidInputError("config: unknown constant '" + it.key() + "'");
        }
        if (it.value().get<double>() != expected.at(it.key()).get<double>()) {
          throw InvalidInputError("config: constant '" + it.key() +
                                  "' is fixed and cannot be overridden");
        }
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("config: ") + e.what());
  }
  if (c.op_kind == OperatorKind::kFullSampling) {
    c.p = c.m * c.n;
    c.p_grid.clear();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string effective_config_json(const ExperimentConfig& c) {
  ojson j;
  j["scenario"] = to_string(c.scenario);
  j["m"] = c.m;
  j["n"] = c.n;
  j["r"] = c.r;
  j["r_true"] = c.r_true ? ojson(*c.r_true) : ojson(nullptr);
  j["p"] = c.p;
  j["p_grid"] = c.p_grid;
  j["operator"] = to_string(c.op_kind);
  j["noise_sigma"] = c.noise_sigma;
  j["noise_relative"] = c.noise_relative ? ojson(*c.noise_relative) : ojson(nullptr);
  j["condition_number"] = c.condition_number ? ojson(*c.condition_number) : ojson(nullptr);
  j["trials"] = c.trials;
  j["master_seed"] = c.master_seed;
  j["solver"] = solver_json(c.solver);
  ojson rj;
  rj["ranks"] = c.rip.ranks;
  rj["trials"] = c.rip.trials;
  j["rip"] = rj;
  ojson tj;
  tj["eps_crit"] = c.tolerances.eps_crit;
  tj["eps_eig_rel"] = c.tolerances.eps_eig_rel;
  tj["eps_dist"] = c.tolerances.eps_dist;
  tj["eps_cert_rel"] = c.tolerances.eps_cert_rel;
  tj["eps_gap"] = c.tolerances.eps_gap;
  j["tolerances"] = tj;
  j["success_dist_rel"] = c.success_dist_rel;
  j["xstar_path"] = c.xstar_path ? ojson(c.xstar_path->string()) : ojson(nullptr);
  ojson pts = ojson::array();
  for (const auto& pt : c.points) pts.push_back(pt.string());
  j["points"] = pts;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir.string();
  j["constants"] = constants_json();
  return j.dump(2) + "\n";
}

Matrix generate_truth(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.xstar_path) {
    Matrix x = load_matrix(*cfg.xstar_path);
    if (x.rows() != cfg.m || x.cols() != cfg.n) {
      throw InvalidInputError(cfg.xstar_path->string() + ": X* must be m x n");
    }
    return x;
  }
  const Index k = cfg.scenario == Scenario::kHighRank ? cfg.r_true.value_or(cfg.r) : cfg.r;
  Rng rng(seed);
  const Matrix g1 = normal_matrix(cfg.m, k, rng);
  const Matrix g2 = normal_matrix(cfg.n, k, rng);
  Matrix x = g1 * g2.transpose();
  if (cfg.condition_number && k > 1) {
    const SvdResult dec = svd(x);
    Vector s(k);
    for (Index i = 0; i < k; ++i) {
      s(i) = dec.singulars(0) *
             std::pow(*cfg.condition_number, -static_cast<double>(i) / static_cast<double>(k - 1));
    }
    x = dec.left.leftCols(k) * s.asDiagonal() * dec.right.leftCols(k).transpose();
  }
  return x;
}

SensingOperator generate_operator(const ExperimentConfig& cfg, Index p, std::uint64_t seed) {
  if (cfg.op_kind == OperatorKind::kFullSampling) return make_full_sampling(cfg.m, cfg.n);
  return make_gaussian(cfg.m, cfg.n, p, seed);
}

GeneratedProblem generate_problem(const ExperimentConfig& cfg, Index p, std::uint64_t truth_seed,
                                  std::uint64_t op_seed, std::uint64_t noise_seed) {
  GeneratedProblem g{generate_operator(cfg, p, op_seed), generate_truth(cfg, truth_seed), {},
                     Vector(), 0.0};
  const Vector clean = g.op.apply(g.xstar);
  const bool noisy_scenario = cfg.scenario == Scenario::kNoisy || cfg.scenario == Scenario::kHighRank;
  if (noisy_scenario) {
    g.noise_sigma = cfg.noise_relative
                        ? *cfg.noise_relative * clean.norm() / std::sqrt(static_cast<double>(g.op.p()))
                        : cfg.noise_sigma;
  }
  g.b = clean;
  if (g.noise_sigma > 0.0) {
    Rng rng(noise_seed);
    std::normal_distribution<double> dist(0.0, g.noise_sigma);
    Vector w(g.op.p());
    for (Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
    g.b += w;
    g.noise = std::move(w);
  }
  return g;
}

GeneratedProblem load_problem(const fs::path& dir) {
  if (!fs::exists(dir / "b.txt")) {
    throw IoError("missing problem artifacts in " + dir.string() + " (run `gen` first)");
  }
  GeneratedProblem g{load_operator(dir / "operator"), load_matrix(dir / "Xstar.txt"), {},
                     load_vector(dir / "b.txt"), 0.0};
  if (fs::exists(dir / "w.txt")) g.noise = load_vector(dir / "w.txt");
  std::ifstream in(dir / "meta.json");
  if (in) {
    json meta;
    in >> meta;
    g.noise_sigma = meta.value("noise_sigma", 0.0);
  }
  if (g.b.size() != g.op.p()) throw InvalidInputError(dir.string() + ": b length differs from p");
  return g;
}

BalancedFactors target_factors(const Matrix& xstar, Index r) { return balanced_factorize(xstar, r); }

Deltas estimate_deltas(const SensingOperator& op, Index r, Index trials, std::uint64_t seed,
                       unsigned workers) {
  const Index cap = std::min(op.m(), op.n());
  const Index r2 = std::min(2 * r, cap);
  const Index r4 = std::min(4 * r, cap);
  Deltas d;
  d.delta2r = estimate_rip(op, r2, trials, derive_seed(seed, {2}), workers).delta_hat;
  // Rank-2r samples are admissible rank-4r samples, so both sets feed delta_4r.
  d.delta4r = std::max(d.delta2r, estimate_rip(op, r4, trials, derive_seed(seed, {4}), workers).delta_hat);
  d.estimated = true;
  return d;
}

}  // namespace bmsense
