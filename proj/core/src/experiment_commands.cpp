#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/experiment.hpp"
#include "bmsense/matrix_io.hpp"
#include "bmsense/parallel.hpp"
#include "bmsense/random.hpp"
#include "report_json.hpp"

namespace bmsense {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

const char* flag(bool b) { return b ? "true" : "false"; }

std::string trial_name(Index t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trial_%04lld", static_cast<long long>(t));
  return buf;
}

fs::path problem_dir(const ExperimentConfig& cfg) { return cfg.out_dir / "problem"; }
fs::path trial_dir(const ExperimentConfig& cfg, Index t) {
  return cfg.out_dir / "trials" / trial_name(t);
}

void write_effective_config(const ExperimentConfig& cfg) {
  write_file_atomic(cfg.out_dir / "effective-config.json", effective_config_json(cfg));
}

std::uint64_t init_seed(const ExperimentConfig& cfg, Index t) {
  return derive_seed(cfg.master_seed, {streams::kInit, static_cast<std::uint64_t>(t)});
}

SolverConfig trial_solver(const ExperimentConfig& cfg, std::uint64_t seed, std::uint64_t kick_seed) {
  SolverConfig s = cfg.solver;
  s.init.seed = seed;
  s.perturb_seed = kick_seed;
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

struct ScenarioCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool gate = false;  // delta condition of the check met by the estimates
  double delta4r_threshold = 0.0;
  double factor = 0.0;
};

ScenarioCheck evaluate_scenario_check(const ExperimentConfig& cfg, const GeneratedProblem& g,
                             const FactorPair& wp, const BalancedFactors& bf,
                             const LandscapeReport& rep) {
  ScenarioCheck out;
  const double d2 = rep.deltas.delta2r;
  const double d4 = rep.deltas.delta4r;
  switch (cfg.scenario) {
    case Scenario::kNoisy: {
      out.name = "noisy";
      out.delta4r_threshold = bounds::kNoisyDelta4r;
      out.factor = bounds::kNoisyGapFactor;
      out.lhs = bounds::kNoisyGapFactor * rep.lifted_gap;
      out.rhs = g.noise ? g.noise->norm() : 0.0;
      break;
    }
    case Scenario::kHighRank: {
      out.name = "high-rank";
      out.delta4r_threshold = bounds::kHighRankDelta4r;
      out.factor = bounds::kHighRankDistFactor;
      Vector tail = g.op.apply(g.xstar - bf.product());
      if (g.noise) tail += *g.noise;
      out.lhs = dist_to_truth(wp, bf);
      out.rhs = bounds::kHighRankDistFactor / bf.sigma_r() * tail.norm();
      break;
    }
    default: {
      out.name = "noiseless";
      out.delta4r_threshold = bounds::kNoiselessDelta4r;
      out.factor = cfg.tolerances.eps_dist;
      out.lhs = rep.dist;
      out.rhs = cfg.tolerances.eps_dist * std::sqrt(g.xstar.norm());
      break;
    }
  }
  out.holds = out.lhs <= out.rhs + cfg.tolerances.eps_cert(out.rhs);
  out.gate = d2 < out.delta4r_threshold && d4 < out.delta4r_threshold;
  return out;
}

}  // namespace

CommandResult cmd_gen(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::uint64_t s = cfg.master_seed;
  const GeneratedProblem g =
      generate_problem(cfg, cfg.p_values().front(), derive_seed(s, {streams::kTruth}),
                       derive_seed(s, {streams::kOperator}), derive_seed(s, {streams::kNoise}));
  const fs::path dir = problem_dir(cfg);
  std::error_code ec;
  fs::remove(dir / "w.txt", ec);
  save_operator(dir / "operator", g.op);
  save_vector(dir / "b.txt", g.b);
  save_matrix(dir / "Xstar.txt", g.xstar);
  if (g.noise) save_vector(dir / "w.txt", *g.noise);
  ojson meta;
  meta["scenario"] = to_string(cfg.scenario);
  meta["m"] = cfg.m;
  meta["n"] = cfg.n;
  meta["r"] = cfg.r;
  meta["r_true"] = cfg.r_true ? ojson(*cfg.r_true) : ojson(nullptr);
  meta["p"] = g.op.p();
  meta["noise_sigma"] = g.noise_sigma;
  meta["master_seed"] = cfg.master_seed;
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  write_effective_config(cfg);
  return {0, "problem written to " + dir.string()};
}

CommandResult cmd_solve(const ExperimentConfig& cfg) {
  cfg.validate();
  const GeneratedProblem g = load_problem(problem_dir(cfg));
  const SensingProblem prob = g.problem(cfg.r);
  const BalancedFactors bf = target_factors(g.xstar, cfg.r);

  struct Row {
    std::uint64_t seed = 0;
    SolveStatus status = SolveStatus::kMaxIters;
    Index iterations = 0;
    double grad_norm = 0.0;
    double dist = 0.0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(cfg.trials));
  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const Index t = static_cast<Index>(i);
    const std::uint64_t seed = init_seed(cfg, t);
    const SolverConfig sc = trial_solver(
        cfg, seed, derive_seed(cfg.master_seed, {streams::kKick, static_cast<std::uint64_t>(t)}));
    const Trajectory traj = solve(prob, sc, &bf);
    save_trajectory(trial_dir(cfg, t), traj);
    rows[i] = Row{seed, traj.status, traj.iterations, first_order_residual(prob, traj.final),
                  dist_to_truth(traj.final, bf)};
  });

  std::string csv = "trial,seed,status,iterations,grad_norm,dist\n";
  Index converged = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    converged += r.status == SolveStatus::kConverged;
    csv += std::to_string(i) + "," + std::to_string(r.seed) + "," + to_string(r.status) + "," +
           std::to_string(r.iterations) + "," + num(r.grad_norm) + "," + num(r.dist) + "\n";
  }
  write_file_atomic(cfg.out_dir / "solve_summary.csv", csv);
  write_effective_config(cfg);
  return {0, std::to_string(converged) + "/" + std::to_string(cfg.trials) + " trials converged"};
}

CommandResult cmd_analyze(const ExperimentConfig& cfg) {
  cfg.validate();
  const GeneratedProblem g = load_problem(problem_dir(cfg));
  const SensingProblem prob = g.problem(cfg.r);
  const BalancedFactors bf = target_factors(g.xstar, cfg.r);
  const Deltas deltas = estimate_deltas(g.op, cfg.r, cfg.rip.trials,
                                        derive_seed(cfg.master_seed, {streams::kRip}), cfg.workers);

  struct Row {
    LandscapeReport rep;
    ScenarioCheck remark;
    std::string status;
    bool violation = false;
  };
  std::vector<Row> rows(static_cast<std::size_t>(cfg.trials));
  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const fs::path dir = trial_dir(cfg, static_cast<Index>(i));
    if (!fs::exists(dir / "U.txt")) {
      throw IoError("missing solved trial " + dir.string() + " (run `solve` first)");
    }
    const FactorPair wp = load_factor_pair(dir);
    std::string status = "unknown";
    {
      std::ifstream in(dir / "solve.json");
      if (in) {
        nlohmann::json meta;
        in >> meta;
        status = meta.value("status", status);
      }
    }
    Row row;
    row.rep = classify(prob, wp, bf, deltas, cfg.tolerances);
    row.status = status;
    const bool converged = status == to_string(SolveStatus::kConverged);
    if (!converged) row.rep.classification = PointClass::kIndeterminate;
    row.remark = evaluate_scenario_check(cfg, g, wp, bf, row.rep);
    const bool critical2 = row.rep.grad_norm <= row.rep.grad_threshold && row.rep.second_order;
    row.violation = converged && (certificate_violation(row.rep) ||
                                  (row.remark.gate && critical2 && !row.remark.holds));
    rows[i] = std::move(row);
  });

  std::string jsonl;
  std::string csv =
      "seed,p,delta2r_hat,delta4r_hat,grad_norm,lambda_min,dist,lifted_gap,thm1_coeff,thm1_lhs,"
      "thm1_rhs,thm1_holds,cor1_holds,lemma3_holds,remark_holds,classification\n";
  Index violations = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    const LandscapeReport& r = row.rep;
    const std::uint64_t seed = init_seed(cfg, static_cast<Index>(i));
    violations += row.violation;

    ojson j = detail::report_json(r);
    j["trial"] = i;
    j["seed"] = seed;
    j["p"] = g.op.p();
    j["scenario"] = to_string(cfg.scenario);
    j["status"] = row.status;
    j["remark"] = row.remark.name;
    j["remark_lhs"] = row.remark.lhs;
    j["remark_rhs"] = row.remark.rhs;
    j["remark_holds"] = row.remark.holds;
    j["remark_gate"] = row.remark.gate;
    j["remark_delta4r_threshold"] = row.remark.delta4r_threshold;
    j["remark_factor"] = row.remark.factor;
    j["certificate_violation"] = row.violation;
    jsonl += j.dump() + "\n";

    csv += std::to_string(seed) + "," + std::to_string(g.op.p()) + "," + num(r.deltas.delta2r) +
           "," + num(r.deltas.delta4r) + "," + num(r.grad_norm) + "," + num(r.lambda_min_paper) +
           "," + num(r.dist) + "," + num(r.lifted_gap) + "," + num(r.thm1_coeff) + "," +
           num(r.thm1_lhs) + "," + num(r.thm1_rhs) + "," + flag(r.thm1_holds) + "," +
           flag(r.cor1_holds) + "," + flag(r.lemma3_holds) + "," + flag(row.remark.holds) + "," +
           to_string(r.classification) + "\n";
  }
  write_file_atomic(cfg.out_dir / "reports.jsonl", jsonl);
  write_file_atomic(cfg.out_dir / "summary.csv", csv);
  write_effective_config(cfg);
  if (violations > 0) {
    return {2, std::to_string(violations) + " certificate violation(s) in " +
                   (cfg.out_dir / "reports.jsonl").string()};
  }
  return {0, "analyzed " + std::to_string(cfg.trials) + " trials"};
}

CommandResult cmd_saddle(const ExperimentConfig& cfg) {
  cfg.validate();
  const Matrix xstar = generate_truth(cfg, derive_seed(cfg.master_seed, {streams::kTruth}));
  if (xstar.rows() != cfg.m || xstar.cols() != cfg.n) {
    throw InvalidInputError("saddle: X* shape differs from config");
  }
  const BalancedFactors bf = target_factors(xstar, cfg.r);

  struct Point {
    std::string name;
    FactorPair wp;
  };
  std::vector<Point> points{{"origin", make_origin_saddle(cfg.m, cfg.n, cfg.r)}};
  for (const fs::path& pt : cfg.points) points.push_back({pt.string(), load_factor_pair(pt)});

  const std::vector<Index> ps = cfg.p_values();
  struct Cell {
    Index p = 0;
    Index trial = 0;
    std::vector<SaddleCertificate> certs;
  };
  std::vector<Cell> cells;
  for (Index p : ps)
    for (Index t = 0; t < cfg.trials; ++t) cells.push_back({p, t, {}});

  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    Cell& c = cells[i];
    const auto up = static_cast<std::uint64_t>(c.p);
    const auto ut = static_cast<std::uint64_t>(c.trial);
    const SensingOperator op =
        generate_operator(cfg, c.p, derive_seed(cfg.master_seed, {streams::kOperator, up, ut}));
    const SensingProblem prob(op, op.apply(xstar), cfg.r, xstar);
    const Deltas d = estimate_deltas(op, cfg.r, cfg.rip.trials,
                                     derive_seed(cfg.master_seed, {streams::kRip, up, ut}));
    for (const Point& pt : points) {
      c.certs.push_back(strict_saddle_certificate(prob, pt.wp, bf, d.delta4r, cfg.tolerances));
    }
  });

  std::string csv =
      "p,trial,point,lambda_min,threshold,margin,delta4r_hat,delta_hypothesis_met,holds,status\n";
  std::string jsonl;
  std::string summary = "p,evaluated,holding,fraction_holding\n";
  Index violations = 0;
  for (Index p : ps) {
    Index evaluated = 0;
    Index holding = 0;
    for (const Cell& c : cells) {
      if (c.p != p) continue;
      for (std::size_t k = 0; k < points.size(); ++k) {
        const SaddleCertificate& s = c.certs[k];
        const std::string status = s.determinate ? "determinate" : "indeterminate: " + s.reason;
        const double margin = s.threshold - s.lambda_min_paper;
        csv += std::to_string(p) + "," + std::to_string(c.trial) + "," + points[k].name + "," +
               (s.determinate ? num(s.lambda_min_paper) : std::string("nan")) + "," +
               num(s.threshold) + "," + (s.determinate ? num(margin) : std::string("nan")) + "," +
               num(s.delta4r_hat) + "," + flag(s.delta_hypothesis_met) + "," + flag(s.holds) +
               "," + status + "\n";
        ojson j;
        j["p"] = p;
        j["trial"] = c.trial;
        j["point"] = points[k].name;
        j["lambda_min_paper"] = s.determinate ? ojson(s.lambda_min_paper) : ojson(nullptr);
        j["threshold"] = s.threshold;
        j["saddle_fraction"] = bounds::kSaddleFraction;
        j["saddle_delta4r"] = bounds::kSaddleDelta4r;
        j["delta4r_hat"] = s.delta4r_hat;
        j["delta_provenance"] = "estimate-conditioned";
        j["delta_hypothesis_met"] = s.delta_hypothesis_met;
        j["holds"] = s.holds;
        j["classification"] = s.determinate ? (s.holds ? "strict-saddle" : "saddle-bound-missed")
                                            : "indeterminate";
        j["reason"] = s.reason;
        jsonl += j.dump() + "\n";
        if (s.determinate) {
          ++evaluated;
          holding += s.holds;
          if (s.delta_hypothesis_met && !s.holds) ++violations;
        }
      }
    }
    const double frac = evaluated > 0 ? static_cast<double>(holding) / static_cast<double>(evaluated)
                                      : std::numeric_limits<double>::quiet_NaN();
    summary += std::to_string(p) + "," + std::to_string(evaluated) + "," + std::to_string(holding) +
               "," + num(frac) + "\n";
  }
  write_file_atomic(cfg.out_dir / "saddle.csv", csv);
  write_file_atomic(cfg.out_dir / "saddle_report.jsonl", jsonl);
  write_file_atomic(cfg.out_dir / "saddle_summary.csv", summary);
  write_effective_config(cfg);
  if (violations > 0) {
    return {2, std::to_string(violations) + " strict-saddle certificate violation(s)"};
  }
  return {0, "saddle certificates written"};
}

CommandResult cmd_rip(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> ranks = cfg.rip.ranks.empty() ? std::vector<Index>{cfg.r} : cfg.rip.ranks;
  const std::vector<Index> ps = cfg.p_values();
  struct Cell {
    Index p = 0;
    Index draw = 0;
    std::vector<double> delta;
    std::vector<double> ratio;
  };
  std::vector<Cell> cells;
  for (Index p : ps)
    for (Index s = 0; s < cfg.trials; ++s) cells.push_back({p, s, {}, {}});

  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    Cell& c = cells[i];
    const auto up = static_cast<std::uint64_t>(c.p);
    const auto us = static_cast<std::uint64_t>(c.draw);
    const SensingOperator op =
        generate_operator(cfg, c.p, derive_seed(cfg.master_seed, {streams::kOperator, up, us}));
    for (Index k : ranks) {
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, {streams::kRip, up, us, static_cast<std::uint64_t>(k)});
      c.delta.push_back(estimate_rip(op, k, cfg.rip.trials, seed).delta_hat);
      c.ratio.push_back(check_rip_product(op, k, cfg.rip.trials, seed));
    }
  });

  std::string csv = "p,rank,delta_hat,prop1_max_ratio\n";
  std::string summary = "p,rank,median_delta_hat,median_prop1_max_ratio\n";
  for (Index p : ps) {
    for (std::size_t k = 0; k < ranks.size(); ++k) {
      std::vector<double> ds;
      std::vector<double> rs;
      for (const Cell& c : cells) {
        if (c.p != p) continue;
        csv += std::to_string(p) + "," + std::to_string(ranks[k]) + "," + num(c.delta[k]) + "," +
               num(c.ratio[k]) + "\n";
        ds.push_back(c.delta[k]);
        rs.push_back(c.ratio[k]);
      }
      summary += std::to_string(p) + "," + std::to_string(ranks[k]) + "," + num(median(ds)) + "," +
                 num(median(rs)) + "\n";
    }
  }
  write_file_atomic(cfg.out_dir / "rip.csv", csv);
  write_file_atomic(cfg.out_dir / "rip_summary.csv", summary);
  write_effective_config(cfg);
  return {0, "rip sweep written"};
}

CommandResult cmd_phase(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Index> ps = cfg.p_values();
  struct Cell {
    Index p = 0;
    Index trial = 0;
    bool success = false;
    Index iterations = 0;
    SolveStatus status = SolveStatus::kMaxIters;
    double dist = 0.0;
    double delta4r = 0.0;
  };
  std::vector<Cell> cells;
  for (Index p : ps)
    for (Index t = 0; t < cfg.trials; ++t) cells.push_back({p, t});

  ExperimentConfig noiseless = cfg;
  noiseless.scenario = Scenario::kNoiseless;
  parallel_for(cells.size(), cfg.workers, [&](std::size_t i) {
    Cell& c = cells[i];
    const auto up = static_cast<std::uint64_t>(c.p);
    const auto ut = static_cast<std::uint64_t>(c.trial);
    const std::uint64_t s = cfg.master_seed;
    const GeneratedProblem g =
        generate_problem(noiseless, c.p, derive_seed(s, {streams::kTruth, ut}),
                         derive_seed(s, {streams::kOperator, up, ut}),
                         derive_seed(s, {streams::kNoise, up, ut}));
    const SensingProblem prob = g.problem(cfg.r);
    const BalancedFactors bf = target_factors(g.xstar, cfg.r);
    const Trajectory traj = solve(prob,
                                  trial_solver(cfg, derive_seed(s, {streams::kInit, up, ut}),
                                               derive_seed(s, {streams::kKick, up, ut})),
                                  &bf);
    c.status = traj.status;
    c.iterations = traj.iterations;
    c.dist = dist_to_truth(traj.final, bf);
    c.success = traj.status == SolveStatus::kConverged &&
                c.dist <= cfg.success_dist_rel * std::sqrt(g.xstar.norm());
    c.delta4r = estimate_deltas(g.op, cfg.r, cfg.rip.trials, derive_seed(s, {streams::kRip, up, ut}))
                    .delta4r;
  });

  std::string csv = "p,trial,success,iterations,status,dist,delta4r_hat\n";
  std::string rate = "p,trials,successes,success_rate\n";
  std::string dat = "# p success_rate\n";
  for (Index p : ps) {
    Index total = 0;
    Index ok = 0;
    for (const Cell& c : cells) {
      if (c.p != p) continue;
      ++total;
      ok += c.success;
      csv += std::to_string(p) + "," + std::to_string(c.trial) + "," + flag(c.success) + "," +
             std::to_string(c.iterations) + "," + to_string(c.status) + "," + num(c.dist) + "," +
             num(c.delta4r) + "\n";
    }
    const double frac = static_cast<double>(ok) / static_cast<double>(total);
    rate += std::to_string(p) + "," + std::to_string(total) + "," + std::to_string(ok) + "," +
            num(frac) + "\n";
    dat += std::to_string(p) + " " + num(frac) + "\n";
  }
  write_file_atomic(cfg.out_dir / "phase.csv", csv);
  write_file_atomic(cfg.out_dir / "phase_rate.csv", rate);
  write_file_atomic(cfg.out_dir / "phase.dat", dat);
  write_effective_config(cfg);
  return {0, "phase sweep written"};
}

}  // namespace bmsense
