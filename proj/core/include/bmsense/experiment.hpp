#pragma once

// Configuration-driven experiment harness behind the `bmsense` CLI.
//
// Every command is a pure function of (config, artifacts on disk): the same
// config and master seed rewrite byte-identical outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bmsense/landscape.hpp"
#include "bmsense/sensing.hpp"
#include "bmsense/solver.hpp"

namespace bmsense {

enum class Scenario { kNoiseless, kNoisy, kHighRank, kSaddle, kRipSweep, kPhase };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct RipConfig {
  std::vector<Index> ranks;  // rip command; empty means {r}
  Index trials = 200;        // Monte-Carlo samples per estimate
};

struct ExperimentConfig {
  Scenario scenario = Scenario::kNoiseless;
  Index m = 20;
  Index n = 20;
  Index r = 2;
  std::optional<Index> r_true;  // high-rank only, > r
  Index p = 480;
  std::vector<Index> p_grid;
  OperatorKind op_kind = OperatorKind::kGaussian;
  double noise_sigma = 0.0;
  std::optional<double> noise_relative;  // sigma = noise_relative ||A(X*)|| / sqrt(p)
  std::optional<double> condition_number;
  Index trials = 30;
  std::uint64_t master_seed = 1;
  SolverConfig solver;
  RipConfig rip;
  Tolerances tolerances;
  double success_dist_rel = 1e-4;  // phase success: dist <= this * ||X*||_F^{1/2}
  std::optional<std::filesystem::path> xstar_path;  // load X* instead of generating it
  std::vector<std::filesystem::path> points;        // extra factor dirs for saddle
  unsigned workers = 1;
  std::filesystem::path out_dir = "out";

  /// Scenario-specific requirements; throws InvalidInputError.
  void validate() const;
  /// Measurement counts the command iterates over (p_grid, or {p}).
  std::vector<Index> p_values() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Effective config with defaults resolved and the landscape constants echoed.
std::string effective_config_json(const ExperimentConfig& cfg);

/// Stream identifiers for derive_seed.
namespace streams {
inline constexpr std::uint64_t kTruth = 1;
inline constexpr std::uint64_t kOperator = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kInit = 4;
inline constexpr std::uint64_t kKick = 5;
inline constexpr std::uint64_t kRip = 6;
}  // namespace streams

struct GeneratedProblem {
  SensingOperator op;
  Matrix xstar;
  std::optional<Vector> noise;
  Vector b;
  double noise_sigma = 0.0;

  SensingProblem problem(Index r) const { return SensingProblem(op, b, r, xstar, noise); }
};

/// Ground truth: i.i.d. normal factors of rank r (r_true for high-rank),
/// optionally re-spread to the configured condition number.
Matrix generate_truth(const ExperimentConfig& cfg, std::uint64_t seed);
SensingOperator generate_operator(const ExperimentConfig& cfg, Index p, std::uint64_t seed);
GeneratedProblem generate_problem(const ExperimentConfig& cfg, Index p, std::uint64_t truth_seed,
                                  std::uint64_t op_seed, std::uint64_t noise_seed);

/// Reads out_dir/problem written by cmd_gen.
GeneratedProblem load_problem(const std::filesystem::path& problem_dir);

/// Rank-r balanced target: the true factors, or those of X*_r when rank(X*) > r.
BalancedFactors target_factors(const Matrix& xstar, Index r);

/// Monte-Carlo (delta_2r, delta_4r); ranks are capped at min(m, n).
Deltas estimate_deltas(const SensingOperator& op, Index r, Index trials, std::uint64_t seed,
                       unsigned workers = 1);

struct CommandResult {
  int exit_code = 0;  // 0 ok, 2 certificate violation
  std::string message;
};

CommandResult cmd_gen(const ExperimentConfig& cfg);
CommandResult cmd_solve(const ExperimentConfig& cfg);
CommandResult cmd_analyze(const ExperimentConfig& cfg);
CommandResult cmd_saddle(const ExperimentConfig& cfg);
CommandResult cmd_rip(const ExperimentConfig& cfg);
CommandResult cmd_phase(const ExperimentConfig& cfg);

}  // namespace bmsense
