#pragma once

// Plain and perturbed gradient descent on f + g, plus initializers and the
// origin saddle constructor.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bmsense/landscape.hpp"
#include "bmsense/objective.hpp"

namespace bmsense {

enum class InitKind { kRandomGaussian, kZero, kBalancedTruth, kSpectral };

std::string to_string(InitKind kind);
InitKind init_kind_from_string(const std::string& name);

struct PerturbConfig {
  bool enabled = false;
  std::optional<double> radius;  // default 1e-3 (1 + ||W||_F) at the stalled point
  Index stall_window = 50;
  Index max_perturbations = 20;
};

struct InitConfig {
  InitKind kind = InitKind::kRandomGaussian;
  std::optional<double> scale;  // default (||b|| / p)^{1/4}
  std::uint64_t seed = 0;
};

struct SolverConfig {
  std::optional<double> fixed_step;  // empty: Armijo backtracking
  Index max_iters = 20000;
  double grad_tol = 1e-8;  // stop when ||grad|| <= grad_tol (1 + ||b||)
  PerturbConfig perturb;
  InitConfig init;
  Index record_every = 10;
  std::uint64_t perturb_seed = 0;

  void validate() const;
};

enum class SolveStatus { kConverged, kMaxIters, kPerturbationBudgetExhausted, kDiverged,
                         kLineSearchFailed };

std::string to_string(SolveStatus status);

struct IterateRecord {
  Index iter = 0;
  double obj = 0.0;
  double grad_norm = 0.0;
  double dist = 0.0;  // NaN when no truth is supplied
};

struct Trajectory {
  std::vector<IterateRecord> iterates;
  FactorPair final;
  SolveStatus status = SolveStatus::kMaxIters;
  Index iterations = 0;
  double init_scale = 0.0;
  std::vector<Index> perturbation_iters;
  std::optional<double> diverged_step;
};

/// Default random-init standard deviation (||b|| / p)^{1/4}; 1 when b = 0.
double default_init_scale(const SensingProblem& prob);

FactorPair random_init(Index m, Index n, Index r, double scale, std::uint64_t seed);
FactorPair spectral_init(const SensingProblem& prob);
FactorPair make_origin_saddle(Index m, Index n, Index r);

/// Gradient descent W <- W - eta grad(W).
///
/// Backtracking restarts each iteration from eta0 = 1 / L, L = 16 (sigma_1(W)^2 + ||b||),
/// halving until f + g drops by at least 1e-4 eta ||grad||^2. The drop is computed
/// from an exact expansion of the objective difference, so the obj column is the
/// initial value plus accepted drops. With perturbation
/// enabled, a near-stationary point (||grad|| <= grad_tol scale, or below
/// 10 grad_tol scale for stall_window iterations) is kicked by a uniformly
/// random direction of the configured radius; the run is declared converged
/// once a kick fails to lower the objective. `truth` only feeds the dist column.
Trajectory solve(const SensingProblem& prob, const SolverConfig& cfg,
                 const BalancedFactors* truth = nullptr);

/// Initial point for cfg.init. Balanced-truth init needs `truth`.
FactorPair initial_point(const SensingProblem& prob, const InitConfig& init,
                         const BalancedFactors* truth, double* scale_used = nullptr);

/// CSV with header iter,obj,grad_norm,dist.
std::string trajectory_csv(const Trajectory& traj);
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj);

}  // namespace bmsense
