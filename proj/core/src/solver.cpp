#include "bmsense/solver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/matrix_io.hpp"
#include "bmsense/random.hpp"

namespace bmsense {

std::string to_string(InitKind kind) {
  switch (kind) {
    case InitKind::kRandomGaussian:
      return "random-gaussian";
    case InitKind::kZero:
      return "zero";
    case InitKind::kBalancedTruth:
      return "balanced-truth";
    case InitKind::kSpectral:
      return "spectral";
  }
  return "random-gaussian";
}

InitKind init_kind_from_string(const std::string& name) {
  if (name == "random-gaussian") return InitKind::kRandomGaussian;
  if (name == "zero") return InitKind::kZero;
  if (name == "balanced-truth") return InitKind::kBalancedTruth;
  if (name == "spectral") return InitKind::kSpectral;
  throw InvalidInputError("unknown init kind '" + name + "'");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIters:
      return "max-iters";
    case SolveStatus::kPerturbationBudgetExhausted:
      return "perturbation-budget-exhausted";
    case SolveStatus::kDiverged:
      return "diverged";
    case SolveStatus::kLineSearchFailed:
      return "line-search-failed";
  }
  return "max-iters";
}

void SolverConfig::validate() const {
  if (!(grad_tol > 0.0)) throw InvalidInputError("solver: grad_tol must be > 0");
  if (max_iters < 1) throw InvalidInputError("solver: max_iters must be >= 1");
  if (record_every < 1) throw InvalidInputError("solver: record_every must be >= 1");
  if (fixed_step && !(*fixed_step > 0.0)) throw InvalidInputError("solver: step must be > 0");
  if (perturb.enabled) {
    if (perturb.radius && !(*perturb.radius > 0.0)) {
      throw InvalidInputError("solver: perturbation radius must be > 0");
    }
    if (perturb.stall_window < 1) throw InvalidInputError("solver: stall_window must be >= 1");
  }
  if (init.scale && !(*init.scale > 0.0)) throw InvalidInputError("solver: init scale must be > 0");
}

double default_init_scale(const SensingProblem& prob) {
  const double bn = prob.b.norm();
  if (bn == 0.0) return 1.0;
  return std::pow(bn / static_cast<double>(prob.op.p()), 0.25);
}

FactorPair random_init(Index m, Index n, Index r, double scale, std::uint64_t seed) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInputError("random_init: scale must be positive and finite");
  }
  if (m < 1 || n < 1 || r < 1) throw InvalidInputError("random_init: dimensions must be >= 1");
  Rng rng(seed);
  FactorPair wp;
  wp.u = normal_matrix(m, r, rng, scale);
  wp.v = normal_matrix(n, r, rng, scale);
  return wp;
}

FactorPair spectral_init(const SensingProblem& prob) {
  const Matrix y = prob.op.adjoint(prob.b);
  const Index m = prob.op.m();
  const Index n = prob.op.n();
  const Index k = std::min(prob.rank, std::min(m, n));
  const BalancedFactors bf = balanced_factorize(y, k);
  FactorPair wp{Matrix::Zero(m, prob.rank), Matrix::Zero(n, prob.rank)};
  wp.u.leftCols(k) = bf.ustar;
  wp.v.leftCols(k) = bf.vstar;
  return wp;
}

FactorPair make_origin_saddle(Index m, Index n, Index r) {
  return FactorPair{Matrix::Zero(m, r), Matrix::Zero(n, r)};
}

FactorPair initial_point(const SensingProblem& prob, const InitConfig& init,
                         const BalancedFactors* truth, double* scale_used) {
  const Index m = prob.op.m();
  const Index n = prob.op.n();
  const Index r = prob.rank;
  if (scale_used) *scale_used = 0.0;
  switch (init.kind) {
    case InitKind::kRandomGaussian: {
      const double scale = init.scale.value_or(default_init_scale(prob));
      if (scale_used) *scale_used = scale;
      return random_init(m, n, r, scale, init.seed);
    }
    case InitKind::kZero:
      return make_origin_saddle(m, n, r);
    case InitKind::kBalancedTruth:
      if (!truth || truth->rank() != r) {
        throw InvalidInputError("balanced-truth init needs balanced factors of rank r");
      }
      return truth->factors();
    case InitKind::kSpectral:
      return spectral_init(prob);
  }
  throw InvalidInputError("unknown init kind");
}

namespace {

double spectral_norm_sq(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w.transpose() * w, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues()(eig.eigenvalues().size() - 1));
}

// (f + g)(U + dU, V + dV) - (f + g)(U, V), expanded so that no two O(1)
// quantities are subtracted. Near a noisy minimum the true decrease of a step
// sits below the rounding error of evaluating f twice.
double objective_change(const SensingProblem& prob, const FactorPair& wp, const Vector& res,
                        const Matrix& bal, const Matrix& du, const Matrix& dv) {
  const Matrix dx = du * wp.v.transpose() + wp.u * dv.transpose() + du * dv.transpose();
  const Vector d = prob.op.apply(dx);
  const double df = d.dot(2.0 * res + d);
  const Matrix utu = du.transpose() * wp.u;
  const Matrix vtv = dv.transpose() * wp.v;
  const Matrix e = utu + utu.transpose() + du.transpose() * du - vtv - vtv.transpose() - dv.transpose() * dv;
  const double dg = 0.25 * (2.0 * frob_inner(bal, e) + e.squaredNorm());
  return df + dg;
}

}  // namespace

Trajectory solve(const SensingProblem& prob, const SolverConfig& cfg, const BalancedFactors* truth) {
  cfg.validate();
  const Index m = prob.op.m();
  Trajectory traj;
  FactorPair wp = initial_point(prob, cfg.init, truth, &traj.init_scale);
  Matrix w = wp.stacked();

  const bool track_dist = truth != nullptr && truth->rank() == prob.rank;
  const double scale = prob.scale();
  const double tol_abs = cfg.grad_tol * scale;
  const double bnorm = prob.b.norm();
  Rng kick_rng(cfg.perturb_seed);

  auto objective = [&](const Matrix& x) { return eval_objective(prob, FactorPair::from_stacked(x, m)); };

  double f = objective(w);
  const double f0 = f;
  bool pending = false;
  double f_at_kick = 0.0;
  Index stall = 0;
  Index last_recorded = -1;

  auto record = [&](Index it, double obj, double gn) {
    if (it == last_recorded) return;
    IterateRecord rec{it, obj, gn, std::numeric_limits<double>::quiet_NaN()};
    if (track_dist) rec.dist = dist_to_truth(FactorPair::from_stacked(w, m), *truth);
    traj.iterates.push_back(rec);
    last_recorded = it;
  };

  Index it = 0;
  for (;; ++it) {
    const Matrix g = grad(prob, FactorPair::from_stacked(w, m));
    const double gn = g.norm();
    if (it % cfg.record_every == 0) record(it, f, gn);

    if (!std::isfinite(gn) || !std::isfinite(f)) {
      traj.status = SolveStatus::kDiverged;
      record(it, f, gn);
      break;
    }

    const bool near = gn <= tol_abs;
    stall = gn < 10.0 * tol_abs ? stall + 1 : 0;

    if (cfg.perturb.enabled) {
      if (near || stall >= cfg.perturb.stall_window) {
        const double drop = 1e-6 * (1.0 + std::abs(f_at_kick));
        if (pending && f >= f_at_kick - drop) {
          if (near) {
            traj.status = SolveStatus::kConverged;
            record(it, f, gn);
            break;
          }
        } else {
          if (static_cast<Index>(traj.perturbation_iters.size()) >= cfg.perturb.max_perturbations) {
            traj.status = SolveStatus::kPerturbationBudgetExhausted;
            record(it, f, gn);
            break;
          }
          record(it, f, gn);
          const double radius = cfg.perturb.radius.value_or(1e-3 * (1.0 + w.norm()));
          Matrix dir = normal_matrix(w.rows(), w.cols(), kick_rng);
          w += radius * dir / dir.norm();
          f_at_kick = f;
          pending = true;
          stall = 0;
          f = objective(w);
          traj.perturbation_iters.push_back(it);
          if (it >= cfg.max_iters) {
            traj.status = SolveStatus::kMaxIters;
            break;
          }
          continue;
        }
      }
    } else if (near) {
      traj.status = SolveStatus::kConverged;
      record(it, f, gn);
      break;
    }

    if (it >= cfg.max_iters) {
      traj.status = SolveStatus::kMaxIters;
      record(it, f, gn);
      break;
    }

    if (cfg.fixed_step) {
      const double eta = *cfg.fixed_step;
      w -= eta * g;
      f = objective(w);
      if (!std::isfinite(f) || f > 1e12 * std::max(f0, 1e-300)) {
        traj.status = SolveStatus::kDiverged;
        traj.diverged_step = eta;
        ++it;
        record(it, f, std::numeric_limits<double>::quiet_NaN());
        break;
      }
      continue;
    }

    const double lip = 16.0 * (spectral_norm_sq(w) + bnorm);
    double eta = 1.0 / std::max(lip, 1e-300);
    bool accepted = false;
    const FactorPair cur = FactorPair::from_stacked(w, m);
    const Vector res = prob.op.lift_apply(w) - prob.b;
    const Matrix bal = cur.u.transpose() * cur.u - cur.v.transpose() * cur.v;
    const FactorPair gp = FactorPair::from_stacked(g, m);
    for (int halving = 0; halving < 60; ++halving) {
      const double change = objective_change(prob, cur, res, bal, -eta * gp.u, -eta * gp.v);
      if (change <= -1e-4 * eta * gn * gn) {
        w -= eta * g;
        f += change;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      traj.status = SolveStatus::kLineSearchFailed;
      record(it, f, gn);
      break;
    }
  }

  traj.iterations = it;
  traj.final = FactorPair::from_stacked(w, m);
  return traj;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "iter,obj,grad_norm,dist\n";
  char buf[128];
  for (const IterateRecord& r : traj.iterates) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(r.iter),
                  r.obj, r.grad_norm, r.dist);
    out += buf;
  }
  return out;
}

void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
  write_file_atomic(dir / "trajectory.csv", trajectory_csv(traj));
  save_factor_pair(dir, traj.final);
  nlohmann::ordered_json meta;
  meta["status"] = to_string(traj.status);
  meta["iterations"] = traj.iterations;
  meta["init_scale"] = traj.init_scale;
  meta["perturbation_iters"] = traj.perturbation_iters;
  if (traj.diverged_step) meta["diverged_step"] = *traj.diverged_step;
  write_file_atomic(dir / "solve.json", meta.dump(2) + "\n");
}

}  // namespace bmsense
