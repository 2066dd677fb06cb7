#pragma once

// Composite objective (f + g)(W) = ||B(W W^T) - b||^2 + 1/4 ||W~^T W||_F^2
// over the stacked factor W = [U; V], with W~ = [U; -V].
//
// Two derivative normalizations coexist here:
//  * grad() returns the true gradient of f + g (used by the solver).
//  * hess_quadratic/hess_apply/assemble_dense_hessian return the quadratic
//    form in the normalization whose strict-saddle constant is -sigma_r/7,
//    which is exactly 1/4 of the true second derivative. Zero sets and signs
//    agree between the two.

#include <filesystem>
#include <optional>

#include "bmsense/linalg.hpp"
#include "bmsense/sensing.hpp"

namespace bmsense {

struct FactorPair {
  Matrix u;  // m x r
  Matrix v;  // n x r

  Index m() const { return u.rows(); }
  Index n() const { return v.rows(); }
  Index rank() const { return u.cols(); }

  /// W = [U; V].
  Matrix stacked() const;
  /// W~ = [U; -V].
  Matrix tilde() const;
  static FactorPair from_stacked(const Matrix& w, Index m);
};

struct SensingProblem {
  static constexpr double kLambda = 0.25;

  SensingOperator op;
  Vector b;
  Index rank = 1;
  std::optional<Matrix> truth;  // X*, m x n
  std::optional<Vector> noise;  // w, length p

  SensingProblem(SensingOperator op, Vector b, Index rank, std::optional<Matrix> truth = {},
                 std::optional<Vector> noise = {});

  /// 1 + ||b||, the scale used by gradient tolerances.
  double scale() const { return 1.0 + b.norm(); }
};

/// ||B(W W^T) - b||^2.
double eval_f(const SensingProblem& prob, const FactorPair& wp);
/// 1/4 ||U^T U - V^T V||_F^2.
double eval_g(const FactorPair& wp);
inline double eval_objective(const SensingProblem& prob, const FactorPair& wp) {
  return eval_f(prob, wp) + eval_g(wp);
}

/// True gradient of f + g, shape (m+n) x r.
Matrix grad(const SensingProblem& prob, const FactorPair& wp);

/// sum_i res_i B_i W + 1/4 W~ W~^T W, which is grad() / 4.
Matrix first_order_expression(const SensingProblem& prob, const FactorPair& wp);

/// Q(W; Z), evaluated term by term from the inner-product display.
double hess_quadratic(const SensingProblem& prob, const FactorPair& wp, const Matrix& z);

/// Symmetric linear map with <Z, H(Z)> = hess_quadratic(Z).
Matrix hess_apply(const SensingProblem& prob, const FactorPair& wp, const Matrix& z);

/// Largest (m+n) r for which the dense Hessian is assembled.
inline constexpr Index kDenseHessianCap = 2000;

/// Matrix of hess_apply on the column-major vec of Z, symmetrized.
Matrix assemble_dense_hessian(const SensingProblem& prob, const FactorPair& wp);

/// Directory layout: U.txt, V.txt, meta.json {"m","n","r"}.
void save_factor_pair(const std::filesystem::path& dir, const FactorPair& wp);
FactorPair load_factor_pair(const std::filesystem::path& dir);

}  // namespace bmsense
