#pragma once

// Dense linear-algebra kernels sized for desk-scale instances.
//
// Every routine here is a pure function of its arguments. Matrices are
// Eigen column-major doubles; the on-disk text format (see matrix_io.hpp)
// is row-major.

#include <Eigen/Dense>

#include <cstddef>

namespace bmsense {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct SvdResult {
  Matrix left;      // rows x k, orthonormal columns
  Vector singulars; // k = min(rows, cols), descending
  Matrix right;     // cols x k, orthonormal columns
};

/// Thin SVD with a deterministic sign convention: in every left singular
/// vector the entry of largest magnitude is positive (ties go to the lowest
/// row index); the matching right vector is flipped with it.
SvdResult svd(const Matrix& m);

struct QrResult {
  Matrix q;            // rows x numerical_rank, orthonormal columns
  Index numerical_rank = 0;
};

/// Default relative rank tolerance for qr_col_pivot.
inline constexpr double kDefaultRankTol = 1e-9;

/// Householder QR with column pivoting truncated at the smallest k for which
/// the discarded trailing block has Frobenius norm <= rank_tol * ||M||_F.
/// Hence ||Q Q^T M - M||_F <= rank_tol * ||M||_F. M = 0 yields rank 0.
QrResult qr_col_pivot(const Matrix& m, double rank_tol = kDefaultRankTol);

struct ExtremeEig {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  Vector v_min;  // unit norm
};

/// Extreme eigenpairs of a symmetric matrix (symmetric within 1e-10 relative).
ExtremeEig sym_eig_extreme(const Matrix& s);

/// Trace inner product sum_ij X_ij Y_ij.
double frob_inner(const Matrix& x, const Matrix& y);

/// Orthogonal R maximizing trace(R^T M), taken as left * right^T of svd(M).
/// Reflections are allowed.
Matrix polar_orthogonal_factor(const Matrix& m);

bool all_finite(const Matrix& m);

}  // namespace bmsense
