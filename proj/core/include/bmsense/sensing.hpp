#pragma once

// Linear sensing maps A(X)_i = <A_i, X>, their lifted counterparts acting on
// W W^T, and Monte-Carlo estimates of restricted isometry constants.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bmsense/linalg.hpp"

namespace bmsense {

enum class OperatorKind { kGaussian, kFullSampling, kCustom };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

/// Upper bound on p * m * n stored entries.
inline constexpr double kMaxOperatorEntries = 1e8;

/// Immutable collection of p measurement matrices A_i of size m x n.
///
/// Internally each A_i is one row of a p x (m n) design matrix holding
/// A_i in Eigen's column-major vectorization, so apply is a single
/// matrix-vector product with the column-major storage of X.
class SensingOperator {
 public:
  static SensingOperator gaussian(Index m, Index n, Index p, std::uint64_t seed);
  static SensingOperator full_sampling(Index m, Index n);
  static SensingOperator custom(const std::vector<Matrix>& mats);

  Index m() const { return m_; }
  Index n() const { return n_; }
  Index p() const { return design_.rows(); }
  OperatorKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }

  /// Materializes A_i (m x n).
  Matrix measurement(Index i) const;

  /// (A(X))_i = <A_i, X>.
  Vector apply(const Matrix& x) const;
  /// sum_i y_i A_i.
  Matrix adjoint(const Vector& y) const;
  /// (B(W W^T))_i = <B_i, W W^T> = <A_i, U V^T> for W = [U; V]; B_i is never formed.
  Vector lift_apply(const Matrix& w) const;

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& design() const {
    return design_;
  }

  friend bool operator==(const SensingOperator& a, const SensingOperator& b);

 private:
  SensingOperator(Index m, Index n, Index p, OperatorKind kind, std::uint64_t seed);

  Index m_ = 0;
  Index n_ = 0;
  OperatorKind kind_ = OperatorKind::kCustom;
  std::uint64_t seed_ = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> design_;
};

inline SensingOperator make_gaussian(Index m, Index n, Index p, std::uint64_t seed) {
  return SensingOperator::gaussian(m, n, p, seed);
}
inline SensingOperator make_full_sampling(Index m, Index n) {
  return SensingOperator::full_sampling(m, n);
}
inline Vector apply(const SensingOperator& op, const Matrix& x) { return op.apply(x); }
inline Matrix adjoint(const SensingOperator& op, const Vector& y) { return op.adjoint(y); }
inline Vector lift_apply(const SensingOperator& op, const Matrix& w) { return op.lift_apply(w); }

/// Dense lifted matrix B_i = 1/2 [[0, A_i], [A_i^T, 0]]. Test and debugging aid only.
Matrix lifted_measurement(const SensingOperator& op, Index i);

struct RipEstimate {
  Index rank = 0;
  double delta_hat = 0.0;  // Monte-Carlo lower bound on delta_rank
  Index trials = 0;
  std::uint64_t seed = 0;
};

/// Random unit-Frobenius rank-r matrix G1 G2^T / ||G1 G2^T||_F for trial t.
Matrix rip_sample(Index m, Index n, Index rank, std::uint64_t seed, Index trial);

/// max over sampled unit rank-r X of | ||A(X)||^2 - 1 |.
/// Trials are split over `workers` threads; the result does not depend on it.
RipEstimate estimate_rip(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed,
                         unsigned workers = 1);

/// | <A(X), A(Y)> - <X, Y> | / (||X||_F ||Y||_F).
double rip_product_ratio(const SensingOperator& op, const Matrix& x, const Matrix& y);

/// Max of rip_product_ratio over sampled independent rank-r pairs.
double check_rip_product(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed,
                         unsigned workers = 1);

/// Directory layout: meta.json {"m","n","p","kind","seed"}; custom operators
/// also write A_0000.txt ... in the matrix text format.
void save_operator(const std::filesystem::path& dir, const SensingOperator& op);
SensingOperator load_operator(const std::filesystem::path& dir);

}  // namespace bmsense
