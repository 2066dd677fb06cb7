#include "bmsense/linalg.hpp"

#include <cmath>
#include <string>

#include "bmsense/errors.hpp"

namespace bmsense {

bool all_finite(const Matrix& m) { return m.allFinite(); }

SvdResult svd(const Matrix& m) {
  if (!m.allFinite()) {
    throw InvalidInputError("svd: matrix has non-finite entries");
  }
  const Index k = std::min(m.rows(), m.cols());
  SvdResult out;
  if (k == 0) {
    out.left = Matrix(m.rows(), 0);
    out.right = Matrix(m.cols(), 0);
    out.singulars = Vector(0);
    return out;
  }
  Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.left = dec.matrixU();
  out.singulars = dec.singularValues();
  out.right = dec.matrixV();

  for (Index j = 0; j < k; ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < out.left.rows(); ++i) {
      const double a = std::abs(out.left(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (out.left(arg, j) < 0.0) {
      out.left.col(j) *= -1.0;
      out.right.col(j) *= -1.0;
    }
  }
  return out;
}

QrResult qr_col_pivot(const Matrix& m, double rank_tol) {
  if (!m.allFinite()) {
    throw InvalidInputError("qr_col_pivot: matrix has non-finite entries");
  }
  if (!(rank_tol >= 0.0)) {
    throw InvalidInputError("qr_col_pivot: rank_tol must be >= 0");
  }
  QrResult out;
  const double norm = m.norm();
  const Index k_max = std::min(m.rows(), m.cols());
  if (norm == 0.0 || k_max == 0) {
    out.q = Matrix(m.rows(), 0);
    return out;
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();

  // suffix[k] = ||R(k:, :)||_F^2, the part discarded when keeping k columns of Q.
  Vector suffix = Vector::Zero(k_max + 1);
  for (Index i = k_max - 1; i >= 0; --i) {
    suffix(i) = suffix(i + 1) + r.row(i).squaredNorm();
  }
  const double cutoff = rank_tol * norm;
  Index rank = k_max;
  for (Index k = 0; k <= k_max; ++k) {
    if (std::sqrt(suffix(k)) <= cutoff) {
      rank = k;
      break;
    }
  }
  out.numerical_rank = rank;
  out.q = qr.householderQ() * Matrix::Identity(m.rows(), rank);
  return out;
}

ExtremeEig sym_eig_extreme(const Matrix& s) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw InvalidInputError("sym_eig_extreme: matrix must be square and non-empty");
  }
  if (!s.allFinite()) {
    throw InvalidInputError("sym_eig_extreme: matrix has non-finite entries");
  }
  const double asym = (s - s.transpose()).norm();
  if (asym > 1e-10 * s.norm()) {
    throw InvalidInputError("sym_eig_extreme: matrix is not symmetric (asymmetry " +
                            std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) {
    throw InvalidInputError("sym_eig_extreme: eigensolver failed");
  }
  ExtremeEig out;
  const Index n = s.rows();
  out.lambda_min = eig.eigenvalues()(0);
  out.lambda_max = eig.eigenvalues()(n - 1);
  out.v_min = eig.eigenvectors().col(0).normalized();
  return out;
}

double frob_inner(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw InvalidInputError("frob_inner: shape mismatch");
  }
  return x.cwiseProduct(y).sum();
}

Matrix polar_orthogonal_factor(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInputError("polar_orthogonal_factor: matrix must be square");
  }
  const SvdResult dec = svd(m);
  return dec.left * dec.right.transpose();
}

}  // namespace bmsense
