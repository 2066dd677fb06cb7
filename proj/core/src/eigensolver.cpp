#include "bmsense/eigensolver.hpp"

#include <algorithm>
#include <cmath>

#include "bmsense/errors.hpp"
#include "bmsense/random.hpp"

namespace bmsense {

namespace {

// Orthogonalize v against the first k columns of q twice; returns the remaining norm.
double orthogonalize(const Matrix& q, Index k, Vector& v) {
  for (int pass = 0; pass < 2; ++pass) {
    if (k > 0) v -= q.leftCols(k) * (q.leftCols(k).transpose() * v);
  }
  return v.norm();
}

}  // namespace

LanczosResult lanczos_min_eig(Index dim, const LinearMap& apply, const LanczosOptions& opts) {
  if (dim < 1) throw InvalidInputError("lanczos_min_eig: dimension must be positive");
  if (opts.basis_size < 2 && dim > 1) throw InvalidInputError("lanczos_min_eig: basis_size < 2");

  Rng rng(opts.seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&] {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = normal(rng);
    return v;
  };

  const Index k_max = std::min(dim, std::max<Index>(opts.basis_size, 1));
  LanczosResult out;
  Vector start = random_vector().normalized();

  for (Index cycle = 0; cycle <= opts.max_restarts; ++cycle) {
    Matrix q(dim, k_max);
    Matrix aq(dim, k_max);
    Index k = 0;
    Vector next = start;
    while (k < k_max) {
      double nrm = orthogonalize(q, k, next);
      if (nrm < 1e-10) {
        // Invariant subspace reached; continue with a fresh direction.
        next = random_vector();
        nrm = orthogonalize(q, k, next);
        if (nrm < 1e-10) break;
      }
      q.col(k) = next / nrm;
      aq.col(k) = apply(q.col(k));
      next = aq.col(k);
      ++k;
    }

    Matrix t = q.leftCols(k).transpose() * aq.leftCols(k);
    t = 0.5 * (t + t.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
    const Vector y = eig.eigenvectors().col(0);
    const double theta = eig.eigenvalues()(0);
    out.scale = std::max({out.scale, std::abs(eig.eigenvalues()(0)),
                          std::abs(eig.eigenvalues()(k - 1))});

    Vector x = q.leftCols(k) * y;
    const double xn = x.norm();
    x /= xn;
    const Vector ax = aq.leftCols(k) * y / xn;
    out.lambda_min = theta;
    out.vec = x;
    out.residual = (ax - theta * x).norm();
    out.restarts = cycle;

    const double threshold = opts.tol * std::max(out.scale, 1e-300);
    if (out.residual <= threshold || k == dim) {
      out.converged = true;
      return out;
    }
    start = x;
  }
  return out;
}

}  // namespace bmsense
