#pragma once

// Test-side reference computations. Nothing here calls into the derivative
// or alignment code under test.

#include <cmath>
#include <functional>

#include "bmsense/linalg.hpp"
#include "bmsense/objective.hpp"
#include "bmsense/random.hpp"
#include "bmsense/sensing.hpp"

namespace oracle {

using bmsense::Index;
using bmsense::Matrix;
using bmsense::Vector;

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Objective value computed from scratch with dense B_i.
inline double objective_dense(const bmsense::SensingOperator& op, const Vector& b, const Matrix& w) {
  const Matrix wwt = w * w.transpose();
  double f = 0.0;
  for (Index i = 0; i < op.p(); ++i) {
    const double r = (bmsense::lifted_measurement(op, i).cwiseProduct(wwt)).sum() - b(i);
    f += r * r;
  }
  const Index m = op.m();
  const Matrix u = w.topRows(m);
  const Matrix v = w.bottomRows(w.rows() - m);
  const Matrix d = u.transpose() * u - v.transpose() * v;
  return f + 0.25 * d.squaredNorm();
}

using Scalar = std::function<double(const Matrix&)>;

/// Central-difference gradient with step h.
inline Matrix fd_gradient(const Scalar& fn, const Matrix& w, double h) {
  Matrix g(w.rows(), w.cols());
  Matrix wp = w;
  for (Index j = 0; j < w.cols(); ++j) {
    for (Index i = 0; i < w.rows(); ++i) {
      const double x = w(i, j);
      wp(i, j) = x + h;
      const double fp = fn(wp);
      wp(i, j) = x - h;
      const double fm = fn(wp);
      wp(i, j) = x;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

/// Second central difference of t -> fn(w + t z) at t = 0.
inline double fd_second(const Scalar& fn, const Matrix& w, const Matrix& z, double h) {
  return (fn(w + h * z) - 2.0 * fn(w) + fn(w - h * z)) / (h * h);
}

/// Random orthogonal matrix from the QR of a Gaussian draw (reflections included).
inline Matrix random_orthogonal(Index r, bmsense::Rng& rng) {
  const Matrix g = bmsense::normal_matrix(r, r, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(r, r);
  return q;
}

/// Brute-force Procrustes: best of many random orthogonal R plus local
/// refinement by Givens sweeps. Returns an upper bound on the true minimum.
inline double procrustes_search(const Matrix& w, const Matrix& wstar, bmsense::Rng& rng,
                                int draws = 400) {
  const Index r = w.cols();
  auto cost = [&](const Matrix& rr) { return (w - wstar * rr).norm(); };
  Matrix best = Matrix::Identity(r, r);
  double best_cost = cost(best);
  for (int k = 0; k < draws; ++k) {
    const Matrix q = random_orthogonal(r, rng);
    const double c = cost(q);
    if (c < best_cost) {
      best_cost = c;
      best = q;
    }
  }
  for (double step = 0.5; step > 1e-12; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (Index a = 0; a < r; ++a) {
        for (Index b = a + 1; b < r; ++b) {
          for (double s : {step, -step}) {
            Matrix g = Matrix::Identity(r, r);
            g(a, a) = std::cos(s);
            g(b, b) = std::cos(s);
            g(a, b) = -std::sin(s);
            g(b, a) = std::sin(s);
            const Matrix cand = best * g;
            const double c = cost(cand);
            if (c < best_cost - 1e-15) {
              best_cost = c;
              best = cand;
              improved = true;
            }
          }
        }
      }
    }
  }
  return best_cost;
}

}  // namespace oracle
