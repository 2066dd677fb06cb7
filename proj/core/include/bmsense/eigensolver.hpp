#pragma once

#include <cstdint>
#include <functional>

#include "bmsense/linalg.hpp"

namespace bmsense {

struct LanczosOptions {
  Index basis_size = 40;     // Krylov vectors per cycle
  Index max_restarts = 400;  // cycles before giving up
  double tol = 1e-8;         // residual <= tol * spectral scale
  std::uint64_t seed = 0x6c616e637a6f73ULL;
};

struct LanczosResult {
  double lambda_min = 0.0;
  Vector vec;  // unit norm
  double residual = 0.0;
  double scale = 0.0;  // largest |Ritz value| seen, a lower estimate of ||A||_2
  Index restarts = 0;
  bool converged = false;
};

using LinearMap = std::function<Vector(const Vector&)>;

/// Smallest eigenpair of a symmetric operator given only its action.
///
/// Each cycle builds a fully reorthogonalized Krylov basis Q from the current
/// Ritz vector, solves the projected problem Q^T A Q, and restarts from the
/// new minimal Ritz vector. Non-convergence is reported, never hidden.
LanczosResult lanczos_min_eig(Index dim, const LinearMap& apply, const LanczosOptions& opts = {});

}  // namespace bmsense
