#pragma once

// Optimality certificates for the factored sensing objective: distance to the
// balanced truth, the minimal Hessian eigenvalue, the distance bounds at
// second-order critical points, the first-order Q Q^T inequality, and the
// strict-saddle eigenvalue bound.

#include <string>

#include "bmsense/eigensolver.hpp"
#include "bmsense/linalg.hpp"
#include "bmsense/objective.hpp"

namespace bmsense {

/// Constants of the landscape results, kept bit-exact.
namespace bounds {
inline constexpr double kNoiselessDelta4r = 0.0363;        // noiseless recovery regime
inline constexpr double kNoisyDelta4r = 0.02;              // noisy regime
inline constexpr double kNoisyGapFactor = 1.0 / 500.0;     // ||WW^T - W*W*^T|| / 500 <= ||w||
inline constexpr double kHighRankDelta4r = 0.005;          // high-rank regime
inline constexpr double kHighRankDistFactor = 1250.0 / 3.0;  // Dist <= 1250/(3 sigma_r) ||...||
inline constexpr double kSaddleDelta4r = 1.0 / 100.0;      // strict-saddle hypothesis
inline constexpr double kSaddleFraction = 1.0 / 7.0;       // lambda_min <= -sigma_r / 7
}  // namespace bounds

struct Tolerances {
  double eps_crit = 1e-8;      // gradient residual, relative to 1 + ||b||
  double eps_eig_rel = 1e-8;   // eps_eig = eps_eig_rel * (1 + sigma_1(X*))
  double eps_dist = 1e-6;      // dist, relative to ||X*||_F^{1/2}
  double eps_cert_rel = 1e-10; // eps_cert = eps_cert_rel * (1 + rhs)
  double eps_gap = 1e-6;       // ||UV^T - X*||_F, relative to ||X*||_F

  double eps_eig(double sigma1) const { return eps_eig_rel * (1.0 + sigma1); }
  double eps_cert(double rhs) const { return eps_cert_rel * (1.0 + rhs); }
};

/// Balanced factorization U* = A Sigma^{1/2}, V* = B Sigma^{1/2} of the rank-r
/// truncation of X*.
struct BalancedFactors {
  Matrix ustar;
  Matrix vstar;
  Vector sigma;  // the r leading singular values of X*, descending

  Index rank() const { return ustar.cols(); }
  Matrix stacked() const;
  Matrix product() const { return ustar * vstar.transpose(); }
  FactorPair factors() const { return FactorPair{ustar, vstar}; }
  double sigma_r() const { return sigma(sigma.size() - 1); }
};

BalancedFactors balanced_factorize(const Matrix& xstar, Index r);

/// min over orthogonal R of ||W - W* R||_F, solved by orthogonal Procrustes.
double dist_to_truth(const FactorPair& wp, const BalancedFactors& bf);

/// ||W W^T - W* W*^T||_F.
double lifted_gap(const FactorPair& wp, const BalancedFactors& bf);

/// ||grad(f + g)(W)||_F.
double first_order_residual(const SensingProblem& prob, const FactorPair& wp);

struct HessianEigOptions {
  Index dense_cap = kDenseHessianCap;  // use the dense path when (m+n) r <= dense_cap
  LanczosOptions lanczos{};
};

struct HessianEig {
  double lambda_min_paper = 0.0;
  Matrix direction;  // unit Frobenius norm, shape of W
  bool converged = true;
  bool dense = true;
};

HessianEig min_hessian_eig(const SensingProblem& prob, const FactorPair& wp,
                           const HessianEigOptions& opts = {});

double thm1_coefficient(double delta2r, double delta4r);
double cor1_coefficient(double delta2r, double delta4r);

struct BoundCertificate {
  double coeff = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool coeff_positive = false;  // the inequality only carries information when true
};

/// coeff * ||WW^T - W*W*^T||_F^2 <= ||A(U* V*^T) - b||^2.
BoundCertificate thm1_certificate(const SensingProblem& prob, const FactorPair& wp,
                                  const BalancedFactors& bf, double delta2r, double delta4r,
                                  const Tolerances& tol = {});

/// sigma_r(X*) * coeff * Dist^2 <= ||A(U* V*^T) - b||^2.
BoundCertificate cor1_certificate(const SensingProblem& prob, const FactorPair& wp,
                                  const BalancedFactors& bf, double delta2r, double delta4r,
                                  const Tolerances& tol = {});

struct Lemma3Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool first_order_ok = false;  // hypothesis flag; the check runs either way
  Index q_rank = 0;
};

/// 1/4 ||(WW^T - W*W*^T) Q Q^T||_F <= delta4r ||WW^T - W*W*^T||_F
///                                    + sqrt((1 + delta2r)/2) ||A(U* V*^T) - b||.
Lemma3Result lemma3_check(const SensingProblem& prob, const FactorPair& wp,
                          const BalancedFactors& bf, double delta2r, double delta4r,
                          const Tolerances& tol = {});

struct SaddleCertificate {
  double lambda_min_paper = 0.0;
  double threshold = 0.0;  // -sigma_r(X*) / 7
  bool holds = false;
  bool determinate = false;
  std::string reason;  // why the certificate is indeterminate, if it is
  double delta4r_hat = 0.0;
  bool delta_hypothesis_met = false;  // delta4r_hat <= 1/100 (estimate-conditioned)
};

SaddleCertificate strict_saddle_certificate(const SensingProblem& prob, const FactorPair& wp,
                                            const BalancedFactors& bf, double delta4r_hat,
                                            const Tolerances& tol = {},
                                            const HessianEigOptions& opts = {});

enum class PointClass { kGlobalProximal, kStrictSaddle, kNonCritical, kIndeterminate };

std::string to_string(PointClass c);

struct Deltas {
  double delta2r = 0.0;
  double delta4r = 0.0;
  bool estimated = true;  // Monte-Carlo lower bounds rather than certified constants
};

struct LandscapeReport {
  double grad_norm = 0.0;
  double lambda_min_paper = 0.0;
  double dist = 0.0;
  double lifted_gap = 0.0;
  double thm1_lhs = 0.0;
  double thm1_rhs = 0.0;
  double thm1_coeff = 0.0;
  double cor1_lhs = 0.0;
  double cor1_rhs = 0.0;
  double cor1_coeff = 0.0;
  double lemma3_lhs = 0.0;
  double lemma3_rhs = 0.0;
  bool thm1_holds = false;
  bool cor1_holds = false;
  bool lemma3_holds = false;
  bool second_order = false;
  bool hessian_converged = true;
  bool certificates_evaluated = true;  // false when a delta lies outside [0, 1)
  PointClass classification = PointClass::kIndeterminate;
  Deltas deltas;
  Tolerances tolerances;
  double eps_eig = 0.0;
  double grad_threshold = 0.0;
};

LandscapeReport classify(const SensingProblem& prob, const FactorPair& wp,
                         const BalancedFactors& bf, const Deltas& deltas,
                         const Tolerances& tol = {}, const HessianEigOptions& opts = {});

/// True when a certificate that the theory guarantees fails at this point:
/// the first-order inequality at a first-order point, or a distance bound with
/// positive coefficient at a second-order point.
bool certificate_violation(const LandscapeReport& report);

/// Flat single-line JSON object.
std::string to_json(const LandscapeReport& report);

}  // namespace bmsense
