#include <cmath>

#include <gtest/gtest.h>

#include "bmsense/errors.hpp"
#include "bmsense/landscape.hpp"
#include "bmsense/random.hpp"
#include "bmsense/solver.hpp"
#include "oracles.hpp"

using namespace bmsense;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

SensingProblem full_sampling_problem(const Matrix& xstar, Index r) {
  SensingOperator op = make_full_sampling(xstar.rows(), xstar.cols());
  Vector b = op.apply(xstar);
  return SensingProblem(std::move(op), b, r, xstar);
}

SensingProblem gaussian_problem(Index m, Index n, Index r, Index p, std::uint64_t seed,
                                double noise = 0.0) {
  Rng rng(seed);
  const Matrix xstar = normal_matrix(m, r, rng) * normal_matrix(n, r, rng).transpose();
  SensingOperator op = make_gaussian(m, n, p, seed + 1);
  Vector b = op.apply(xstar);
  std::optional<Vector> w;
  if (noise > 0.0) {
    const Matrix wn = normal_matrix(p, 1, rng, noise);
    w = wn.col(0);
    b += *w;
  }
  return SensingProblem(std::move(op), b, r, xstar, w);
}

}  // namespace

TEST(BalancedFactorize, DiagonalExample) {
  const BalancedFactors bf = balanced_factorize(diag2(4, 1), 2);
  EXPECT_LE((bf.ustar.cwiseAbs() - diag2(2, 1)).norm(), 1e-14);
  EXPECT_LE((bf.vstar.cwiseAbs() - diag2(2, 1)).norm(), 1e-14);
  EXPECT_LE((bf.ustar.transpose() * bf.ustar - bf.vstar.transpose() * bf.vstar).norm(), 1e-12);
  const BalancedFactors one = balanced_factorize(diag2(4, 1), 1);
  EXPECT_LE((one.product() - diag2(4, 0)).norm(), 1e-14);
  EXPECT_THROW(balanced_factorize(diag2(4, 1), 3), InvalidInputError);
}

TEST(BalancedFactorize, InvariantsOnRandomTruth) {
  Rng rng(2);
  for (int k = 0; k < 10; ++k) {
    const Index m = 5 + k * 2, n = 4 + k, r = 1 + k % 5;
    const Matrix x = normal_matrix(m, n, rng);
    const BalancedFactors bf = balanced_factorize(x, r);
    // Independent truncation via Jacobi SVD.
    Eigen::JacobiSVD<Matrix> ref(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix xr = ref.matrixU().leftCols(r) * ref.singularValues().head(r).asDiagonal() *
                      ref.matrixV().leftCols(r).transpose();
    EXPECT_LE((bf.product() - xr).norm(), 1e-10 * x.norm());
    EXPECT_LE((bf.ustar.transpose() * bf.ustar - bf.vstar.transpose() * bf.vstar).norm(), 1e-10 * x.norm());
    const Vector su = svd(bf.ustar).singulars;
    const Vector sv = svd(bf.vstar).singulars;
    for (Index i = 0; i < r; ++i) {
      EXPECT_NEAR(su(i), std::sqrt(ref.singularValues()(i)), 1e-10 * (1 + su(i)));
      EXPECT_NEAR(sv(i), std::sqrt(ref.singularValues()(i)), 1e-10 * (1 + sv(i)));
    }
  }
}

TEST(DistToTruth, ZeroOnOrbit) {
  Rng rng(3);
  const BalancedFactors bf = balanced_factorize(normal_matrix(6, 5, rng), 3);
  EXPECT_LE(dist_to_truth(bf.factors(), bf), 1e-12);
  const Matrix r0 = oracle::random_orthogonal(3, rng);
  EXPECT_LE(dist_to_truth(FactorPair{bf.ustar * r0, bf.vstar * r0}, bf), 1e-10);
}

TEST(DistToTruth, RankOneSignFlipOracle) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const BalancedFactors bf = balanced_factorize(normal_matrix(5, 4, rng), 1);
    const FactorPair wp{normal_matrix(5, 1, rng), normal_matrix(4, 1, rng)};
    const Matrix w = wp.stacked(), ws = bf.stacked();
    const double brute = std::min((w - ws).norm(), (w + ws).norm());
    EXPECT_NEAR(dist_to_truth(wp, bf), brute, 1e-10);
  }
}

TEST(DistToTruth, MatchesProcrustesSearchAndIsInvariant) {
  Rng rng(5);
  for (Index r = 1; r <= 4; ++r) {
    const BalancedFactors bf = balanced_factorize(normal_matrix(7, 6, rng), r);
    const FactorPair wp{normal_matrix(7, r, rng), normal_matrix(6, r, rng)};
    const double d = dist_to_truth(wp, bf);
    const double searched = oracle::procrustes_search(wp.stacked(), bf.stacked(), rng);
    EXPECT_LE(d, searched + 1e-9);
    // von Neumann trace inequality: min_R ||W - W* R||^2 = ||W||^2 + ||W*||^2 - 2 ||W*^T W||_*.
    Eigen::JacobiSVD<Matrix> cross(bf.stacked().transpose() * wp.stacked());
    const double exact2 = wp.stacked().squaredNorm() + bf.stacked().squaredNorm() -
                          2.0 * cross.singularValues().sum();
    EXPECT_NEAR(d, std::sqrt(std::max(0.0, exact2)), 1e-10 * (1 + d));
    EXPECT_LE(d * d, (wp.stacked() - bf.stacked()).squaredNorm() + 1e-12);
    for (int k = 0; k < 5; ++k) {
      const Matrix q = oracle::random_orthogonal(r, rng);
      EXPECT_NEAR(dist_to_truth(FactorPair{wp.u * q, wp.v * q}, bf), d, 1e-10);
    }
    // Sign convention independence: flip a column of the stored truth.
    BalancedFactors flipped = bf;
    flipped.ustar.col(0) *= -1.0;
    flipped.vstar.col(0) *= -1.0;
    EXPECT_NEAR(dist_to_truth(wp, flipped), d, 1e-10);
  }
  const BalancedFactors bf = balanced_factorize(normal_matrix(3, 3, rng), 2);
  EXPECT_THROW(dist_to_truth(FactorPair{Matrix::Zero(3, 1), Matrix::Zero(3, 1)}, bf), InvalidInputError);
}

TEST(FirstOrderResidual, Examples) {
  const SensingProblem prob = gaussian_problem(6, 5, 2, 60, 9);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  EXPECT_LE(first_order_residual(prob, bf.factors()), 1e-12 * prob.scale());
  EXPECT_EQ(first_order_residual(prob, make_origin_saddle(6, 5, 2)), 0.0);
  Rng rng(1);
  EXPECT_GT(first_order_residual(prob, FactorPair{normal_matrix(6, 2, rng), normal_matrix(5, 2, rng)}), 0.0);
}

TEST(MinHessianEig, OriginClosedForm) {
  const SensingProblem prob = full_sampling_problem(diag2(3, 1), 2);
  const HessianEig e = min_hessian_eig(prob, make_origin_saddle(2, 2, 2));
  EXPECT_TRUE(e.dense);
  EXPECT_NEAR(e.lambda_min_paper, -1.5, 1e-8);
  EXPECT_NEAR(e.direction.norm(), 1.0, 1e-12);
  EXPECT_LE(hess_quadratic(prob, make_origin_saddle(2, 2, 2), e.direction), e.lambda_min_paper + 1e-8);
}

TEST(MinHessianEig, PsdAtGlobalMinimum) {
  Rng rng(3);
  const SensingProblem prob = full_sampling_problem(normal_matrix(5, 2, rng) * normal_matrix(4, 2, rng).transpose(), 2);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  EXPECT_GE(min_hessian_eig(prob, bf.factors()).lambda_min_paper, -1e-8);
}

TEST(MinHessianEig, DenseAndIterativeAgree) {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SensingProblem prob = gaussian_problem(8, 7, 2, 90, 20 + seed, seed % 2 ? 0.05 : 0.0);
    const FactorPair wp = seed == 0 ? make_origin_saddle(8, 7, 2)
                                    : FactorPair{normal_matrix(8, 2, rng), normal_matrix(7, 2, rng)};
    const HessianEig dense = min_hessian_eig(prob, wp);
    HessianEigOptions opts;
    opts.dense_cap = 0;
    const HessianEig iter = min_hessian_eig(prob, wp, opts);
    ASSERT_TRUE(dense.dense);
    ASSERT_FALSE(iter.dense);
    ASSERT_TRUE(iter.converged);
    EXPECT_LE(std::abs(dense.lambda_min_paper - iter.lambda_min_paper),
              1e-6 * std::max(1.0, std::abs(dense.lambda_min_paper)));
    EXPECT_LE(hess_quadratic(prob, wp, iter.direction), iter.lambda_min_paper + 1e-8 * (1 + std::abs(iter.lambda_min_paper)));
  }
}

TEST(Coefficients, ZeroDeltaValues) {
  EXPECT_DOUBLE_EQ(thm1_coefficient(0.0, 0.0), 1.0 / 320.0);
  EXPECT_DOUBLE_EQ(cor1_coefficient(0.0, 0.0), 1.0 / 400.0);
  EXPECT_DOUBLE_EQ(thm1_coefficient(0.0, 0.0), 0.003125);
  EXPECT_DOUBLE_EQ(cor1_coefficient(0.0, 0.0), 0.0025);
  EXPECT_THROW(thm1_coefficient(-0.1, 0.0), InvalidInputError);
  EXPECT_THROW(cor1_coefficient(0.0, 1.0), InvalidInputError);
}

TEST(Coefficients, MatchDisplayedFormula) {
  for (double d2 : {0.0, 0.01, 0.2}) {
    for (double d4 : {0.0, 0.02, 0.5}) {
      const double num = 1.0 - 5.0 * d2 - 544.0 * d4 * d4 - 1088.0 * d2 * d4 * d4;
      EXPECT_DOUBLE_EQ(thm1_coefficient(d2, d4), num / (8.0 * (40.0 + 68.0 * d2) * (1.0 + d2)));
      EXPECT_DOUBLE_EQ(cor1_coefficient(d2, d4), num / (10.0 * (40.0 + 68.0 * d2) * (1.0 + d2)));
    }
  }
}

TEST(Coefficients, DecreasingInEachDelta) {
  for (int i = 0; i <= 30; ++i) {
    for (int j = 0; j < 30; ++j) {
      const double a = 0.001 * i, b = 0.001 * j, c = 0.001 * (j + 1);
      EXPECT_GT(thm1_coefficient(a, b), thm1_coefficient(a, c));
      EXPECT_GT(thm1_coefficient(b, a), thm1_coefficient(c, a));
      EXPECT_GT(cor1_coefficient(a, b), cor1_coefficient(a, c));
      EXPECT_GT(cor1_coefficient(b, a), cor1_coefficient(c, a));
    }
  }
}

TEST(Constants, BitExact) {
  EXPECT_EQ(bounds::kNoiselessDelta4r, 0.0363);
  EXPECT_EQ(bounds::kNoisyDelta4r, 0.02);
  EXPECT_EQ(bounds::kNoisyGapFactor, 1.0 / 500.0);
  EXPECT_EQ(bounds::kHighRankDelta4r, 0.005);
  EXPECT_EQ(bounds::kHighRankDistFactor, 1250.0 / 3.0);
  EXPECT_EQ(bounds::kSaddleDelta4r, 1.0 / 100.0);
  EXPECT_EQ(bounds::kSaddleFraction, 1.0 / 7.0);
}

TEST(Certificates, VanishAtBalancedTruth) {
  const SensingProblem prob = gaussian_problem(6, 6, 2, 80, 4);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const BoundCertificate t = thm1_certificate(prob, bf.factors(), bf, 0.0, 0.0);
  EXPECT_TRUE(t.holds);
  EXPECT_TRUE(t.coeff_positive);
  EXPECT_LE(std::abs(t.lhs), 1e-20);
  EXPECT_LE(t.rhs, 1e-20);
  const BoundCertificate c = cor1_certificate(prob, bf.factors(), bf, 0.0, 0.0);
  EXPECT_TRUE(c.holds);
  EXPECT_DOUBLE_EQ(c.coeff, 0.0025);
  const Lemma3Result l = lemma3_check(prob, bf.factors(), bf, 0.0, 0.0);
  EXPECT_TRUE(l.holds);
  EXPECT_TRUE(l.first_order_ok);
  EXPECT_LE(l.lhs, 1e-12);
  EXPECT_THROW(thm1_certificate(prob, bf.factors(), bf, 1.2, 0.0), InvalidInputError);
}

TEST(Certificates, ThmLhsRhsDefinitions) {
  Rng rng(6);
  const SensingProblem prob = gaussian_problem(5, 4, 1, 40, 6, 0.1);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 1);
  const FactorPair wp{normal_matrix(5, 1, rng), normal_matrix(4, 1, rng)};
  const BoundCertificate t = thm1_certificate(prob, wp, bf, 0.01, 0.02);
  const Matrix w = wp.stacked(), ws = bf.stacked();
  const double gap2 = (w * w.transpose() - ws * ws.transpose()).squaredNorm();
  EXPECT_NEAR(t.lhs, thm1_coefficient(0.01, 0.02) * gap2, 1e-12 * (1 + gap2));
  EXPECT_NEAR(t.rhs, (prob.op.apply(bf.product()) - prob.b).squaredNorm(), 1e-12);
  const BoundCertificate c = cor1_certificate(prob, wp, bf, 0.01, 0.02);
  const double d = dist_to_truth(wp, bf);
  EXPECT_NEAR(c.lhs, bf.sigma_r() * cor1_coefficient(0.01, 0.02) * d * d, 1e-12 * (1 + d * d));
}

TEST(Lemma3, OriginHasEmptyQ) {
  const SensingProblem prob = gaussian_problem(5, 5, 2, 50, 7, 0.1);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const Lemma3Result l = lemma3_check(prob, make_origin_saddle(5, 5, 2), bf, 0.1, 0.1);
  EXPECT_EQ(l.q_rank, 0);
  EXPECT_EQ(l.lhs, 0.0);
  EXPECT_TRUE(l.holds);
  EXPECT_TRUE(l.first_order_ok);
}

TEST(Lemma3, DirectProjectionOracle) {
  Rng rng(2);
  const SensingProblem prob = gaussian_problem(5, 4, 2, 50, 8, 0.1);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const FactorPair wp{normal_matrix(5, 2, rng), normal_matrix(4, 2, rng)};
  const Lemma3Result l = lemma3_check(prob, wp, bf, 0.05, 0.07);
  const Matrix w = wp.stacked(), ws = bf.stacked();
  const Matrix gap = w * w.transpose() - ws * ws.transpose();
  // Orthogonal projector onto range(W) from the pseudo-inverse.
  const Matrix proj = w * (w.transpose() * w).inverse() * w.transpose();
  EXPECT_EQ(l.q_rank, 2);
  EXPECT_FALSE(l.first_order_ok);
  EXPECT_NEAR(l.lhs, 0.25 * (gap * proj).norm(), 1e-10);
  const double rhs = 0.07 * gap.norm() +
                     std::sqrt((1 + 0.05) / 2.0) * (prob.op.apply(bf.product()) - prob.b).norm();
  EXPECT_NEAR(l.rhs, rhs, 1e-10 * rhs);
}

TEST(StrictSaddle, OriginFullSampling) {
  const SensingProblem prob = full_sampling_problem(diag2(3, 1), 2);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const SaddleCertificate s = strict_saddle_certificate(prob, make_origin_saddle(2, 2, 2), bf, 0.0);
  ASSERT_TRUE(s.determinate) << s.reason;
  EXPECT_NEAR(s.lambda_min_paper, -1.5, 1e-8);
  EXPECT_DOUBLE_EQ(s.threshold, -1.0 / 7.0);
  EXPECT_TRUE(s.holds);
  EXPECT_TRUE(s.delta_hypothesis_met);
}

TEST(StrictSaddle, TruthPointIndeterminate) {
  const SensingProblem prob = full_sampling_problem(diag2(3, 1), 2);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const SaddleCertificate s = strict_saddle_certificate(prob, bf.factors(), bf, 0.0);
  EXPECT_FALSE(s.determinate);
  EXPECT_FALSE(s.holds);
  EXPECT_FALSE(s.reason.empty());
}

TEST(StrictSaddle, PreconditionFailures) {
  Rng rng(1);
  const SensingProblem noisy = gaussian_problem(5, 5, 2, 60, 3, 0.1);
  const BalancedFactors bf = balanced_factorize(*noisy.truth, 2);
  EXPECT_FALSE(strict_saddle_certificate(noisy, make_origin_saddle(5, 5, 2), bf, 0.0).determinate);
  const SensingProblem clean = gaussian_problem(5, 5, 2, 60, 3);
  const BalancedFactors cbf = balanced_factorize(*clean.truth, 2);
  const FactorPair random{normal_matrix(5, 2, rng), normal_matrix(5, 2, rng)};
  EXPECT_FALSE(strict_saddle_certificate(clean, random, cbf, 0.0).determinate);
  const SaddleCertificate weak = strict_saddle_certificate(clean, make_origin_saddle(5, 5, 2), cbf, 0.3);
  EXPECT_TRUE(weak.determinate);
  EXPECT_FALSE(weak.delta_hypothesis_met);
}

TEST(StrictSaddle, GaussianLargePOriginHolds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SensingProblem prob = gaussian_problem(6, 6, 2, 400, 100 + seed);
    const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
    const SaddleCertificate s = strict_saddle_certificate(prob, make_origin_saddle(6, 6, 2), bf, 0.0);
    EXPECT_TRUE(s.determinate);
    EXPECT_TRUE(s.holds) << "seed " << seed;
  }
}

TEST(Classify, Examples) {
  Rng rng(5);
  const SensingProblem prob = gaussian_problem(6, 5, 2, 80, 11);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const Deltas d{0.0, 0.0};
  const LandscapeReport truth = classify(prob, bf.factors(), bf, d);
  EXPECT_EQ(truth.classification, PointClass::kGlobalProximal);
  EXPECT_FALSE(certificate_violation(truth));

  const LandscapeReport origin = classify(prob, make_origin_saddle(6, 5, 2), bf, d);
  EXPECT_EQ(origin.classification, PointClass::kStrictSaddle);
  EXPECT_LE(origin.grad_norm, origin.grad_threshold);
  EXPECT_LT(origin.lambda_min_paper, -origin.eps_eig);

  const LandscapeReport rnd = classify(prob, FactorPair{normal_matrix(6, 2, rng), normal_matrix(5, 2, rng)}, bf, d);
  EXPECT_EQ(rnd.classification, PointClass::kNonCritical);
  EXPECT_GT(rnd.grad_norm, rnd.grad_threshold);
  EXPECT_DOUBLE_EQ(rnd.grad_threshold, 1e-8 * prob.scale());
}

TEST(Classify, DeltaOutsideRangeSkipsCertificates) {
  const SensingProblem prob = gaussian_problem(5, 5, 1, 10, 2);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 1);
  const LandscapeReport rep = classify(prob, bf.factors(), bf, Deltas{1.3, 1.4});
  EXPECT_FALSE(rep.certificates_evaluated);
  EXPECT_FALSE(certificate_violation(rep));
  EXPECT_EQ(rep.classification, PointClass::kGlobalProximal);
}

TEST(Classify, JsonCarriesProvenanceAndFields) {
  const SensingProblem prob = full_sampling_problem(diag2(3, 1), 2);
  const BalancedFactors bf = balanced_factorize(*prob.truth, 2);
  const std::string js = to_json(classify(prob, make_origin_saddle(2, 2, 2), bf, Deltas{0.0, 0.0}));
  EXPECT_EQ(js.find('\n'), std::string::npos);
  for (const char* key : {"\"grad_norm\"", "\"lambda_min_paper\"", "\"dist\"", "\"thm1_lhs\"", "\"thm1_rhs\"",
                          "\"lemma3_lhs\"", "\"classification\":\"strict-saddle\"",
                          "\"delta_provenance\":\"estimate-conditioned\""}) {
    EXPECT_NE(js.find(key), std::string::npos) << key;
  }
}

TEST(PointClass, Names) {
  EXPECT_EQ(to_string(PointClass::kGlobalProximal), "global-proximal");
  EXPECT_EQ(to_string(PointClass::kStrictSaddle), "strict-saddle");
  EXPECT_EQ(to_string(PointClass::kNonCritical), "non-critical");
  EXPECT_EQ(to_string(PointClass::kIndeterminate), "indeterminate");
}

TEST(CertificateViolation, Rules) {
  LandscapeReport rep;
  rep.grad_threshold = 1e-8;
  rep.grad_norm = 1e-9;
  rep.thm1_holds = rep.cor1_holds = rep.lemma3_holds = true;
  rep.thm1_coeff = rep.cor1_coeff = 0.003;
  rep.second_order = true;
  EXPECT_FALSE(certificate_violation(rep));
  LandscapeReport lemma = rep;
  lemma.lemma3_holds = false;
  EXPECT_TRUE(certificate_violation(lemma));
  LandscapeReport thm = rep;
  thm.thm1_holds = false;
  EXPECT_TRUE(certificate_violation(thm));
  thm.thm1_coeff = -0.01;  // uninformative bound
  EXPECT_FALSE(certificate_violation(thm));
  LandscapeReport saddle = rep;
  saddle.cor1_holds = false;
  saddle.second_order = false;
  EXPECT_FALSE(certificate_violation(saddle));
  LandscapeReport noncrit = lemma;
  noncrit.grad_norm = 1.0;
  EXPECT_FALSE(certificate_violation(noncrit));
  LandscapeReport skipped = lemma;
  skipped.certificates_evaluated = false;
  EXPECT_FALSE(certificate_violation(skipped));
}
