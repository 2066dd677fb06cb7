#include "bmsense/landscape.hpp"

#include <cmath>
#include <limits>

#include "bmsense/errors.hpp"
#include "report_json.hpp"

namespace bmsense {

Matrix BalancedFactors::stacked() const {
  Matrix w(ustar.rows() + vstar.rows(), ustar.cols());
  w << ustar, vstar;
  return w;
}

BalancedFactors balanced_factorize(const Matrix& xstar, Index r) {
  if (r < 1 || r > std::min(xstar.rows(), xstar.cols())) {
    throw InvalidInputError("balanced_factorize: r must lie in [1, min(m, n)]");
  }
  const SvdResult dec = svd(xstar);
  const Vector root = dec.singulars.head(r).cwiseSqrt();
  BalancedFactors bf;
  bf.ustar = dec.left.leftCols(r) * root.asDiagonal();
  bf.vstar = dec.right.leftCols(r) * root.asDiagonal();
  bf.sigma = dec.singulars.head(r);
  return bf;
}

namespace {

void check_against(const FactorPair& wp, const BalancedFactors& bf) {
  if (wp.u.rows() != bf.ustar.rows() || wp.v.rows() != bf.vstar.rows() ||
      wp.rank() != bf.rank() || wp.v.cols() != bf.rank()) {
    throw InvalidInputError("factors and balanced truth have different shapes");
  }
}

Matrix lifted_difference(const FactorPair& wp, const BalancedFactors& bf) {
  const Matrix w = wp.stacked();
  const Matrix ws = bf.stacked();
  return w * w.transpose() - ws * ws.transpose();
}

double truth_residual(const SensingProblem& prob, const BalancedFactors& bf) {
  return (prob.op.apply(bf.product()) - prob.b).norm();
}

void check_deltas(double delta2r, double delta4r) {
  if (!(delta2r >= 0.0 && delta2r < 1.0 && delta4r >= 0.0 && delta4r < 1.0)) {
    throw InvalidInputError("RIP constants must lie in [0, 1)");
  }
}

double coefficient_numerator(double d2, double d4) {
  return 1.0 - 5.0 * d2 - 544.0 * d4 * d4 - 1088.0 * d2 * d4 * d4;
}

}  // namespace

double dist_to_truth(const FactorPair& wp, const BalancedFactors& bf) {
  check_against(wp, bf);
  const Matrix w = wp.stacked();
  const Matrix ws = bf.stacked();
  const Matrix r = polar_orthogonal_factor(ws.transpose() * w);
  return (w - ws * r).norm();
}

double lifted_gap(const FactorPair& wp, const BalancedFactors& bf) {
  check_against(wp, bf);
  return lifted_difference(wp, bf).norm();
}

double first_order_residual(const SensingProblem& prob, const FactorPair& wp) {
  return grad(prob, wp).norm();
}

HessianEig min_hessian_eig(const SensingProblem& prob, const FactorPair& wp,
                           const HessianEigOptions& opts) {
  const Index rows = wp.m() + wp.n();
  const Index r = wp.rank();
  const Index dim = rows * r;
  HessianEig out;
  if (dim <= opts.dense_cap && dim <= kDenseHessianCap) {
    const Matrix h = assemble_dense_hessian(prob, wp);
    const ExtremeEig eig = sym_eig_extreme(h);
    out.lambda_min_paper = eig.lambda_min;
    out.direction = Eigen::Map<const Matrix>(eig.v_min.data(), rows, r);
    out.converged = true;
    out.dense = true;
    return out;
  }
  const LinearMap op = [&](const Vector& x) -> Vector {
    const Matrix z = Eigen::Map<const Matrix>(x.data(), rows, r);
    const Matrix hz = hess_apply(prob, wp, z);
    return Eigen::Map<const Vector>(hz.data(), dim);
  };
  const LanczosResult res = lanczos_min_eig(dim, op, opts.lanczos);
  out.lambda_min_paper = res.lambda_min;
  out.direction = Eigen::Map<const Matrix>(res.vec.data(), rows, r);
  out.converged = res.converged;
  out.dense = false;
  return out;
}

double thm1_coefficient(double delta2r, double delta4r) {
  check_deltas(delta2r, delta4r);
  return coefficient_numerator(delta2r, delta4r) /
         (8.0 * (40.0 + 68.0 * delta2r) * (1.0 + delta2r));
}

double cor1_coefficient(double delta2r, double delta4r) {
  check_deltas(delta2r, delta4r);
  return coefficient_numerator(delta2r, delta4r) /
         (10.0 * (40.0 + 68.0 * delta2r) * (1.0 + delta2r));
}

BoundCertificate thm1_certificate(const SensingProblem& prob, const FactorPair& wp,
                                  const BalancedFactors& bf, double delta2r, double delta4r,
                                  const Tolerances& tol) {
  BoundCertificate c;
  c.coeff = thm1_coefficient(delta2r, delta4r);
  const double gap = lifted_gap(wp, bf);
  const double res = truth_residual(prob, bf);
  c.lhs = c.coeff * gap * gap;
  c.rhs = res * res;
  c.holds = c.lhs <= c.rhs + tol.eps_cert(c.rhs);
  c.coeff_positive = c.coeff > 0.0;
  return c;
}

BoundCertificate cor1_certificate(const SensingProblem& prob, const FactorPair& wp,
                                  const BalancedFactors& bf, double delta2r, double delta4r,
                                  const Tolerances& tol) {
  BoundCertificate c;
  c.coeff = cor1_coefficient(delta2r, delta4r);
  const double dist = dist_to_truth(wp, bf);
  const double res = truth_residual(prob, bf);
  c.lhs = bf.sigma_r() * c.coeff * dist * dist;
  c.rhs = res * res;
  c.holds = c.lhs <= c.rhs + tol.eps_cert(c.rhs);
  c.coeff_positive = c.coeff > 0.0;
  return c;
}

Lemma3Result lemma3_check(const SensingProblem& prob, const FactorPair& wp,
                          const BalancedFactors& bf, double delta2r, double delta4r,
                          const Tolerances& tol) {
  check_deltas(delta2r, delta4r);
  check_against(wp, bf);
  Lemma3Result out;
  const Matrix d = lifted_difference(wp, bf);
  const QrResult qr = qr_col_pivot(wp.stacked());
  out.q_rank = qr.numerical_rank;
  // ||D Q Q^T||_F = ||D Q||_F for orthonormal Q.
  out.lhs = qr.numerical_rank == 0 ? 0.0 : 0.25 * (d * qr.q).norm();
  out.rhs = delta4r * d.norm() + std::sqrt((1.0 + delta2r) / 2.0) * truth_residual(prob, bf);
  out.holds = out.lhs <= out.rhs + tol.eps_cert(out.rhs);
  out.first_order_ok = first_order_residual(prob, wp) <= tol.eps_crit * prob.scale();
  return out;
}

SaddleCertificate strict_saddle_certificate(const SensingProblem& prob, const FactorPair& wp,
                                            const BalancedFactors& bf, double delta4r_hat,
                                            const Tolerances& tol,
                                            const HessianEigOptions& opts) {
  check_against(wp, bf);
  SaddleCertificate out;
  out.delta4r_hat = delta4r_hat;
  out.delta_hypothesis_met = delta4r_hat <= bounds::kSaddleDelta4r;
  out.threshold = -bf.sigma_r() * bounds::kSaddleFraction;

  if (!prob.truth) {
    out.reason = "no ground truth available";
    return out;
  }
  const Matrix& xstar = *prob.truth;
  const double xnorm = xstar.norm();
  if ((prob.b - prob.op.apply(xstar)).norm() > 1e-10 * prob.scale()) {
    out.reason = "observations are noisy (b != A(X*))";
    return out;
  }
  if ((xstar - bf.product()).norm() > 1e-8 * std::max(xnorm, 1e-300)) {
    out.reason = "rank(X*) exceeds r";
    return out;
  }
  if (first_order_residual(prob, wp) > tol.eps_crit * prob.scale()) {
    out.reason = "point is not first-order critical";
    return out;
  }
  if ((wp.u * wp.v.transpose() - xstar).norm() <= tol.eps_gap * xnorm) {
    out.reason = "point reproduces X* (UV^T = X*)";
    return out;
  }
  const HessianEig eig = min_hessian_eig(prob, wp, opts);
  out.lambda_min_paper = eig.lambda_min_paper;
  if (!eig.converged) {
    out.reason = "iterative eigensolver did not converge";
    return out;
  }
  out.determinate = true;
  out.holds = out.lambda_min_paper <= out.threshold + tol.eps_eig(bf.sigma(0));
  return out;
}

std::string to_string(PointClass c) {
  switch (c) {
    case PointClass::kGlobalProximal:
      return "global-proximal";
    case PointClass::kStrictSaddle:
      return "strict-saddle";
    case PointClass::kNonCritical:
      return "non-critical";
    case PointClass::kIndeterminate:
      return "indeterminate";
  }
  return "indeterminate";
}

LandscapeReport classify(const SensingProblem& prob, const FactorPair& wp,
                         const BalancedFactors& bf, const Deltas& deltas, const Tolerances& tol,
                         const HessianEigOptions& opts) {
  LandscapeReport rep;
  rep.deltas = deltas;
  rep.tolerances = tol;
  rep.eps_eig = tol.eps_eig(bf.sigma(0));
  rep.grad_threshold = tol.eps_crit * prob.scale();

  rep.grad_norm = first_order_residual(prob, wp);
  const HessianEig eig = min_hessian_eig(prob, wp, opts);
  rep.lambda_min_paper = eig.lambda_min_paper;
  rep.hessian_converged = eig.converged;
  rep.second_order = eig.converged && rep.lambda_min_paper >= -rep.eps_eig;
  rep.dist = dist_to_truth(wp, bf);
  rep.lifted_gap = lifted_gap(wp, bf);

  const bool deltas_ok = deltas.delta2r >= 0.0 && deltas.delta2r < 1.0 && deltas.delta4r >= 0.0 &&
                         deltas.delta4r < 1.0;
  rep.certificates_evaluated = deltas_ok;
  BoundCertificate t1;
  if (deltas_ok) {
    t1 = thm1_certificate(prob, wp, bf, deltas.delta2r, deltas.delta4r, tol);
    const BoundCertificate c1 = cor1_certificate(prob, wp, bf, deltas.delta2r, deltas.delta4r, tol);
    const Lemma3Result l3 = lemma3_check(prob, wp, bf, deltas.delta2r, deltas.delta4r, tol);
    rep.thm1_coeff = t1.coeff;
    rep.thm1_lhs = t1.lhs;
    rep.thm1_rhs = t1.rhs;
    rep.thm1_holds = t1.holds;
    rep.cor1_coeff = c1.coeff;
    rep.cor1_lhs = c1.lhs;
    rep.cor1_rhs = c1.rhs;
    rep.cor1_holds = c1.holds;
    rep.lemma3_lhs = l3.lhs;
    rep.lemma3_rhs = l3.rhs;
    rep.lemma3_holds = l3.holds;
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.thm1_coeff = rep.thm1_lhs = rep.thm1_rhs = nan;
    rep.cor1_coeff = rep.cor1_lhs = rep.cor1_rhs = nan;
    rep.lemma3_lhs = rep.lemma3_rhs = nan;
  }

  const double xnorm = prob.truth ? prob.truth->norm() : bf.product().norm();
  if (rep.grad_norm > rep.grad_threshold) {
    rep.classification = PointClass::kNonCritical;
  } else if (!eig.converged) {
    rep.classification = PointClass::kIndeterminate;
  } else if (rep.lambda_min_paper < -rep.eps_eig) {
    rep.classification = PointClass::kStrictSaddle;
  } else if (rep.dist <= tol.eps_dist * std::sqrt(xnorm) || (t1.coeff_positive && t1.holds)) {
    rep.classification = PointClass::kGlobalProximal;
  } else {
    rep.classification = PointClass::kIndeterminate;
  }
  return rep;
}

bool certificate_violation(const LandscapeReport& rep) {
  if (!rep.certificates_evaluated) return false;
  const bool first_order = rep.grad_norm <= rep.grad_threshold;
  if (first_order && !rep.lemma3_holds) return true;
  if (first_order && rep.second_order) {
    if (rep.thm1_coeff > 0.0 && !rep.thm1_holds) return true;
    if (rep.cor1_coeff > 0.0 && !rep.cor1_holds) return true;
  }
  return false;
}

namespace detail {

nlohmann::ordered_json report_json(const LandscapeReport& r) {
  nlohmann::ordered_json j;
  j["grad_norm"] = r.grad_norm;
  j["lambda_min_paper"] = r.lambda_min_paper;
  j["dist"] = r.dist;
  j["lifted_gap"] = r.lifted_gap;
  j["thm1_lhs"] = r.thm1_lhs;
  j["thm1_rhs"] = r.thm1_rhs;
  j["thm1_coeff"] = r.thm1_coeff;
  j["cor1_lhs"] = r.cor1_lhs;
  j["cor1_rhs"] = r.cor1_rhs;
  j["lemma3_lhs"] = r.lemma3_lhs;
  j["lemma3_rhs"] = r.lemma3_rhs;
  j["classification"] = to_string(r.classification);
  j["cor1_coeff"] = r.cor1_coeff;
  j["thm1_holds"] = r.thm1_holds;
  j["cor1_holds"] = r.cor1_holds;
  j["lemma3_holds"] = r.lemma3_holds;
  j["second_order"] = r.second_order;
  j["hessian_converged"] = r.hessian_converged;
  j["certificates_evaluated"] = r.certificates_evaluated;
  j["delta2r"] = r.deltas.delta2r;
  j["delta4r"] = r.deltas.delta4r;
  j["delta_provenance"] = r.deltas.estimated ? "estimate-conditioned" : "certified";
  j["eps_crit"] = r.tolerances.eps_crit;
  j["eps_eig"] = r.eps_eig;
  j["grad_threshold"] = r.grad_threshold;
  j["eps_dist"] = r.tolerances.eps_dist;
  j["eps_cert_rel"] = r.tolerances.eps_cert_rel;
  j["eps_gap"] = r.tolerances.eps_gap;
  return j;
}

}  // namespace detail

std::string to_json(const LandscapeReport& report) { return detail::report_json(report).dump(); }

}  // namespace bmsense
