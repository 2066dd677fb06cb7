#include "bmsense/objective.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/matrix_io.hpp"

namespace bmsense {

namespace fs = std::filesystem;

Matrix FactorPair::stacked() const {
  Matrix w(u.rows() + v.rows(), u.cols());
  w << u, v;
  return w;
}

Matrix FactorPair::tilde() const {
  Matrix w(u.rows() + v.rows(), u.cols());
  w << u, -v;
  return w;
}

FactorPair FactorPair::from_stacked(const Matrix& w, Index m) {
  if (m < 0 || m > w.rows()) throw InvalidInputError("from_stacked: bad split row");
  return FactorPair{w.topRows(m), w.bottomRows(w.rows() - m)};
}

SensingProblem::SensingProblem(SensingOperator op_in, Vector b_in, Index rank_in,
                               std::optional<Matrix> truth_in, std::optional<Vector> noise_in)
    : op(std::move(op_in)),
      b(std::move(b_in)),
      rank(rank_in),
      truth(std::move(truth_in)),
      noise(std::move(noise_in)) {
  if (rank < 1) throw InvalidInputError("problem rank must be >= 1");
  if (b.size() != op.p()) throw InvalidInputError("observation length differs from p");
  if (!b.allFinite()) throw InvalidInputError("observations must be finite");
  if (truth && (truth->rows() != op.m() || truth->cols() != op.n())) {
    throw InvalidInputError("truth matrix shape differs from the operator");
  }
  if (noise && noise->size() != op.p()) throw InvalidInputError("noise length differs from p");
}

namespace {

void check_factors(const SensingProblem& prob, const FactorPair& wp) {
  if (wp.u.rows() != prob.op.m() || wp.v.rows() != prob.op.n() || wp.u.cols() != wp.v.cols() ||
      wp.u.cols() < 1) {
    throw InvalidInputError("factor shapes do not match the problem (U: " +
                            std::to_string(wp.u.rows()) + "x" + std::to_string(wp.u.cols()) +
                            ", V: " + std::to_string(wp.v.rows()) + "x" +
                            std::to_string(wp.v.cols()) + ")");
  }
}

void check_direction(const FactorPair& wp, const Matrix& z) {
  if (z.rows() != wp.u.rows() + wp.v.rows() || z.cols() != wp.u.cols()) {
    throw InvalidInputError("direction Z must have the shape of W");
  }
}

Vector residual(const SensingProblem& prob, const FactorPair& wp) {
  return prob.op.apply(wp.u * wp.v.transpose()) - prob.b;
}

}  // namespace

double eval_f(const SensingProblem& prob, const FactorPair& wp) {
  check_factors(prob, wp);
  return residual(prob, wp).squaredNorm();
}

double eval_g(const FactorPair& wp) {
  if (wp.u.cols() != wp.v.cols()) throw InvalidInputError("U and V need the same column count");
  const Matrix d = wp.u.transpose() * wp.u - wp.v.transpose() * wp.v;
  return SensingProblem::kLambda * d.squaredNorm();
}

Matrix first_order_expression(const SensingProblem& prob, const FactorPair& wp) {
  check_factors(prob, wp);
  const Index m = wp.m();
  const Index n = wp.n();
  // sum_i res_i B_i W = 1/2 [S V; S^T U] with S = sum_i res_i A_i.
  const Matrix s = prob.op.adjoint(residual(prob, wp));
  const Matrix d = wp.u.transpose() * wp.u - wp.v.transpose() * wp.v;
  Matrix out(m + n, wp.rank());
  out.topRows(m) = 0.5 * s * wp.v + 0.25 * wp.u * d;
  out.bottomRows(n) = 0.5 * s.transpose() * wp.u - 0.25 * wp.v * d;
  return out;
}

Matrix grad(const SensingProblem& prob, const FactorPair& wp) {
  return 4.0 * first_order_expression(prob, wp);
}

double hess_quadratic(const SensingProblem& prob, const FactorPair& wp, const Matrix& z) {
  check_factors(prob, wp);
  check_direction(wp, z);
  const Index m = wp.m();
  const Index n = wp.n();
  const Matrix zu = z.topRows(m);
  const Matrix zv = z.bottomRows(n);
  const Matrix w = wp.stacked();
  const Matrix wt = wp.tilde();
  Matrix zt(m + n, z.cols());
  zt << zu, -zv;

  // <B_i, Z W^T> = <B_i, W Z^T> = 1/2 <A_i, Z_U V^T + U Z_V^T>.
  const Vector half_cross = 0.5 * prob.op.apply(zu * wp.v.transpose() + wp.u * zv.transpose());
  const double term_a = 2.0 * half_cross.squaredNorm();
  // <B_i, Z Z^T> = <A_i, Z_U Z_V^T>.
  const double term_b = residual(prob, wp).dot(prob.op.apply(zu * zv.transpose()));

  // Trace identities keep the three regularizer terms in r x r products.
  const double term_c = ((zt.transpose() * z) * (w.transpose() * wt)).trace();  // <Z~ W~^T, Z W^T>
  const double term_d = ((wt.transpose() * z) * (w.transpose() * zt)).trace();  // <W~ Z~^T, Z W^T>
  const double term_e = (wt.transpose() * z).squaredNorm();                      // <W~ W~^T, Z Z^T>

  return term_a + term_b + 0.25 * (term_c + term_d + term_e);
}

Matrix hess_apply(const SensingProblem& prob, const FactorPair& wp, const Matrix& z) {
  check_factors(prob, wp);
  check_direction(wp, z);
  const Index m = wp.m();
  const Index n = wp.n();
  const Matrix& u = wp.u;
  const Matrix& v = wp.v;
  const Matrix zu = z.topRows(m);
  const Matrix zv = z.bottomRows(n);

  // f part: 2 sum_i <B_i, Z W^T> B_i W + sum_i res_i B_i Z.
  const Matrix t = prob.op.adjoint(prob.op.apply(zu * v.transpose() + u * zv.transpose()));
  const Matrix s = prob.op.adjoint(residual(prob, wp));

  // g part: 1/4 [J Z M + J W (N + N^T)], M = W~^T W, N = W~^T Z.
  const Matrix mm = u.transpose() * u - v.transpose() * v;
  const Matrix nn = u.transpose() * zu - v.transpose() * zv;
  const Matrix sym = nn + nn.transpose();

  Matrix out(m + n, z.cols());
  out.topRows(m) = 0.5 * t * v + 0.5 * s * zv + 0.25 * (zu * mm + u * sym);
  out.bottomRows(n) = 0.5 * t.transpose() * u + 0.5 * s.transpose() * zu - 0.25 * (zv * mm + v * sym);
  return out;
}

Matrix assemble_dense_hessian(const SensingProblem& prob, const FactorPair& wp) {
  check_factors(prob, wp);
  const Index rows = wp.m() + wp.n();
  const Index r = wp.rank();
  const Index dim = rows * r;
  if (dim > kDenseHessianCap) {
    throw CapacityError("dense Hessian of dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(kDenseHessianCap) + "; use the iterative eigensolver");
  }
  Matrix h(dim, dim);
  Matrix e = Matrix::Zero(rows, r);
  for (Index k = 0; k < dim; ++k) {
    e(k % rows, k / rows) = 1.0;
    const Matrix col = hess_apply(prob, wp, e);
    h.col(k) = Eigen::Map<const Vector>(col.data(), dim);
    e(k % rows, k / rows) = 0.0;
  }
  return 0.5 * (h + h.transpose());
}

void save_factor_pair(const fs::path& dir, const FactorPair& wp) {
  save_matrix(dir / "U.txt", wp.u);
  save_matrix(dir / "V.txt", wp.v);
  nlohmann::json meta = {{"m", wp.m()}, {"n", wp.n()}, {"r", wp.rank()}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

FactorPair load_factor_pair(const fs::path& dir) {
  FactorPair wp{load_matrix(dir / "U.txt"), load_matrix(dir / "V.txt")};
  std::ifstream in(dir / "meta.json");
  if (in) {
    nlohmann::json meta;
    try {
      in >> meta;
      if (meta.at("m").get<Index>() != wp.m() || meta.at("n").get<Index>() != wp.n() ||
          meta.at("r").get<Index>() != wp.rank()) {
        throw InvalidInputError(dir.string() + ": meta.json disagrees with U.txt/V.txt");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInputError((dir / "meta.json").string() + ": " + e.what());
    }
  }
  if (wp.u.cols() != wp.v.cols()) {
    throw InvalidInputError(dir.string() + ": U and V have different column counts");
  }
  return wp;
}

}  // namespace bmsense
