#include "bmsense/sensing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/matrix_io.hpp"
#include "bmsense/parallel.hpp"
#include "bmsense/random.hpp"

namespace bmsense {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kGaussian:
      return "gaussian";
    case OperatorKind::kFullSampling:
      return "full-sampling";
    case OperatorKind::kCustom:
      return "custom";
  }
  return "custom";
}

OperatorKind operator_kind_from_string(const std::string& name) {
  if (name == "gaussian") return OperatorKind::kGaussian;
  if (name == "full-sampling") return OperatorKind::kFullSampling;
  if (name == "custom") return OperatorKind::kCustom;
  throw InvalidInputError("unknown operator kind '" + name + "'");
}

SensingOperator::SensingOperator(Index m, Index n, Index p, OperatorKind kind, std::uint64_t seed)
    : m_(m), n_(n), kind_(kind), seed_(seed) {
  if (m < 1 || n < 1 || p < 1) {
    throw InvalidInputError("sensing operator needs m, n, p >= 1");
  }
  const double entries = static_cast<double>(p) * static_cast<double>(m) * static_cast<double>(n);
  if (entries > kMaxOperatorEntries) {
    std::ostringstream msg;
    msg << "sensing operator with p*m*n = " << entries << " entries exceeds the dense cap of "
        << kMaxOperatorEntries << "; reduce p or the matrix size";
    throw CapacityError(msg.str());
  }
  design_.setZero(p, m * n);
}

SensingOperator SensingOperator::gaussian(Index m, Index n, Index p, std::uint64_t seed) {
  SensingOperator op(m, n, p, OperatorKind::kGaussian, seed);
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(p)));
  // Row-major draw order within each A_i.
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < m; ++j)
      for (Index k = 0; k < n; ++k) op.design_(i, k * m + j) = dist(rng);
  return op;
}

SensingOperator SensingOperator::full_sampling(Index m, Index n) {
  SensingOperator op(m, n, m * n, OperatorKind::kFullSampling, 0);
  for (Index j = 0; j < m; ++j)
    for (Index k = 0; k < n; ++k) op.design_(j * n + k, k * m + j) = 1.0;
  return op;
}

SensingOperator SensingOperator::custom(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw InvalidInputError("custom operator needs at least one matrix");
  const Index m = mats.front().rows();
  const Index n = mats.front().cols();
  SensingOperator op(m, n, static_cast<Index>(mats.size()), OperatorKind::kCustom, 0);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const Matrix& a = mats[i];
    if (a.rows() != m || a.cols() != n) {
      throw InvalidInputError("custom operator: A_" + std::to_string(i) + " has wrong shape");
    }
    if (!a.allFinite()) {
      throw InvalidInputError("custom operator: A_" + std::to_string(i) + " is not finite");
    }
    op.design_.row(static_cast<Index>(i)) = Eigen::Map<const Vector>(a.data(), m * n).transpose();
  }
  return op;
}

Matrix SensingOperator::measurement(Index i) const {
  if (i < 0 || i >= p()) throw InvalidInputError("measurement index out of range");
  Vector row = design_.row(i).transpose();
  return Eigen::Map<const Matrix>(row.data(), m_, n_);
}

Vector SensingOperator::apply(const Matrix& x) const {
  if (x.rows() != m_ || x.cols() != n_) {
    throw InvalidInputError("apply: expected a " + std::to_string(m_) + "x" + std::to_string(n_) +
                            " matrix");
  }
  return design_ * Eigen::Map<const Vector>(x.data(), m_ * n_);
}

Matrix SensingOperator::adjoint(const Vector& y) const {
  if (y.size() != p()) {
    throw InvalidInputError("adjoint: expected a vector of length " + std::to_string(p()));
  }
  Vector flat = design_.transpose() * y;
  return Eigen::Map<const Matrix>(flat.data(), m_, n_);
}

Vector SensingOperator::lift_apply(const Matrix& w) const {
  if (w.rows() != m_ + n_ || w.cols() < 1) {
    throw InvalidInputError("lift_apply: expected W with m + n = " + std::to_string(m_ + n_) +
                            " rows");
  }
  const Matrix x = w.topRows(m_) * w.bottomRows(n_).transpose();
  return apply(x);
}

bool operator==(const SensingOperator& a, const SensingOperator& b) {
  return a.m_ == b.m_ && a.n_ == b.n_ && a.kind_ == b.kind_ && a.seed_ == b.seed_ &&
         a.design_ == b.design_;
}

Matrix lifted_measurement(const SensingOperator& op, Index i) {
  const Index m = op.m();
  const Index n = op.n();
  const Matrix a = op.measurement(i);
  Matrix b = Matrix::Zero(m + n, m + n);
  b.topRightCorner(m, n) = 0.5 * a;
  b.bottomLeftCorner(n, m) = 0.5 * a.transpose();
  return b;
}

namespace {

void check_rank(const SensingOperator& op, Index rank, Index trials) {
  if (rank < 1 || rank > std::min(op.m(), op.n())) {
    throw InvalidInputError("RIP rank must lie in [1, min(m, n)]");
  }
  if (trials < 1) throw InvalidInputError("RIP estimation needs trials >= 1");
}

}  // namespace

Matrix rip_sample(Index m, Index n, Index rank, std::uint64_t seed, Index trial) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(trial)}));
  const Matrix g1 = normal_matrix(m, rank, rng);
  const Matrix g2 = normal_matrix(n, rank, rng);
  Matrix x = g1 * g2.transpose();
  return x / x.norm();
}

RipEstimate estimate_rip(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed,
                         unsigned workers) {
  check_rank(op, rank, trials);
  std::vector<double> dev(static_cast<std::size_t>(trials));
  parallel_for(dev.size(), workers, [&](std::size_t t) {
    const Matrix x = rip_sample(op.m(), op.n(), rank, seed, static_cast<Index>(t));
    dev[t] = std::abs(op.apply(x).squaredNorm() - x.squaredNorm());
  });
  RipEstimate est{rank, 0.0, trials, seed};
  for (double d : dev) est.delta_hat = std::max(est.delta_hat, d);
  return est;
}

double rip_product_ratio(const SensingOperator& op, const Matrix& x, const Matrix& y) {
  const double denom = x.norm() * y.norm();
  if (denom == 0.0) return 0.0;
  return std::abs(op.apply(x).dot(op.apply(y)) - frob_inner(x, y)) / denom;
}

double check_rip_product(const SensingOperator& op, Index rank, Index trials, std::uint64_t seed,
                         unsigned workers) {
  check_rank(op, rank, trials);
  // X and Y come from disjoint sub-streams of the same seed.
  const std::uint64_t seed_x = derive_seed(seed, {0x5851f42dULL});
  const std::uint64_t seed_y = derive_seed(seed, {0x14057b7eULL});
  std::vector<double> ratio(static_cast<std::size_t>(trials));
  parallel_for(ratio.size(), workers, [&](std::size_t t) {
    const Matrix x = rip_sample(op.m(), op.n(), rank, seed_x, static_cast<Index>(t));
    const Matrix y = rip_sample(op.m(), op.n(), rank, seed_y, static_cast<Index>(t));
    ratio[t] = rip_product_ratio(op, x, y);
  });
  double best = 0.0;
  for (double r : ratio) best = std::max(best, r);
  return best;
}

void save_operator(const fs::path& dir, const SensingOperator& op) {
  json meta = {{"m", op.m()},
               {"n", op.n()},
               {"p", op.p()},
               {"kind", to_string(op.kind())},
               {"seed", op.seed()}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  if (op.kind() == OperatorKind::kCustom) {
    char name[32];
    for (Index i = 0; i < op.p(); ++i) {
      std::snprintf(name, sizeof(name), "A_%04lld.txt", static_cast<long long>(i));
      save_matrix(dir / name, op.measurement(i));
    }
  }
}

SensingOperator load_operator(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
  json meta;
  try {
    in >> meta;
    const Index m = meta.at("m").get<Index>();
    const Index n = meta.at("n").get<Index>();
    const Index p = meta.at("p").get<Index>();
    const OperatorKind kind = operator_kind_from_string(meta.at("kind").get<std::string>());
    const std::uint64_t seed = meta.value("seed", std::uint64_t{0});
    switch (kind) {
      case OperatorKind::kGaussian:
        return SensingOperator::gaussian(m, n, p, seed);
      case OperatorKind::kFullSampling:
        if (p != m * n) throw InvalidInputError("full-sampling operator must have p = m n");
        return SensingOperator::full_sampling(m, n);
      case OperatorKind::kCustom: {
        std::vector<Matrix> mats;
        mats.reserve(static_cast<std::size_t>(p));
        char name[32];
        for (Index i = 0; i < p; ++i) {
          std::snprintf(name, sizeof(name), "A_%04lld.txt", static_cast<long long>(i));
          mats.push_back(load_matrix(dir / name));
        }
        SensingOperator op = SensingOperator::custom(mats);
        if (op.m() != m || op.n() != n) {
          throw InvalidInputError("custom operator matrices disagree with meta.json");
        }
        return op;
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInputError((dir / "meta.json").string() + ": " + e.what());
  }
  throw InvalidInputError("unreachable operator kind");
}

}  // namespace bmsense
