#include <benchmark/benchmark.h>

#include "bmsense/landscape.hpp"
#include "bmsense/objective.hpp"
#include "bmsense/random.hpp"
#include "bmsense/sensing.hpp"

using namespace bmsense;

namespace {

// Square m = n instance with r = 2 and p = 6 r (m + n) Gaussian measurements.
struct Fixture {
  explicit Fixture(Index dim)
      : op(make_gaussian(dim, dim, 12 * 2 * dim, 1)),
        prob(op, Vector::Zero(op.p()), 2) {
    Rng rng(2);
    const Matrix x = normal_matrix(dim, 2, rng) * normal_matrix(dim, 2, rng).transpose();
    prob.b = op.apply(x);
    wp = FactorPair{normal_matrix(dim, 2, rng), normal_matrix(dim, 2, rng)};
    z = normal_matrix(2 * dim, 2, rng);
  }
  SensingOperator op;
  SensingProblem prob;
  FactorPair wp;
  Matrix z;
};

void BM_Apply(benchmark::State& state) {
  Fixture fx(state.range(0));
  const Matrix x = fx.wp.u * fx.wp.v.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(fx.op.apply(x));
}

void BM_Adjoint(benchmark::State& state) {
  Fixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fx.op.adjoint(fx.prob.b));
}

void BM_Grad(benchmark::State& state) {
  Fixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(grad(fx.prob, fx.wp));
}

void BM_HessApply(benchmark::State& state) {
  Fixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hess_apply(fx.prob, fx.wp, fx.z));
}

void BM_MinHessianEigDense(benchmark::State& state) {
  Fixture fx(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(min_hessian_eig(fx.prob, fx.wp).lambda_min_paper);
}

void BM_MinHessianEigLanczos(benchmark::State& state) {
  Fixture fx(state.range(0));
  HessianEigOptions opts;
  opts.dense_cap = 0;
  for (auto _ : state) benchmark::DoNotOptimize(min_hessian_eig(fx.prob, fx.wp, opts).lambda_min_paper);
}

void BM_Svd(benchmark::State& state) {
  Rng rng(3);
  const Matrix m = normal_matrix(state.range(0), state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(svd(m).singulars);
}

}  // namespace

BENCHMARK(BM_Apply)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK(BM_Adjoint)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK(BM_Grad)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK(BM_HessApply)->Arg(10)->Arg(20)->Arg(40);
BENCHMARK(BM_MinHessianEigDense)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinHessianEigLanczos)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Svd)->Arg(20)->Arg(100)->Arg(300)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
