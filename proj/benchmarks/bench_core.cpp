#include <cmath>

#include <benchmark/benchmark.h>

#include "uaplab/depth_dynamics.hpp"
#include "uaplab/network.hpp"
#include "uaplab/rate_bounds.hpp"

using namespace uaplab;

namespace {

GridFunction sine() {
  return GridFunction::from_scalar([](double x) { return std::sin(x); });
}

void BM_Ducc(benchmark::State& state) {
  const auto f = sine();
  const auto g = GridFunction::zero(1, 1);
  const int terms = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(d_ucc(f, g, terms, default_ducc_grid()).value);
}
BENCHMARK(BM_Ducc)->Arg(5)->Arg(20);

void BM_Classify(benchmark::State& state) {
  const auto s = builtin_activation("leaky_shifted_paper");
  for (auto _ : state) benchmark::DoNotOptimize(classify(s).kind);
}
BENCHMARK(BM_Classify);

void BM_FitShallow(benchmark::State& state) {
  const auto act = builtin_activation("leaky_shifted_paper");
  const ShallowFitConfig cfg{static_cast<int>(state.range(0)), 4.0, 1, 1e-10, 801};
  for (auto _ : state) benchmark::DoNotOptimize(fit_shallow(sine(), act, cfg).sup_residual);
}
BENCHMARK(BM_FitShallow)->RangeMultiplier(4)->Range(32, 1024)->Unit(benchmark::kMillisecond);

void BM_SimplexFit(benchmark::State& state) {
  const auto sampler = tree_basis();
  std::vector<GridFunction> basis;
  for (int i = 0; i < state.range(0); ++i) basis.push_back(sampler(1, i));
  const auto target = GridFunction::from_scalar([](double x) { return (x > 0 && x < 1) ? 1.0 : 0.0; });
  const auto mu = Measure1D::gaussian();
  for (auto _ : state) benchmark::DoNotOptimize(simplex_fit(basis, target, mu, 2000).residual);
}
BENCHMARK(BM_SimplexFit)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_EscapeTime(benchmark::State& state) {
  const CompositionOperator op(builtin_activation("leaky_shifted_paper"), Vector::Ones(1));
  const double k = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(escape_time(op, k, k));
}
BENCHMARK(BM_EscapeTime)->Arg(2)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
