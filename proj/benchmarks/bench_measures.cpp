#include <benchmark/benchmark.h>

#include <vector>

#include "mfclab/measures.hpp"
#include "mfclab/rng.hpp"

namespace {

void bench_w1_sorted(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mfc::CounterRng rng(1, 0);
  std::vector<double> xs(n), ys(n);
  for (auto& x : xs) x = rng.normal();
  for (auto& y : ys) y = 0.3 + rng.normal();
  const auto a = mfc::EmpiricalMeasure::from_1d(xs);
  const auto b = mfc::EmpiricalMeasure::from_1d(ys);
  for (auto _ : state) benchmark::DoNotOptimize(mfc::w1_assignment(a, b));
}
BENCHMARK(bench_w1_sorted)->Arg(1000)->Arg(10000);

void bench_w1_assignment_2d(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mfc::CounterRng rng(2, 0);
  std::vector<double> xs(2 * n), ys(2 * n);
  for (auto& x : xs) x = rng.normal();
  for (auto& y : ys) y = rng.normal();
  const mfc::EmpiricalMeasure a(2, xs), b(2, ys);
  for (auto _ : state) benchmark::DoNotOptimize(mfc::w1_assignment(a, b));
}
BENCHMARK(bench_w1_assignment_2d)->Arg(64)->Arg(128);

void bench_w1_mixture_pair(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mfc::CounterRng rng(3, 0);
  std::vector<double> ca(n), cb(n);
  for (auto& c : ca) c = rng.normal();
  for (auto& c : cb) c = 0.2 + rng.normal();
  const auto a = mfc::GaussianMixture::from_1d(ca, 0.2, 0.0);
  const auto b = mfc::GaussianMixture::from_1d(cb, 0.3, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(mfc::w1_exact_1d(a, b));
}
BENCHMARK(bench_w1_mixture_pair)->Arg(8)->Arg(64);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
