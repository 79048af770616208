#include <benchmark/benchmark.h>

#include "../tests/support/model.hpp"

using namespace twophase;
using namespace twophase::testing;

namespace {

Model canonical(int n) { return finite_model(n, rates(1, 1, 1), KernelSpec::constant(1.0)); }

void BM_ResolventFactorizeFull(benchmark::State& state) {
  const auto m = canonical(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(factorize(m.gen, 1.0, Part::full));
}
BENCHMARK(BM_ResolventFactorizeFull)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_ResolventSolveFull(benchmark::State& state) {
  const auto m = canonical(static_cast<int>(state.range(0)));
  const auto r = m.gen.resolvent(1.0, Part::full);
  const auto h = StateVector::sample(m.grid, Coefficient::constant(1.0), Coefficient::constant(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(r->solve(h));
}
BENCHMARK(BM_ResolventSolveFull)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMicrosecond);

void BM_ResolventSolveNoRecruitment(benchmark::State& state) {
  const auto m = canonical(static_cast<int>(state.range(0)));
  const auto r = m.gen.resolvent(1.0, Part::no_recruitment);
  const auto h = StateVector::sample(m.grid, Coefficient::constant(1.0), Coefficient::constant(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(r->solve(h));
}
BENCHMARK(BM_ResolventSolveNoRecruitment)->Arg(200)->Arg(800)->Arg(3200)->Unit(benchmark::kMicrosecond);

void BM_SpectralBoundShiftInvert(benchmark::State& state) {
  const auto m = canonical(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(spectral_bound(m.gen, Part::full));
}
BENCHMARK(BM_SpectralBoundShiftInvert)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_SpectralBoundBlock(benchmark::State& state) {
  const auto m = finite_model(static_cast<int>(state.range(0)), rates(1, 1, 1), KernelSpec::lower_triangle());
  for (auto _ : state) benchmark::DoNotOptimize(spectral_bound(m.gen, Part::full));
}
BENCHMARK(BM_SpectralBoundBlock)->Arg(400)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_ImplicitStep(benchmark::State& state) {
  const auto m = canonical(static_cast<int>(state.range(0)));
  auto u = StateVector::sample(m.grid, Coefficient::indicator(0.0, 0.25), Coefficient::constant(0.0));
  (void)step_implicit(m.gen, u, 1e-3);  // factorization outside the loop
  for (auto _ : state) u = step_implicit(m.gen, u, 1e-3);
}
BENCHMARK(BM_ImplicitStep)->Arg(200)->Arg(800)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
