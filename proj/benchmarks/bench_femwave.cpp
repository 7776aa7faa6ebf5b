// Microbenchmarks for the hot paths: reference-element construction, mesh
// refinement, collection assembly, wavelet construction, transform
// application, and condition-number estimation.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <random>

#include "femwave/assembly.hpp"
#include "femwave/builtin_meshes.hpp"
#include "femwave/mesh.hpp"
#include "femwave/ref_element.hpp"
#include "femwave/spectral.hpp"
#include "femwave/wavelets.hpp"

using namespace femwave;

namespace {

MeshHierarchy make_hierarchy(int levels) {
  MeshHierarchy h{resolve_mesh("square")};
  h.ensure_level(levels);
  return h;
}

void BM_RefElementRebuild(benchmark::State& state) {
  for (auto _ : state) {
    // Rebuild the collection pair from the coefficient tables; the singleton
    // caches this, so benchmark the underlying construction directly.
    auto pair = build_theta_xi();
    benchmark::DoNotOptimize(pair);
  }
}
BENCHMARK(BM_RefElementRebuild);

void BM_Refine(benchmark::State& state) {
  MeshHierarchy h = make_hierarchy(static_cast<int>(state.range(0)));
  const Triangulation& top = h.level(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Triangulation fine = refine(top);
    benchmark::DoNotOptimize(fine);
  }
  state.SetItemsProcessed(state.iterations() * top.triangle_count());
}
BENCHMARK(BM_Refine)->Arg(3)->Arg(5);

void BM_Assemble(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  MeshHierarchy h = make_hierarchy(j + 1);
  const RefElement& re = RefElement::instance();
  for (auto _ : state) {
    GlobalCollection c = assemble(h, j, re.Theta(), "Theta");
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * h.level(j).triangle_count());
}
BENCHMARK(BM_Assemble)->Arg(2)->Arg(4);

void BM_BuildWavelets(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  MeshHierarchy h = make_hierarchy(j + 1);
  for (auto _ : state) {
    WaveletLevel w = build_wavelets(h, j);
    benchmark::DoNotOptimize(w);
  }
}
BENCHMARK(BM_BuildWavelets)->Arg(2)->Arg(4);

void BM_SynthesisApply(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  MeshHierarchy h = make_hierarchy(J);
  MultilevelTransform mt(h, J);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd c(mt.coeff_dim());
  for (int i = 0; i < c.size(); ++i) c[i] = u(rng);
  for (auto _ : state) {
    Eigen::VectorXd x = mt.synthesis(c);
    benchmark::DoNotOptimize(x);
  }
  state.SetItemsProcessed(state.iterations() * mt.coeff_dim());
}
BENCHMARK(BM_SynthesisApply)->Arg(3)->Arg(5);

void BM_AnalysisApply(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  MeshHierarchy h = make_hierarchy(J);
  MultilevelTransform mt(h, J);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(mt.coeff_dim());
  for (int i = 0; i < x.size(); ++i) x[i] = u(rng);
  mt.analysis(x);  // warm the cached factorizations
  for (auto _ : state) {
    Eigen::VectorXd c = mt.analysis(x);
    benchmark::DoNotOptimize(c);
  }
  state.SetItemsProcessed(state.iterations() * mt.coeff_dim());
}
BENCHMARK(BM_AnalysisApply)->Arg(3)->Arg(5);

void BM_ConditionNumber(benchmark::State& state) {
  const int J = static_cast<int>(state.range(0));
  for (auto _ : state) {
    MeshHierarchy h{resolve_mesh("square")};
    CondResult r = wavelet_condition(h, J, NormKind::L2, 1e-6);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_ConditionNumber)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
