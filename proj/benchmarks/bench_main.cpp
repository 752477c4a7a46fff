#include <benchmark/benchmark.h>

#include <numeric>

#include "gatedgeom/data.hpp"
#include "gatedgeom/evaluation.hpp"
#include "gatedgeom/geometry.hpp"
#include "gatedgeom/training.hpp"
#include "gatedgeom/witnesses.hpp"

using namespace gatedgeom;

namespace {

Vec point(double a, double b) {
  Vec p(2);
  p << a, b;
  return p;
}

void BM_RiemannSphereWitness(benchmark::State& state) {
  const SphereWitness w = build_sphere_witness();
  const MetricField field(w.gated);
  const Vec p = point(0.1, -0.2);
  for (auto _ : state) benchmark::DoNotOptimize(riemann_at(field, p));
}
BENCHMARK(BM_RiemannSphereWitness);

void BM_GaussEquation(benchmark::State& state) {
  const ContentAwareWitness w = build_content_aware_witness();
  const EmbeddingMap e = w.gated_embedding();
  const Vec p = point(0.3, 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(gauss_equation_curvature(e, p));
}
BENCHMARK(BM_GaussEquation);

struct Batch {
  ModelParams params;
  Mat x;
  std::vector<int> labels;
};

Batch make_batch(int d_model) {
  ModelConfig cfg;
  cfg.d_model = d_model;
  cfg.d_hidden = d_model;
  cfg.variant = GateVariant::strength;
  cfg.alpha = 1.0;
  DatasetSpec spec;
  spec.n_train = 128;
  spec.n_test = 1;
  const Dataset data = generate(spec, 0);
  std::vector<std::size_t> idx(data.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  Batch b{init_params(cfg, 0), stack_tokens(data.train, idx), {}};
  for (const auto& s : data.train) b.labels.push_back(s.label);
  return b;
}

void BM_Forward(benchmark::State& state) {
  const Batch b = make_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model_forward_batch(b.x, 8, b.params));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64);

void BM_Backward(benchmark::State& state) {
  const Batch b = make_batch(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(backward(b.x, 8, b.labels, b.params).loss);
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Backward)->Arg(16)->Arg(64);

void BM_MeasureModelCurvature(benchmark::State& state) {
  const Batch b = make_batch(64);
  ProxyConfig proxy;
  proxy.eval_points = static_cast<int>(state.range(0));
  const DatasetSpec spec;
  for (auto _ : state)
    benchmark::DoNotOptimize(measure_model_curvature(b.params, proxy, spec, {2, 4, 8, 12, 20}).iso);
}
BENCHMARK(BM_MeasureModelCurvature)->Arg(16)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
