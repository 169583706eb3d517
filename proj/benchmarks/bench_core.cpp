#include <benchmark/benchmark.h>

#include <drlyap/dro.hpp>
#include <drlyap/simulate.hpp>
#include <drlyap/training.hpp>

using namespace drlyap;

namespace {

AmbiguitySpec pendulum_samples() {
  AmbiguitySpec s;
  s.radius = 0.01;
  s.epsilon = 0.1;
  Rng rng(1);
  for (int i = 0; i < 5; ++i) {
    Vec xi(2);
    xi << rng.uniform(-0.04, 0.08), rng.normal(0.0, 0.02);
    s.samples.samples.push_back(xi);
  }
  return s;
}

void BM_PointwiseLoss(benchmark::State& state) {
  const UncertainSystem sys = pendulum();
  const int width = static_cast<int>(state.range(0));
  const LyapunovPair pair = make_pair(sys, PairShape{{width, width}, 1, {width, width}}, 0);
  const Mat X = stack_columns(sample_domain(sys, static_cast<int>(state.range(1)), 0.1, 2));
  const AmbiguitySpec spec = pendulum_samples();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dr_pointwise_loss(pair, sys, spec, X));
  }
  state.SetItemsProcessed(state.iterations() * X.cols());
}
BENCHMARK(BM_PointwiseLoss)->Args({16, 3600})->Args({32, 3600})->Args({64, 3600})->Unit(benchmark::kMillisecond);

void BM_NominalLoss(benchmark::State& state) {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{32, 32}, 1, {32, 32}}, 0);
  const Mat X = stack_columns(sample_domain(sys, 3600, 0.1, 2));
  for (auto _ : state) benchmark::DoNotOptimize(nominal_loss(pair, sys, X));
}
BENCHMARK(BM_NominalLoss)->Unit(benchmark::kMillisecond);

void BM_Rk4Pendulum(benchmark::State& state) {
  const UncertainSystem sys = pendulum();
  Vec x(2);
  x << 1.0, 0.5;
  const Vec u = Vec::Constant(1, 2.0);
  const Vec xi = Vec::Constant(2, 0.05);
  for (auto _ : state) {
    x = rk4_step([&](const Vec& z) { return sys.eval_exact(z, u, xi); }, x, 1e-6);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_Rk4Pendulum);

void BM_Cvar(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (auto& x : v) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(cvar(v, 0.1));
}
BENCHMARK(BM_Cvar)->Arg(5)->Arg(100)->Arg(10000);

void BM_Rollout(benchmark::State& state) {
  const UncertainSystem sys = pendulum();
  const LyapunovPair pair = make_pair(sys, PairShape{{32, 32}, 1, {32, 32}}, 0);
  RolloutOptions o;
  Vec x0(2);
  x0 << 3.14, 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(rollout(pair, sys, Vec::Zero(2), x0, o));
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
