#include <benchmark/benchmark.h>

#include <random>

#include "owl/energy.hpp"
#include "owl/eval.hpp"
#include "owl/latent_cluster.hpp"
#include "owl/protocol.hpp"
#include "owl/weibull.hpp"

using namespace owl;

namespace {

cluster::PrototypeSet random_prototypes(std::size_t classes, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 3);
  cluster::PrototypeSet p(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    FeatureVector v(d);
    for (auto& x : v) x = n(rng);
    p.set(static_cast<ClassId>(c), v);
  }
  return p;
}

void BM_ContrastiveLossGrad(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto classes = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const auto p = random_prototypes(classes, d, rng);
  FeatureVector f(d);
  std::normal_distribution<double> n(0, 3);
  for (auto& x : f) x = n(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cluster::contrastive_loss(f, 1, p, 10.0));
    benchmark::DoNotOptimize(cluster::contrastive_loss_grad(f, 1, p, 10.0));
  }
}
BENCHMARK(BM_ContrastiveLossGrad)->Args({8, 11})->Args({32, 21})->Args({256, 81});

void BM_StepClustering(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 3);
  cluster::ClusteringConfig cfg;
  cfg.burn_in = 10;
  cfg.update_period = 50;
  cluster::ClusteringState s(21, cfg);
  FeatureVector f(32);
  ClassId c = 0;
  for (auto _ : state) {
    for (auto& x : f) x = n(rng);
    c = (c + 1) % 21;
    benchmark::DoNotOptimize(cluster::step_clustering(s, f, c));
  }
}
BENCHMARK(BM_StepClustering);

void BM_FreeEnergy(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 5);
  std::vector<double> g(static_cast<std::size_t>(state.range(0)));
  for (auto& x : g) x = n(rng);
  const energy::LogitVector l(g);
  const energy::EnergyConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(energy::free_energy(l, cfg));
}
BENCHMARK(BM_FreeEnergy)->Arg(10)->Arg(80)->Arg(1000);

void BM_WeibullFit(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::weibull_distribution<double> w(1.7, 2.0);
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (auto& x : xs) x = 3.0 + w(rng);
  for (auto _ : state) benchmark::DoNotOptimize(energy::fit_shifted_weibull(xs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WeibullFit)->Arg(100)->Arg(10000);

void BM_EvaluateTask(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 100), conf(0, 1);
  std::uniform_int_distribution<int> label(0, 10);
  eval::EvalSet set;
  for (int c = 1; c <= 10; ++c) set.known_set.push_back(c);
  const auto images = static_cast<ImageId>(state.range(0));
  for (ImageId img = 0; img < images; ++img) {
    for (int k = 0; k < 4; ++k) {
      const boxes::Box b{pos(rng), pos(rng), 8, 8};
      set.ground_truths[img].push_back({b, label(rng)});
      set.detections.push_back({img, boxes::Box{b.cx + 0.5, b.cy, 8, 8}, label(rng), conf(rng)});
      set.detections.push_back({img, boxes::Box{pos(rng), pos(rng), 8, 8}, label(rng), conf(rng)});
    }
  }
  const std::vector<ClassId> prev = {1, 2, 3, 4, 5}, curr = {6, 7, 8, 9, 10};
  const eval::EvalConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate_task(2, set, prev, curr, cfg));
}
BENCHMARK(BM_EvaluateTask)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RunOpenWorld(benchmark::State& state) {
  protocol::RunConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(protocol::run_open_world(cfg));
}
BENCHMARK(BM_RunOpenWorld)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
