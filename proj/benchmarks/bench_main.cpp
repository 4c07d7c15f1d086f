#include <benchmark/benchmark.h>

#include <random>

#include "tnfs/clustering.hpp"
#include "tnfs/model.hpp"
#include "tnfs/training.hpp"

using namespace tnfs;

namespace {

std::vector<Vector> inputs(std::size_t t, std::size_t m) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vector> out(t, Vector(m));
  for (auto& v : out) {
    for (auto& e : v) e = n(rng);
  }
  return out;
}

// Classification-sized model: 15 states, 11 inputs, 15 outputs.
void BM_Rollout(benchmark::State& state) {
  const auto rules = static_cast<std::size_t>(state.range(0));
  const TnfsModel m = make_random_model({15, 11, 15}, rules, 1);
  const auto in = inputs(100, 11);
  for (auto _ : state) benchmark::DoNotOptimize(rollout(m, in));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Rollout)->Arg(1)->Arg(4)->Arg(15);

void BM_Gradients(benchmark::State& state) {
  const auto rules = static_cast<std::size_t>(state.range(0));
  const TnfsModel m = make_random_model({15, 11, 15}, rules, 2);
  std::vector<TrainingSequence> data(32);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].inputs = inputs(4, 11);
    data[i].targets = std::vector<Vector>(4, Vector(15, 0.0));
    data[i].targets.back()[i % 15] = 1.0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(m, data));
}
BENCHMARK(BM_Gradients)->Arg(4)->Arg(15);

void BM_Fcm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.3);
  Matrix data(n, 8);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 8; ++j) data(i, j) = 3.0 * static_cast<double>(i % 4 == j % 4) + noise(rng);
  }
  ClusterConfig cfg;
  cfg.cluster_count = 4;
  cfg.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(fcm(data, cfg));
}
BENCHMARK(BM_Fcm)->Arg(256)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
