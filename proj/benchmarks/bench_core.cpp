#include "a2d/oracle.hpp"
#include "a2d/trpo.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace a2d;

namespace {

Mat random_batch(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const nn::Mlp net(40, 4, {64, 64}, nn::Activation::kTanh, 0.01, rng);
  const Mat X = random_batch(rng, 40, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(X));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(2000);

void BM_MlpBackward(benchmark::State& state) {
  Rng rng(2);
  const nn::Mlp net(40, 4, {64, 64}, nn::Activation::kTanh, 0.01, rng);
  const Mat X = random_batch(rng, 40, static_cast<int>(state.range(0)));
  nn::Mlp::Cache cache;
  const Mat out = net.forward(X, &cache);
  const Mat dOut = Mat::Ones(out.rows(), out.cols());
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(cache, dOut));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(2000);

void BM_Occupancy(benchmark::State& state) {
  const oracle::Model model(env::make_pair("frozen_lake"));
  const Mat probs = Mat::Constant(model.num_nodes(), model.num_actions(), 1.0 / model.num_actions());
  for (auto _ : state) benchmark::DoNotOptimize(oracle::occupancy(model, probs));
}
BENCHMARK(BM_Occupancy)->Unit(benchmark::kMicrosecond);

void BM_Rollout(benchmark::State& state) {
  const env::ProcessPair pair = env::make_pair("frozen_lake");
  const env::BehaviorPolicy uniform = [](env::StateId, const env::BeliefWindow&, Rng& rng) {
    return env::ActionChoice{static_cast<int>(uniform01(rng) * env::kNumActions), std::log(0.25), false};
  };
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(env::rollout(pair, uniform, 2000, 1, rng));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMicrosecond);

void BM_TrpoStep(benchmark::State& state) {
  Rng rng(4);
  const nn::CategoricalPolicy base(40, 4, {64, 64}, nn::Activation::kTanh, rng);
  trpo::PolicyBatch batch;
  batch.X = random_batch(rng, 40, 2000);
  const nn::Distribution d = base.forward(batch.X);
  batch.advantages.resize(2000);
  batch.old_logp.resize(2000);
  for (int i = 0; i < 2000; ++i) {
    const int a = sample_categorical(d.probs.col(i), rng);
    batch.actions.push_back(a);
    batch.advantages[i] = 2.0 * uniform01(rng) - 1.0;
    batch.old_logp[i] = d.logp(a, i);
  }
  for (auto _ : state) {
    nn::CategoricalPolicy policy = base;
    benchmark::DoNotOptimize(trpo::trpo_step(policy, batch, trpo::TrustRegionConfig{}));
  }
}
BENCHMARK(BM_TrpoStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
