#include <benchmark/benchmark.h>

#include <random>

#include "eegfest/dataset.hpp"
#include "eegfest/model.hpp"
#include "eegfest/signal.hpp"
#include "eegfest/training.hpp"

using namespace eegfest;

namespace {

EegEpoch make_epoch(std::size_t channels, std::size_t samples) {
  SynthRequest r;
  r.profile = {1.0, 1.0, 2.0, 1.0, 0.5};
  r.channels = channels;
  r.samples_per_channel = samples;
  r.subject_seed = 3;
  r.epoch_seed = 4;
  return synthesize_epoch(r);
}

Episode make_episode(std::size_t channels, std::size_t k) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  auto de = [&] {
    DeFeature d;
    d.channels = channels;
    d.values.resize(kBandCount * channels);
    for (auto& v : d.values) v = n(rng);
    return d;
  };
  Episode ep;
  ep.query = de();
  ep.support.resize(2);
  for (auto& cls : ep.support)
    for (std::size_t i = 0; i < k; ++i) cls.push_back(de());
  ep.support_labels = {ClassLabel::NonDrowsy, ClassLabel::Drowsy};
  ep.query_truth = ClassLabel::Drowsy;
  return ep;
}

void BM_DeFeatures(benchmark::State& state) {
  const EegEpoch e = make_epoch(static_cast<std::size_t>(state.range(0)), 1600);
  for (auto _ : state) benchmark::DoNotOptimize(de_features(e));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DeFeatures)->Arg(1)->Arg(17)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.k_shot = static_cast<std::size_t>(state.range(0));
  const ModelParams params = ModelParams::init(17, cfg);
  const Episode ep = make_episode(17, cfg.k_shot);
  for (auto _ : state) benchmark::DoNotOptimize(forward(ep, cfg, params));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.k_shot = 5;
  const ModelParams params = ModelParams::init(17, cfg);
  const Episode ep = make_episode(17, cfg.k_shot);
  const TrainConfig tc;
  for (auto _ : state) {
    params.zero_grad();
    backward(episode_loss(ep, cfg, tc, params).total);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
