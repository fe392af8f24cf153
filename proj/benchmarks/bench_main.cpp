#include <benchmark/benchmark.h>

#include "awe/evaluation.hpp"
#include "awe/network.hpp"
#include "awe/optim.hpp"
#include "awe/siamese.hpp"

namespace {

using namespace awe;

NetworkConfig bench_config(CellKind cell, int hidden) {
  NetworkConfig c;
  c.cell = cell;
  c.stacked_layers = 2;
  c.fc_layers = 2;
  c.input_dim = 13;
  c.hidden_dim = hidden;
  c.fc_dim = 2 * hidden;
  c.output_dim = 30;
  return c;
}

std::vector<Segment> bench_segments(std::size_t n, int dim, RandomSource& rng) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < n; ++i) {
    Segment s{"w" + std::to_string(i % 8), 50 + static_cast<int>(rng.index(151)), dim, {}};
    s.frames.resize(static_cast<std::size_t>(s.num_frames) * dim);
    for (auto& v : s.frames) v = static_cast<float>(rng.normal());
    out.push_back(std::move(s));
  }
  return out;
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto cell = state.range(0) == 0 ? CellKind::lstm : CellKind::gru;
  const auto config = bench_config(cell, static_cast<int>(state.range(1)));
  RandomSource rng(1);
  const auto params = init_params<float>(config, rng);
  auto grads = zero_params<float>(config);
  const auto segments = bench_segments(32, config.input_dim, rng);
  std::vector<FrameView> views;
  std::vector<int> labels;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    views.push_back(segments[i].view());
    labels.push_back(static_cast<int>(i % 30));
  }
  for (auto _ : state) {
    grads.visit([](auto& t) { t.setZero(); });
    benchmark::DoNotOptimize(
        classifier_batch_loss<float>(params, config, views, labels, Mode::train, &rng, &grads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(segments.size()));
}
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{0, 1}, {32, 64, 128}})->Unit(benchmark::kMillisecond);

void BM_TripletBatch(benchmark::State& state) {
  auto config = bench_config(CellKind::lstm, 64);
  config.head = Head::linear;
  config.output_dim = 32;
  RandomSource rng(2);
  const auto params = init_params<float>(config, rng);
  auto grads = zero_params<float>(config);
  const auto segments = bench_segments(64, config.input_dim, rng);
  std::vector<Triplet> triplets;
  for (std::size_t k = 0; k + 2 < segments.size(); k += 2) triplets.push_back({k, k + 8 < 64 ? k + 8 : k, k + 1});
  for (auto _ : state) {
    grads.visit([](auto& t) { t.setZero(); });
    benchmark::DoNotOptimize(
        triplet_batch_loss<float>(params, config, segments, triplets, 0.4, Mode::train, &rng, &grads).loss);
  }
}
BENCHMARK(BM_TripletBatch)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RandomSource rng(3);
  std::vector<Vec<double>> emb;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    Vec<double> v(32);
    for (int d = 0; d < 32; ++d) v[d] = rng.normal();
    emb.push_back(v);
    labels.push_back("w" + std::to_string(rng.index(n / 10 + 1)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(same_different_ap(emb, labels).ap);
  state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_AveragePrecision)->RangeMultiplier(2)->Range(256, 4096)->Unit(benchmark::kMillisecond)->Complexity();

void BM_NesterovStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> params(n, 1.0f), velocity(n, 0.0f), grads(n, 0.01f);
  for (auto _ : state) {
    nesterov_step<float>(params, velocity, grads, 0.1, 0.9);
    benchmark::ClobberMemory();
  }
  state.SetBytesProcessed(state.iterations() * static_cast<long>(3 * n * sizeof(float)));
}
BENCHMARK(BM_NesterovStep)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
