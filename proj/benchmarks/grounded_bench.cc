#include <benchmark/benchmark.h>

#include <vector>

#include "grounded/decoder.h"
#include "grounded/multicut.h"
#include "grounded/raw_video.h"
#include "grounded/rng.h"
#include "grounded/shot_boundary.h"

namespace grounded {
namespace {

std::vector<WeightedEdge> RandomGraph(int n, Rng& rng) {
  std::vector<WeightedEdge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.Bernoulli(0.3)) edges.push_back({u, v, rng.Normal()});
    }
  }
  return edges;
}

void BM_SolveMulticut(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  const std::vector<WeightedEdge> edges = RandomGraph(n, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(SolveMulticut(n, edges));
  }
}
BENCHMARK(BM_SolveMulticut)->Arg(8)->Arg(16)->Arg(32);

void BM_GreedyAdditiveContraction(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(2);
  const std::vector<WeightedEdge> edges = RandomGraph(n, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(GreedyAdditiveContraction(n, edges));
  }
}
BENCHMARK(BM_GreedyAdditiveContraction)->Arg(64)->Arg(256)->Arg(1024);

void BM_JointAttention(benchmark::State& state) {
  const int num_current = static_cast<int>(state.range(0));
  DecoderDims dims;
  dims.vocab = 64;
  Rng rng(3);
  const DecoderParams params = InitDecoderParams(dims, rng);
  auto random_track = [&](int id) {
    Track t;
    t.id = id;
    t.v_head.resize(dims.d_head);
    t.v_body.resize(dims.d_body);
    t.v_stat.resize(dims.d_stat);
    for (Vec* v : {&t.v_head, &t.v_body, &t.v_stat}) {
      for (double& x : *v) x = rng.Normal();
    }
    return t;
  };
  std::vector<Track> tracks;
  for (int i = 0; i < num_current + dims.p_max; ++i) {
    tracks.push_back(random_track(i + 1));
  }
  std::vector<const Track*> current, previous;
  for (int i = 0; i < num_current; ++i) current.push_back(&tracks[i]);
  for (int i = 0; i < dims.p_max; ++i) {
    previous.push_back(&tracks[num_current + i]);
  }
  Vec h(dims.hidden);
  for (double& x : h) x = rng.Normal(0.0, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        JointAttention(params, dims, h, current, previous));
  }
}
BENCHMARK(BM_JointAttention)->Arg(5)->Arg(20)->Arg(kMaxCurrentTracks);

void BM_FrameSignature(benchmark::State& state) {
  Rng rng(4);
  const ShotVideo video = GenerateShotVideo({}, rng);
  const ShotOptions options;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeFrameSignature(video.frames[0], options));
  }
}
BENCHMARK(BM_FrameSignature);

void BM_TransitionCues(benchmark::State& state) {
  Rng rng(5);
  const ShotVideo video = GenerateShotVideo({}, rng);
  const ShotOptions options;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeTransitionCues(video.frames, options));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(video.frames.size()));
}
BENCHMARK(BM_TransitionCues);

}  // namespace
}  // namespace grounded

BENCHMARK_MAIN();
