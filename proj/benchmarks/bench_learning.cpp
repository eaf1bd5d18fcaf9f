#include <benchmark/benchmark.h>

#include "hmmgmr/data.hpp"
#include "hmmgmr/learning.hpp"

namespace {

void BM_FitHmm(benchmark::State& state) {
  hmmgmr::SynthSpec spec = hmmgmr::default_synth_spec();
  spec.n_events = static_cast<int>(state.range(0));
  spec.event_len = 100;
  const auto fixture = hmmgmr::synth_corpus(spec, 7);

  hmmgmr::TrainingConfig config;
  config.k = 3;
  config.max_iters = 5;  // fixed iteration budget isolates per-iteration cost
  config.rel_tol = 1e-300;
  for (auto _ : state) {
    auto [model, trace] = hmmgmr::fit_hmm(fixture.corpus.events, config);
    benchmark::DoNotOptimize(trace.log_likelihood.back());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 100 * 5);
}
BENCHMARK(BM_FitHmm)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_InitKMeans(benchmark::State& state) {
  hmmgmr::SynthSpec spec = hmmgmr::default_synth_spec();
  spec.n_events = static_cast<int>(state.range(0));
  spec.event_len = 100;
  const auto fixture = hmmgmr::synth_corpus(spec, 7);
  for (auto _ : state) {
    auto model = hmmgmr::init_k_means(fixture.corpus.events, 3, 11);
    benchmark::DoNotOptimize(model.pi.data());
  }
}
BENCHMARK(BM_InitKMeans)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
