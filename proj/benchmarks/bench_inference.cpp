#include <benchmark/benchmark.h>

#include "hmmgmr/data.hpp"
#include "hmmgmr/inference.hpp"

namespace {

hmmgmr::SynthResult make_fixture(int k, int event_len) {
  hmmgmr::SynthSpec spec = hmmgmr::default_synth_spec();
  spec.n_events = 2;
  spec.event_len = event_len;
  if (k == 1) {
    spec.pi = Eigen::VectorXd::Ones(1);
    spec.trans = Eigen::MatrixXd::Ones(1, 1);
    spec.components.resize(1);
  }
  return hmmgmr::synth_corpus(spec, 42);
}

void BM_Posteriors(benchmark::State& state) {
  const auto fixture = make_fixture(static_cast<int>(state.range(0)),
                                    static_cast<int>(state.range(1)));
  const auto& seq = fixture.corpus.events.front();
  for (auto _ : state) {
    auto result = hmmgmr::posteriors(fixture.truth, seq);
    benchmark::DoNotOptimize(result.log_likelihood);
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Posteriors)->Args({3, 100})->Args({3, 400})->Args({1, 100});

void BM_EmissionMatrix(benchmark::State& state) {
  const auto fixture = make_fixture(3, static_cast<int>(state.range(0)));
  const auto& seq = fixture.corpus.events.front();
  for (auto _ : state) {
    auto log_b = hmmgmr::log_emission_matrix(fixture.truth, seq);
    benchmark::DoNotOptimize(log_b.data());
  }
}
BENCHMARK(BM_EmissionMatrix)->Arg(100)->Arg(400);

}  // namespace
