#include <benchmark/benchmark.h>

#include "hmmgmr/data.hpp"
#include "hmmgmr/regression.hpp"

namespace {

void BM_PredictSequence(benchmark::State& state) {
  hmmgmr::SynthSpec spec = hmmgmr::default_synth_spec();
  spec.n_events = 1;
  spec.event_len = static_cast<int>(state.range(0));
  const auto fixture = hmmgmr::synth_corpus(spec, 3);
  const auto& seq = fixture.corpus.events.front();

  const auto& in_idx = fixture.truth.schema.input_indices();
  Eigen::MatrixXd inputs(seq.length(), static_cast<Eigen::Index>(in_idx.size()));
  for (std::size_t i = 0; i < in_idx.size(); ++i)
    inputs.col(static_cast<Eigen::Index>(i)) = seq.frames().col(in_idx[i]);

  for (auto _ : state) {
    auto [beliefs, pred] = hmmgmr::predict_sequence(fixture.truth, inputs);
    benchmark::DoNotOptimize(pred.point_estimate.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PredictSequence)->Arg(100)->Arg(1000);

}  // namespace
