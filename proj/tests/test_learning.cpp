#include <doctest.h>

#include <cmath>

#include "hmmgmr/data.hpp"
#include "hmmgmr/learning.hpp"
#include "test_support.hpp"

using namespace hmmgmr;
using test_support::Rng;

namespace {

// three well-separated phases in strict temporal order
std::vector<EventSequence> three_phase_sequences(Rng& rng, int n_seq, int phase_len,
                                                 double noise = 0.3) {
  const auto schema = test_support::schema_for_dim(2);
  const Eigen::Vector2d centers[3] = {{2.0, 2.0}, {8.0, 8.0}, {14.0, 2.0}};
  std::vector<EventSequence> out;
  for (int s = 0; s < n_seq; ++s) {
    Eigen::MatrixXd frames(3 * phase_len, 2);
    for (int t = 0; t < 3 * phase_len; ++t) {
      const int phase = t / phase_len;
      frames(t, 0) = centers[phase](0) + noise * rng.normal();
      frames(t, 1) = centers[phase](1) + noise * rng.normal();
    }
    out.push_back(EventSequence::with_uniform_timestamps("seq" + std::to_string(s), schema,
                                                         std::move(frames)));
  }
  return out;
}

Eigen::VectorXd pooled_mean(std::span<const EventSequence> seqs) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(seqs.front().dim());
  long n = 0;
  for (const auto& s : seqs) {
    sum += s.frames().colwise().sum().transpose();
    n += static_cast<long>(s.length());
  }
  return sum / static_cast<double>(n);
}

Eigen::MatrixXd pooled_covariance(std::span<const EventSequence> seqs) {
  const Eigen::VectorXd mean = pooled_mean(seqs);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(seqs.front().dim(), seqs.front().dim());
  long n = 0;
  for (const auto& s : seqs) {
    for (Eigen::Index t = 0; t < s.length(); ++t) {
      const Eigen::VectorXd x = s.frames().row(t).transpose() - mean;
      sq += x * x.transpose();
      ++n;
    }
  }
  return sq / static_cast<double>(n);
}

}  // namespace

TEST_SUITE("learning") {

TEST_CASE("k_bins with one bin is the global moment fit") {
  Rng rng(1);
  const HmmModel gen = test_support::random_hmm(rng, 2, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 5; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 20, "s" + std::to_string(i)));

  const HmmModel model = init_k_bins(seqs, 1);
  CHECK(model.trans(0, 0) == 1.0);
  CHECK(model.pi(0) == 1.0);
  CHECK((model.components[0].mean - pooled_mean(seqs)).cwiseAbs().maxCoeff() < 1e-12);
  // covariance matches pooled moments up to the ridge
  const Eigen::MatrixXd pooled = pooled_covariance(seqs);
  CHECK((model.components[0].covariance - pooled).cwiseAbs().maxCoeff() <
        1e-5 * pooled.trace());
}

TEST_CASE("degenerate identical frames exercise the covariance floor") {
  const auto schema = test_support::schema_for_dim(2);
  Eigen::MatrixXd frames(4, 2);
  frames << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;
  const std::vector<EventSequence> seqs = {
      EventSequence::with_uniform_timestamps("flat", schema, frames)};

  const HmmModel model = init_k_bins(seqs, 2);
  CHECK((model.components[0].mean - model.components[1].mean).cwiseAbs().maxCoeff() == 0.0);
  // zero sample covariance regularized to a positive definite ridge
  CHECK(model.components[0].covariance(0, 0) > 0.0);
  CHECK_NOTHROW(model.validate());
}

TEST_CASE("sequences shorter than the bin count are an init error") {
  Rng rng(2);
  const HmmModel gen = test_support::random_hmm(rng, 1, 2);
  const std::vector<EventSequence> seqs = {test_support::random_sequence(rng, gen, 3)};
  CHECK_THROWS_AS(init_k_bins(seqs, 4), DataError);
}

TEST_CASE("k_bins recovers phase means on three-phase data") {
  Rng rng(3);
  const auto seqs = three_phase_sequences(rng, 10, 10);
  const HmmModel model = init_k_bins(seqs, 3);
  const Eigen::Vector2d centers[3] = {{2.0, 2.0}, {8.0, 8.0}, {14.0, 2.0}};
  for (int c = 0; c < 3; ++c) {
    const double rel = (model.components[static_cast<std::size_t>(c)].mean -
                        centers[c])
                           .norm() /
                       centers[c].norm();
    CHECK(rel < 0.10);
  }
}

TEST_CASE("k_means centroids land on separated blobs") {
  Rng rng(4);
  const auto schema = test_support::schema_for_dim(2);
  std::vector<EventSequence> seqs;
  for (int s = 0; s < 6; ++s) {
    Eigen::MatrixXd frames(30, 2);
    for (int t = 0; t < 30; ++t) {
      const Eigen::Vector2d center = (t % 2 == 0) ? Eigen::Vector2d(0.0, 0.0)
                                                  : Eigen::Vector2d(10.0, 10.0);
      frames(t, 0) = center(0) + 0.4 * rng.normal();
      frames(t, 1) = center(1) + 0.4 * rng.normal();
    }
    seqs.push_back(EventSequence::with_uniform_timestamps("b" + std::to_string(s), schema,
                                                          std::move(frames)));
  }
  const HmmModel model = init_k_means(seqs, 2, 77);
  // match components to blobs by nearest mean
  const Eigen::Vector2d blob_a(0.0, 0.0);
  const Eigen::Vector2d blob_b(10.0, 10.0);
  const auto& m0 = model.components[0].mean;
  const auto& m1 = model.components[1].mean;
  const auto& near_a = ((m0 - blob_a).norm() < (m1 - blob_a).norm()) ? m0 : m1;
  const auto& near_b = (&near_a == &m0) ? m1 : m0;
  CHECK((near_a - blob_a).norm() < 0.05 * blob_b.norm());
  CHECK((near_b - blob_b).norm() < 0.05 * blob_b.norm());
}

TEST_CASE("same seed gives identical k_means models") {
  Rng rng(5);
  const HmmModel gen = test_support::random_hmm(rng, 3, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 8; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 15, "s" + std::to_string(i)));

  const HmmModel a = init_k_means(seqs, 3, 123);
  const HmmModel b = init_k_means(seqs, 3, 123);
  CHECK((a.pi.array() == b.pi.array()).all());
  CHECK((a.trans.array() == b.trans.array()).all());
  for (int c = 0; c < 3; ++c)
    CHECK((a.components[static_cast<std::size_t>(c)].mean.array() ==
           b.components[static_cast<std::size_t>(c)].mean.array())
              .all());
}

TEST_CASE("single-component fit lands on pooled moments immediately") {
  Rng rng(6);
  const HmmModel gen = test_support::random_hmm(rng, 1, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 4; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 25, "s" + std::to_string(i)));

  TrainingConfig config;
  config.k = 1;
  const auto [model, trace] = fit_hmm(seqs, config);
  CHECK(trace.converged);
  CHECK(trace.iterations_run <= 2);
  CHECK((model.components[0].mean - pooled_mean(seqs)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("EM recovers a well-separated generator") {
  SynthSpec spec;
  spec.features = {"vx_ego", "vy_ego"};
  spec.n_events = 60;
  spec.event_len = 40;
  spec.pi = Eigen::Vector3d(0.6, 0.25, 0.15);
  spec.trans = Eigen::MatrixXd{{0.90, 0.08, 0.02}, {0.05, 0.90, 0.05}, {0.02, 0.08, 0.90}};
  spec.components = {
      GaussianComponent{Eigen::Vector2d(2.0, 2.0), Eigen::Matrix2d::Identity()},
      GaussianComponent{Eigen::Vector2d(8.0, 8.0), Eigen::Matrix2d::Identity()},
      GaussianComponent{Eigen::Vector2d(14.0, 2.0), Eigen::Matrix2d::Identity()},
  };
  const SynthResult synth = synth_corpus(spec, 2024);

  TrainingConfig config;
  config.k = 3;
  config.init = InitMethod::k_means;
  config.seed = 9;
  const auto [model, trace] = fit_hmm(synth.corpus.events, config);
  CHECK(trace.log_likelihood.size() > 1);

  // best label permutation
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> perm = {0, 1, 2};
  std::vector<int> best_perm = perm;
  std::sort(perm.begin(), perm.end());
  do {
    double worst_rel = 0.0;
    for (int c = 0; c < 3; ++c) {
      const auto& truth = spec.components[static_cast<std::size_t>(c)].mean;
      const auto& est = model.components[static_cast<std::size_t>(perm[static_cast<std::size_t>(c)])].mean;
      worst_rel = std::max(worst_rel, (est - truth).norm() / truth.norm());
    }
    if (worst_rel < best) {
      best = worst_rel;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best < 0.05);

  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      CHECK(std::abs(model.trans(best_perm[static_cast<std::size_t>(a)],
                                 best_perm[static_cast<std::size_t>(b)]) -
                     spec.trans(a, b)) < 0.05);
}

TEST_CASE("training trace never decreases") {
  Rng rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    const int k = 1 + rng.uniform_int(3);
    const HmmModel gen = test_support::random_hmm(rng, k, 2);
    std::vector<EventSequence> seqs;
    for (int i = 0; i < 6; ++i)
      seqs.push_back(test_support::random_sequence(rng, gen, 20, "s" + std::to_string(i)));

    TrainingConfig config;
    config.k = k;
    config.init = (trial % 2 == 0) ? InitMethod::k_bins : InitMethod::k_means;
    config.seed = static_cast<std::uint64_t>(trial);
    const auto [model, trace] = fit_hmm(seqs, config);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
      CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-8);
    CHECK_NOTHROW(model.validate());
  }
}

TEST_CASE("permuting the initial model permutes the fitted model") {
  Rng rng(8);
  const HmmModel gen = test_support::random_hmm(rng, 3, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 6; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 20, "s" + std::to_string(i)));

  TrainingConfig config;
  config.k = 3;
  config.max_iters = 15;
  const HmmModel init = init_k_bins(seqs, 3);

  const std::vector<int> perm = {1, 2, 0};
  HmmModel permuted_init;
  permuted_init.schema = init.schema;
  permuted_init.pi.resize(3);
  permuted_init.trans.resize(3, 3);
  permuted_init.components.resize(3);
  for (int a = 0; a < 3; ++a) {
    permuted_init.pi(a) = init.pi(perm[static_cast<std::size_t>(a)]);
    permuted_init.components[static_cast<std::size_t>(a)] =
        init.components[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
    for (int b = 0; b < 3; ++b)
      permuted_init.trans(a, b) =
          init.trans(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
  }

  const auto [fit_a, trace_a] = fit_hmm(seqs, init, config);
  const auto [fit_b, trace_b] = fit_hmm(seqs, permuted_init, config);

  CHECK(trace_a.log_likelihood.back() ==
        doctest::Approx(trace_b.log_likelihood.back()).epsilon(1e-9));
  for (int a = 0; a < 3; ++a) {
    CHECK((fit_b.components[static_cast<std::size_t>(a)].mean -
           fit_a.components[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])].mean)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    for (int b = 0; b < 3; ++b)
      CHECK(std::abs(fit_b.trans(a, b) -
                     fit_a.trans(perm[static_cast<std::size_t>(a)],
                                 perm[static_cast<std::size_t>(b)])) < 1e-9);
  }
}

TEST_CASE("parameter counts by hand") {
  CHECK(bic_param_count(1, 1) == 2);
  CHECK(bic_param_count(3, 4) == 50);
}

TEST_CASE("BIC scan finds the generating component count") {
  SynthSpec spec;
  spec.features = {"vx_ego", "vy_ego"};
  spec.n_events = 60;
  spec.event_len = 40;
  spec.pi = Eigen::Vector3d(0.6, 0.25, 0.15);
  spec.trans = Eigen::MatrixXd{{0.90, 0.08, 0.02}, {0.05, 0.90, 0.05}, {0.02, 0.08, 0.90}};
  spec.components = {
      GaussianComponent{Eigen::Vector2d(2.0, 2.0), Eigen::Matrix2d::Identity()},
      GaussianComponent{Eigen::Vector2d(8.0, 8.0), Eigen::Matrix2d::Identity()},
      GaussianComponent{Eigen::Vector2d(14.0, 2.0), Eigen::Matrix2d::Identity()},
  };
  const SynthResult synth = synth_corpus(spec, 4096);

  TrainingConfig config;
  config.seed = 11;
  const BicScan scan = select_k(synth.corpus.events, {1, 2, 3, 4, 5}, config);
  CHECK(scan.best_k == 3);
  CHECK(scan.n_params[2] == bic_param_count(3, 2));
  CHECK(scan.scores[0] > scan.scores[1]);
  CHECK(scan.scores[1] > scan.scores[2]);
  CHECK(scan.scores[3] > scan.scores[2]);
}

TEST_CASE("single-candidate scan and deterministic duplicates") {
  Rng rng(10);
  const HmmModel gen = test_support::random_hmm(rng, 2, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 6; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 15, "s" + std::to_string(i)));

  TrainingConfig config;
  const BicScan single = select_k(seqs, {1}, config);
  CHECK(single.best_k == 1);

  const BicScan twice = select_k(seqs, {2, 2}, config);
  CHECK(twice.scores[0] == twice.scores[1]);
}

TEST_CASE("an infeasible candidate K is recorded, not fatal") {
  Rng rng(12);
  const HmmModel gen = test_support::random_hmm(rng, 2, 2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 4; ++i)
    seqs.push_back(test_support::random_sequence(rng, gen, 5, "s" + std::to_string(i)));

  test_support::WarningCapture warnings;
  TrainingConfig config;
  const BicScan scan = select_k(seqs, {1, 9}, config);  // 9 bins cannot fit 5 frames
  CHECK(scan.best_k == 1);
  CHECK(std::isinf(scan.scores[1]));
  CHECK(warnings.contains("K=9"));
}

TEST_CASE("mixture EM fits separated blobs and keeps its trace monotone") {
  Rng rng(13);
  const auto seqs = three_phase_sequences(rng, 8, 8);
  TrainingConfig config;
  config.k = 3;
  config.init = InitMethod::k_means;
  config.seed = 3;
  const auto [model, trace] = fit_gmm(seqs, config);
  CHECK(std::abs(model.weights.sum() - 1.0) < 1e-10);
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-8);
  // each phase center should be near some component
  const Eigen::Vector2d centers[3] = {{2.0, 2.0}, {8.0, 8.0}, {14.0, 2.0}};
  for (const auto& center : centers) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : model.components) best = std::min(best, (g.mean - center).norm());
    CHECK(best < 0.5);
  }
}

}  // TEST_SUITE
