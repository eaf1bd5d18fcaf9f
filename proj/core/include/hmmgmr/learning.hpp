#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmmgmr/model.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

enum class InitMethod { k_bins, k_means };

std::string to_string(InitMethod method);
InitMethod init_method_from_string(const std::string& name);

struct TrainingConfig {
  int k = 3;
  InitMethod init = InitMethod::k_bins;
  int max_iters = 200;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  double reg_eps_scale = 1e-6;
};

// One log-likelihood entry per E-step; the last entry is the likelihood of
// the returned model. iterations_run counts completed E+M pairs.
struct TrainingTrace {
  std::vector<double> log_likelihood;
  int iterations_run = 0;
  bool converged = false;
};

struct BicScan {
  std::vector<int> k_values;
  std::vector<double> scores;
  std::vector<int> n_params;
  int best_k = 0;
};

// Cuts every sequence into k contiguous equal-duration time bins and fits
// component i from bin i's frames pooled across sequences. The transition
// matrix comes from bin-adjacency counts (add-one smoothed, so left-to-right
// dominance is soft, not structural); pi is an indicator on bin 1 smoothed
// over the rest.
HmmModel init_k_bins(std::span<const EventSequence> sequences, int k,
                     double reg_eps_scale = 1e-6);

// K-means (k-means++ seeding, at most 100 Lloyd iterations, deterministic in
// the seed) over pooled frames. Empty clusters are re-seeded from the point
// farthest from its assigned centroid. pi from cluster shares of first
// frames; transitions from label adjacency with add-one smoothing.
HmmModel init_k_means(std::span<const EventSequence> sequences, int k, std::uint64_t seed,
                      double reg_eps_scale = 1e-6);

// Multi-sequence Baum-Welch. E-step runs per-sequence smoothing in parallel
// with a sequence-ordered (bit-deterministic) reduction; the M-step pools
// soft counts across sequences. Stops when the relative log-likelihood
// improvement drops below rel_tol or after max_iters iterations.
std::pair<HmmModel, TrainingTrace> fit_hmm(std::span<const EventSequence> sequences,
                                           const TrainingConfig& config);

// Same EM loop from a caller-supplied starting model (config.init ignored).
std::pair<HmmModel, TrainingTrace> fit_hmm(std::span<const EventSequence> sequences,
                                           HmmModel initial, const TrainingConfig& config);

// Standard mixture EM over pooled frames (no temporal coupling), sharing the
// initialization machinery: k_bins/k_means clusters give the components and
// the label shares give the starting weights.
std::pair<GmmModel, TrainingTrace> fit_gmm(std::span<const EventSequence> sequences,
                                           const TrainingConfig& config);

// Free parameters of (pi, trans, means, full symmetric covariances).
int bic_param_count(int k, int d);

// (score, n_params): negative pooled log-likelihood plus (n_params / 2) *
// log(total frame count).
std::pair<double, int> bic_score(const HmmModel& model,
                                 std::span<const EventSequence> sequences);

// Trains one model per candidate K (same config and seed policy) and scores
// each. A failed candidate is recorded with an infinite score and a warning
// rather than aborting the scan. Ties break toward smaller K.
BicScan select_k(std::span<const EventSequence> sequences, const std::vector<int>& k_values,
                 const TrainingConfig& config);

}  // namespace hmmgmr
