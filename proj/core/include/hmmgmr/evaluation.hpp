#pragma once

#include <string>
#include <vector>

#include "hmmgmr/data.hpp"
#include "hmmgmr/learning.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

// Per-event scores: mse of the prediction, mse of the event's own
// constant-mean baseline, the skill score s_mse = 1 at perfect / 0 at
// baseline / negative below it, and rmse = sqrt(mse). Events whose reference
// has zero variance are excluded with a reason instead of producing an
// undefined score.
struct EventScore {
  std::string event_id;
  double mse = 0.0;
  double mse_ref = 0.0;
  double s_mse = 0.0;
  double rmse = 0.0;
  bool excluded = false;
  std::string exclusion_reason;
};

EventScore score_event(const Eigen::Ref<const Eigen::VectorXd>& predicted,
                       const Eigen::Ref<const Eigen::VectorXd>& reference);

enum class Approach { hmm_gmr, gmm_gmr };
enum class GmmSource { independent_em, from_hmm };

std::string to_string(Approach approach);
std::string to_string(GmmSource source);

struct EvaluationReport {
  FeatureSchema features;
  Approach approach = Approach::hmm_gmr;
  GmmSource gmm_source = GmmSource::independent_em;  // meaningful for gmm_gmr only
  TrainingConfig config;
  std::vector<EventScore> per_event;
  double mean_s_mse = 0.0;
  double mean_rmse = 0.0;
  int n_excluded = 0;
  long total_dominant_switches = 0;  // over scored test events
  bool failed = false;
  std::string failure;

  std::string label() const;
};

// Trains on the corpus train split and scores the test split with the given
// approach; the single output feature is the prediction target.
EvaluationReport evaluate_config(const Corpus& corpus, const FeatureSchema& features,
                                 Approach approach, const TrainingConfig& config,
                                 GmmSource gmm_source = GmmSource::independent_em);

// One report per feature set (all sharing the corpus split and config),
// sorted by mean skill score descending; failed configurations are recorded,
// not fatal.
std::vector<EvaluationReport> run_variable_sweep(const Corpus& corpus,
                                                 const std::vector<FeatureSchema>& feature_sets,
                                                 const TrainingConfig& config);

// The four-way comparison {hmm_gmr, gmm_gmr} x {k_bins, k_means} on
// identical splits and seeds.
std::vector<EvaluationReport> run_approach_comparison(
    const Corpus& corpus, const FeatureSchema& features, const TrainingConfig& config,
    GmmSource gmm_source = GmmSource::independent_em);

// Fixed-width table mirroring the report list (one row per configuration).
std::string format_report_table(const std::vector<EvaluationReport>& reports);
// Machine-readable twins: aggregate rows, and per-event rows of one report.
std::string report_aggregate_csv(const std::vector<EvaluationReport>& reports);
std::string report_events_csv(const EvaluationReport& report);

}  // namespace hmmgmr
