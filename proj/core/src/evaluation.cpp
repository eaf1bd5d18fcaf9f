#include "hmmgmr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hmmgmr/detail/text.hpp"
#include "hmmgmr/regression.hpp"

namespace hmmgmr {

namespace {

using detail::fmt_double;

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

long count_switches(const std::vector<int>& dominant) {
  long switches = 0;
  for (std::size_t t = 1; t < dominant.size(); ++t)
    if (dominant[t] != dominant[t - 1]) ++switches;
  return switches;
}

}  // namespace

EventScore score_event(const Eigen::Ref<const Eigen::VectorXd>& predicted,
                       const Eigen::Ref<const Eigen::VectorXd>& reference) {
  if (predicted.size() != reference.size())
    throw DataError("score_event: prediction and reference lengths differ");
  if (predicted.size() < 1) throw DataError("score_event: empty series");
  if (!predicted.allFinite() || !reference.allFinite())
    throw DataError("score_event: non-finite value");

  const auto t_len = static_cast<double>(reference.size());
  EventScore score;
  score.mse = (predicted - reference).squaredNorm() / t_len;
  const double ref_mean = reference.mean();
  score.mse_ref =
      (Eigen::VectorXd::Constant(reference.size(), ref_mean) - reference).squaredNorm() / t_len;
  score.rmse = std::sqrt(score.mse);
  if (score.mse_ref == 0.0) {
    score.excluded = true;
    score.exclusion_reason = "zero-variance reference (constant-mean baseline undefined)";
    score.s_mse = std::numeric_limits<double>::quiet_NaN();
    return score;
  }
  score.s_mse = (score.mse - score.mse_ref) / (0.0 - score.mse_ref);
  return score;
}

std::string to_string(Approach approach) {
  return approach == Approach::hmm_gmr ? "hmm-gmr" : "gmm-gmr";
}

std::string to_string(GmmSource source) {
  return source == GmmSource::independent_em ? "em" : "from-hmm";
}

std::string EvaluationReport::label() const {
  std::string out = to_string(approach) + "(" + to_string(config.init) + ")";
  out += " " + join(features.input_names(), "+") + "->" + join(features.output_names(), "+");
  return out;
}

EvaluationReport evaluate_config(const Corpus& corpus, const FeatureSchema& features,
                                 Approach approach, const TrainingConfig& config,
                                 GmmSource gmm_source) {
  EvaluationReport report;
  report.features = features;
  report.approach = approach;
  report.gmm_source = gmm_source;
  report.config = config;

  if (!corpus.has_split()) throw DataError("evaluation: corpus has no train/test split");
  if (features.output_dim() != 1)
    throw DataError("evaluation: metrics are defined for a single output feature");

  const Corpus projected = project_features(corpus, features);
  const auto train = projected.train_events();
  const auto test = projected.test_events();
  if (train.empty() || test.empty())
    throw DataError("evaluation: split leaves an empty train or test set");

  const auto& in_idx = features.input_indices();
  const int out_idx = features.output_indices().front();

  auto score_events = [&](auto predict) {
    double s_sum = 0.0;
    double rmse_sum = 0.0;
    long scored = 0;
    for (const auto& seq : test) {
      Eigen::MatrixXd inputs(seq.length(), features.input_dim());
      for (std::size_t i = 0; i < in_idx.size(); ++i)
        inputs.col(static_cast<Eigen::Index>(i)) = seq.frames().col(in_idx[i]);
      const auto [beliefs, pred] = predict(inputs);
      EventScore score = score_event(pred.point_estimate.col(0), seq.frames().col(out_idx));
      score.event_id = seq.event_id();
      if (score.excluded) {
        ++report.n_excluded;
      } else {
        s_sum += score.s_mse;
        rmse_sum += score.rmse;
        ++scored;
        report.total_dominant_switches += count_switches(beliefs.dominant_state);
      }
      report.per_event.push_back(std::move(score));
    }
    if (scored == 0) throw DataError("evaluation: every test event was excluded");
    report.mean_s_mse = s_sum / static_cast<double>(scored);
    report.mean_rmse = rmse_sum / static_cast<double>(scored);
  };

  if (approach == Approach::hmm_gmr) {
    auto [model, trace] = fit_hmm(train, config);
    score_events([&](const Eigen::MatrixXd& inputs) { return predict_sequence(model, inputs); });
  } else {
    GmmModel model;
    if (gmm_source == GmmSource::independent_em) {
      model = fit_gmm(train, config).first;
    } else {
      model = gmm_from_hmm(fit_hmm(train, config).first);
    }
    score_events([&](const Eigen::MatrixXd& inputs) { return gmm_gmr_predict(model, inputs); });
  }
  return report;
}

std::vector<EvaluationReport> run_variable_sweep(const Corpus& corpus,
                                                 const std::vector<FeatureSchema>& feature_sets,
                                                 const TrainingConfig& config) {
  if (feature_sets.empty()) throw DataError("sweep: no feature sets");
  std::vector<EvaluationReport> reports;
  reports.reserve(feature_sets.size());
  for (const auto& features : feature_sets) {
    try {
      reports.push_back(evaluate_config(corpus, features, Approach::hmm_gmr, config));
    } catch (const std::exception& err) {
      emit_warning("sweep: configuration '" + join(features.names(), "+") + "' failed: " +
                   err.what());
      EvaluationReport failed;
      failed.features = features;
      failed.config = config;
      failed.failed = true;
      failed.failure = err.what();
      failed.mean_s_mse = -std::numeric_limits<double>::infinity();
      failed.mean_rmse = std::numeric_limits<double>::infinity();
      reports.push_back(std::move(failed));
    }
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const EvaluationReport& a, const EvaluationReport& b) {
                     return a.mean_s_mse > b.mean_s_mse;
                   });
  return reports;
}

std::vector<EvaluationReport> run_approach_comparison(const Corpus& corpus,
                                                      const FeatureSchema& features,
                                                      const TrainingConfig& config,
                                                      GmmSource gmm_source) {
  std::vector<EvaluationReport> reports;
  for (Approach approach : {Approach::hmm_gmr, Approach::gmm_gmr}) {
    for (InitMethod init : {InitMethod::k_bins, InitMethod::k_means}) {
      TrainingConfig cfg = config;
      cfg.init = init;
      reports.push_back(evaluate_config(corpus, features, approach, cfg, gmm_source));
    }
  }
  return reports;
}

std::string format_report_table(const std::vector<EvaluationReport>& reports) {
  std::size_t label_width = 24;
  for (const auto& r : reports) label_width = std::max(label_width, r.label().size());

  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %10s  %10s  %8s  %9s\n",
                static_cast<int>(label_width), "configuration", "S_MSE_mean", "RMSE_mean",
                "n_events", "n_excl");
  os << buf;
  os << std::string(label_width + 2 + 10 + 2 + 10 + 2 + 8 + 2 + 9, '-') << "\n";
  for (const auto& r : reports) {
    if (r.failed) {
      std::snprintf(buf, sizeof(buf), "%-*s  %10s  %10s  %8s  %9s  FAILED: %s\n",
                    static_cast<int>(label_width), r.label().c_str(), "-", "-", "-", "-",
                    r.failure.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "%-*s  %10.4f  %10.4f  %8zu  %9d\n",
                    static_cast<int>(label_width), r.label().c_str(), r.mean_s_mse, r.mean_rmse,
                    r.per_event.size(), r.n_excluded);
    }
    os << buf;
  }
  return os.str();
}

std::string report_aggregate_csv(const std::vector<EvaluationReport>& reports) {
  std::ostringstream os;
  os << "approach,init,gmm_source,inputs,output,k,seed,s_mse_mean,rmse_mean,n_events,n_excluded,"
        "dominant_switches,failed\n";
  for (const auto& r : reports) {
    os << to_string(r.approach) << "," << to_string(r.config.init) << ","
       << (r.approach == Approach::gmm_gmr ? to_string(r.gmm_source) : "-") << ","
       << join(r.features.input_names(), "+") << "," << join(r.features.output_names(), "+")
       << "," << r.config.k << "," << r.config.seed << ","
       << (r.failed ? "nan" : fmt_double(r.mean_s_mse)) << ","
       << (r.failed ? "nan" : fmt_double(r.mean_rmse)) << "," << r.per_event.size() << ","
       << r.n_excluded << "," << r.total_dominant_switches << "," << (r.failed ? 1 : 0) << "\n";
  }
  return os.str();
}

std::string report_events_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "event_id,mse,mse_ref,s_mse,rmse,excluded,reason\n";
  for (const auto& e : report.per_event) {
    os << e.event_id << "," << fmt_double(e.mse) << "," << fmt_double(e.mse_ref) << ","
       << (e.excluded ? "nan" : fmt_double(e.s_mse)) << "," << fmt_double(e.rmse) << ","
       << (e.excluded ? 1 : 0) << "," << e.exclusion_reason << "\n";
  }
  return os.str();
}

}  // namespace hmmgmr
