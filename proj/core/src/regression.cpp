#include "hmmgmr/regression.hpp"

#include <cmath>
#include <string>

#include "hmmgmr/gaussian.hpp"

namespace hmmgmr {

namespace {

std::vector<CholeskyGaussian> input_marginals(const std::vector<GaussianComponent>& components,
                                              const FeatureSchema& schema) {
  if (schema.input_dim() == 0)
    throw DataError("regression: schema has no input features");
  std::vector<CholeskyGaussian> out;
  out.reserve(components.size());
  for (const auto& g : components) out.emplace_back(input_marginal(g, schema));
  return out;
}

Eigen::VectorXd input_log_densities(const std::vector<CholeskyGaussian>& marginals,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_in) {
  Eigen::VectorXd log_n(marginals.size());
  for (std::size_t c = 0; c < marginals.size(); ++c) log_n(c) = marginals[c].logpdf(x_in);
  return log_n;
}

// normalize prior_k * exp(log_n_k) in log space
Eigen::VectorXd weighted_normalize(const Eigen::VectorXd& prior, const Eigen::VectorXd& log_n,
                                   Eigen::Index frame_hint) {
  const Eigen::ArrayXd log_u = prior.array().log() + log_n.array();
  const double shift = log_u.maxCoeff();
  if (!std::isfinite(shift))
    throw NumericError("numerically impossible observation at frame " +
                       std::to_string(frame_hint) + " (all input-marginal densities underflow)");
  const Eigen::ArrayXd u = (log_u - shift).exp();
  return (u / u.sum()).matrix();
}

void check_belief(const HmmModel& model, const Eigen::VectorXd& h_prev) {
  if (h_prev.size() != model.k())
    throw DataError("belief update: belief length does not match K");
  if (std::abs(h_prev.sum() - 1.0) > 1e-8)
    throw DataError("belief update: belief does not sum to 1");
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& h) {
  std::vector<int> out(static_cast<std::size_t>(h.rows()));
  for (Eigen::Index t = 0; t < h.rows(); ++t) {
    Eigen::Index best = 0;
    h.row(t).maxCoeff(&best);
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

template <typename PriorFn>
std::pair<BeliefTrajectory, PredictiveDistribution> run_gmr(
    const std::vector<GaussianComponent>& components, const FeatureSchema& schema,
    const Eigen::Ref<const Eigen::MatrixXd>& inputs, PriorFn prior_at) {
  const auto t_len = inputs.rows();
  const int k = static_cast<int>(components.size());
  if (t_len < 1) throw DataError("regression: empty input stream");
  if (inputs.cols() != schema.input_dim())
    throw DataError("regression: input stream has " + std::to_string(inputs.cols()) +
                    " columns, schema expects " + std::to_string(schema.input_dim()));
  if (!inputs.allFinite()) throw DataError("regression: non-finite input value");

  const auto marginals = input_marginals(components, schema);
  std::vector<ConditionalGaussian> conditionals;
  conditionals.reserve(components.size());
  for (const auto& g : components) conditionals.emplace_back(g, schema);

  BeliefTrajectory beliefs;
  beliefs.h.resize(t_len, k);

  PredictiveDistribution pred;
  const int out_dim = schema.output_dim();
  pred.point_estimate = Eigen::MatrixXd::Zero(t_len, out_dim);
  pred.component_means.assign(static_cast<std::size_t>(k), Eigen::MatrixXd(t_len, out_dim));
  pred.component_covariances.reserve(static_cast<std::size_t>(k));
  for (const auto& cond : conditionals)
    pred.component_covariances.push_back(cond.conditional_covariance());

  Eigen::VectorXd h;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Eigen::VectorXd x_in = inputs.row(t).transpose();
    h = weighted_normalize(prior_at(t, h), input_log_densities(marginals, x_in), t);
    beliefs.h.row(t) = h.transpose();
    for (int c = 0; c < k; ++c) {
      const Eigen::VectorXd mu = conditionals[static_cast<std::size_t>(c)].conditional_mean(x_in);
      pred.component_means[static_cast<std::size_t>(c)].row(t) = mu.transpose();
      pred.point_estimate.row(t) += h(c) * mu.transpose();
    }
  }
  beliefs.dominant_state = argmax_rows(beliefs.h);
  pred.weights = beliefs.h;
  return {std::move(beliefs), std::move(pred)};
}

}  // namespace

Eigen::VectorXd belief_init(const HmmModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x_in) {
  const auto marginals = input_marginals(model.components, model.schema);
  return weighted_normalize(model.pi, input_log_densities(marginals, x_in), 0);
}

Eigen::VectorXd belief_update(const HmmModel& model, const Eigen::VectorXd& h_prev,
                              const Eigen::Ref<const Eigen::VectorXd>& x_in) {
  check_belief(model, h_prev);
  const auto marginals = input_marginals(model.components, model.schema);
  const Eigen::VectorXd prior = model.trans.transpose() * h_prev;
  return weighted_normalize(prior, input_log_densities(marginals, x_in), -1);
}

std::pair<BeliefTrajectory, PredictiveDistribution> predict_sequence(
    const HmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  return run_gmr(model.components, model.schema, inputs,
                 [&](Eigen::Index t, const Eigen::VectorXd& h_prev) -> Eigen::VectorXd {
                   if (t == 0) return model.pi;
                   return model.trans.transpose() * h_prev;
                 });
}

std::pair<BeliefTrajectory, PredictiveDistribution> gmm_gmr_predict(
    const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  return run_gmr(model.components, model.schema, inputs,
                 [&](Eigen::Index, const Eigen::VectorXd&) { return model.weights; });
}

GmmModel gmm_from_hmm(const HmmModel& model) {
  const int k = model.k();
  GmmModel gmm;
  gmm.schema = model.schema;
  gmm.components = model.components;

  Eigen::VectorXd weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  if (k > 1) {
    Eigen::EigenSolver<Eigen::MatrixXd> eigs(model.trans.transpose());
    int unit_count = 0;
    int unit_index = -1;
    for (int i = 0; i < k; ++i) {
      if (std::abs(eigs.eigenvalues()(i) - std::complex<double>(1.0, 0.0)) < 1e-9) {
        ++unit_count;
        unit_index = i;
      }
    }
    if (unit_count != 1) {
      emit_warning("gmm_from_hmm: transition matrix is reducible (stationary distribution not "
                   "unique); using uniform weights");
    } else {
      Eigen::VectorXd v = eigs.eigenvectors().col(unit_index).real();
      if (v.sum() < 0.0) v = -v;
      if (v.minCoeff() < -1e-9 || v.sum() <= 0.0) {
        emit_warning("gmm_from_hmm: stationary eigenvector not a probability vector; using "
                     "uniform weights");
      } else {
        weights = v.cwiseMax(0.0) / v.cwiseMax(0.0).sum();
      }
    }
  }
  gmm.weights = weights;
  gmm.validate();
  return gmm;
}

}  // namespace hmmgmr
