#include "hmmgmr/inference.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hmmgmr {

namespace {

void check_model_sequence(const HmmModel& model, const EventSequence& seq) {
  if (seq.schema() != model.schema)
    throw DataError("inference: sequence schema (" + seq.schema().describe() +
                    ") does not match model schema (" + model.schema.describe() + ")");
}

void check_chain_shapes(const Eigen::VectorXd& pi, const Eigen::MatrixXd& trans,
                        const Eigen::MatrixXd& log_emissions) {
  const auto k = pi.size();
  if (trans.rows() != k || trans.cols() != k)
    throw DataError("inference: transition matrix shape != K x K");
  if (log_emissions.cols() != k)
    throw DataError("inference: emission matrix has " + std::to_string(log_emissions.cols()) +
                    " columns, expected " + std::to_string(k));
  if (log_emissions.rows() < 1) throw DataError("inference: empty sequence");
}

[[noreturn]] void throw_impossible_frame(Eigen::Index t) {
  throw NumericError("numerically impossible observation at frame " + std::to_string(t) +
                     " (all state emission densities underflow)");
}

}  // namespace

Eigen::MatrixXd log_emission_matrix(const HmmModel& model, const EventSequence& seq) {
  check_model_sequence(model, seq);
  const auto t_len = seq.length();
  const int k = model.k();
  std::vector<CholeskyGaussian> evals;
  evals.reserve(model.components.size());
  for (const auto& g : model.components) evals.emplace_back(g);

  Eigen::MatrixXd log_b(t_len, k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Eigen::VectorXd x = seq.frames().row(t).transpose();
    for (int j = 0; j < k; ++j) log_b(t, j) = evals[static_cast<std::size_t>(j)].logpdf(x);
  }
  return log_b;
}

ForwardResult forward_from_log_emissions(const Eigen::VectorXd& pi, const Eigen::MatrixXd& trans,
                                         const Eigen::MatrixXd& log_emissions) {
  check_chain_shapes(pi, trans, log_emissions);
  const auto t_len = log_emissions.rows();
  const auto k = pi.size();

  ForwardResult result;
  result.scaled_alpha.resize(t_len, k);
  result.scales.resize(t_len);
  result.log_scales.resize(t_len);

  Eigen::VectorXd work(k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    // max-shifted emissions keep the per-frame weights in [0, 1]
    const double shift = log_emissions.row(t).maxCoeff();
    if (!std::isfinite(shift)) throw_impossible_frame(t);
    const Eigen::ArrayXd b = (log_emissions.row(t).transpose().array() - shift).exp();

    if (t == 0) {
      work = pi.array() * b;
    } else {
      work = (trans.transpose() * result.scaled_alpha.row(t - 1).transpose()).array() * b;
    }
    const double norm = work.sum();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw_impossible_frame(t);
    result.scaled_alpha.row(t) = work.transpose() / norm;
    result.log_scales(t) = std::log(norm) + shift;
    result.scales(t) = std::exp(result.log_scales(t));
  }
  result.log_likelihood = result.log_scales.sum();
  return result;
}

ForwardResult forward(const HmmModel& model, const EventSequence& seq) {
  return forward_from_log_emissions(model.pi, model.trans, log_emission_matrix(model, seq));
}

Eigen::MatrixXd backward_from_log_emissions(const Eigen::MatrixXd& trans,
                                            const Eigen::MatrixXd& log_emissions,
                                            const Eigen::VectorXd& log_scales) {
  const auto t_len = log_emissions.rows();
  const auto k = trans.rows();
  if (log_scales.size() != t_len)
    throw DataError("inference: scale vector length does not match sequence length");

  Eigen::MatrixXd beta(t_len, k);
  beta.row(t_len - 1).setOnes();
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    // emission-to-scale ratios stay in normal range even when raw densities
    // underflow: exp(log b - log scale) with scale from the same frame
    const Eigen::ArrayXd ratio =
        (log_emissions.row(t + 1).transpose().array() - log_scales(t + 1)).exp();
    beta.row(t) = (trans * (beta.row(t + 1).transpose().array() * ratio).matrix()).transpose();
  }
  return beta;
}

Eigen::MatrixXd backward(const HmmModel& model, const EventSequence& seq,
                         const Eigen::VectorXd& log_scales) {
  return backward_from_log_emissions(model.trans, log_emission_matrix(model, seq), log_scales);
}

ForwardBackwardResult posteriors_from_log_emissions(const Eigen::VectorXd& pi,
                                                    const Eigen::MatrixXd& trans,
                                                    const Eigen::MatrixXd& log_emissions) {
  ForwardResult fwd = forward_from_log_emissions(pi, trans, log_emissions);
  const auto t_len = log_emissions.rows();
  const auto k = pi.size();

  ForwardBackwardResult result;
  result.log_likelihood = fwd.log_likelihood;
  result.scaled_alpha = std::move(fwd.scaled_alpha);
  result.scales = std::move(fwd.scales);
  result.log_scales = std::move(fwd.log_scales);
  result.scaled_beta = backward_from_log_emissions(trans, log_emissions, result.log_scales);

  result.gamma.resize(t_len, k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    Eigen::ArrayXd g =
        result.scaled_alpha.row(t).transpose().array() * result.scaled_beta.row(t).transpose().array();
    const double norm = g.sum();
    if (!(norm > 0.0)) throw_impossible_frame(t);
    result.gamma.row(t) = (g / norm).transpose();
  }

  result.xi.reserve(static_cast<std::size_t>(t_len - 1));
  for (Eigen::Index t = 0; t + 1 < t_len; ++t) {
    const Eigen::ArrayXd ratio =
        (log_emissions.row(t + 1).transpose().array() - result.log_scales(t + 1)).exp();
    const Eigen::VectorXd right =
        (result.scaled_beta.row(t + 1).transpose().array() * ratio).matrix();
    Eigen::MatrixXd slice =
        result.scaled_alpha.row(t).transpose() * right.transpose();  // alpha_j * (b beta)_k
    slice.array() *= trans.array();
    const double norm = slice.sum();
    if (!(norm > 0.0)) throw_impossible_frame(t + 1);
    result.xi.push_back(slice / norm);
  }
  return result;
}

ForwardBackwardResult posteriors(const HmmModel& model, const EventSequence& seq) {
  return posteriors_from_log_emissions(model.pi, model.trans, log_emission_matrix(model, seq));
}

EnumerationResult enumerate_posteriors(const HmmModel& model, const EventSequence& seq) {
  const Eigen::MatrixXd log_b = log_emission_matrix(model, seq);
  const auto t_len = seq.length();
  const int k = model.k();

  double paths = 1.0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    paths *= k;
    if (paths > 1e6)
      throw DataError("enumeration: state space K^T exceeds 10^6 paths");
  }
  const auto n_paths = static_cast<std::int64_t>(paths);

  Eigen::MatrixXd log_trans = model.trans.array().log();
  Eigen::VectorXd log_pi = model.pi.array().log();

  // pass 1: complete-data log-likelihood of every path
  std::vector<double> log_p(static_cast<std::size_t>(n_paths));
  std::vector<int> path(static_cast<std::size_t>(t_len), 0);
  double max_lp = -std::numeric_limits<double>::infinity();
  for (std::int64_t idx = 0;; ++idx) {
    double lp = log_pi(path[0]) + log_b(0, path[0]);
    for (Eigen::Index t = 1; t < t_len; ++t)
      lp += log_trans(path[static_cast<std::size_t>(t - 1)], path[static_cast<std::size_t>(t)]) +
            log_b(t, path[static_cast<std::size_t>(t)]);
    log_p[static_cast<std::size_t>(idx)] = lp;
    max_lp = std::max(max_lp, lp);

    // odometer increment over state indices
    Eigen::Index pos = t_len - 1;
    while (pos >= 0 && ++path[static_cast<std::size_t>(pos)] == k) {
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  if (!std::isfinite(max_lp))
    throw NumericError("enumeration: every state path has zero probability");

  double total = 0.0;
  for (double lp : log_p) total += std::exp(lp - max_lp);
  const double log_likelihood = max_lp + std::log(total);

  // pass 2: marginalize posterior path weights
  EnumerationResult result;
  result.log_likelihood = log_likelihood;
  result.gamma = Eigen::MatrixXd::Zero(t_len, k);
  result.xi.assign(static_cast<std::size_t>(t_len - 1), Eigen::MatrixXd::Zero(k, k));
  std::fill(path.begin(), path.end(), 0);
  for (std::int64_t idx = 0;; ++idx) {
    const double w = std::exp(log_p[static_cast<std::size_t>(idx)] - log_likelihood);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      result.gamma(t, path[static_cast<std::size_t>(t)]) += w;
      if (t + 1 < t_len)
        result.xi[static_cast<std::size_t>(t)](path[static_cast<std::size_t>(t)],
                                               path[static_cast<std::size_t>(t + 1)]) += w;
    }
    Eigen::Index pos = t_len - 1;
    while (pos >= 0 && ++path[static_cast<std::size_t>(pos)] == k) {
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return result;
}

}  // namespace hmmgmr
