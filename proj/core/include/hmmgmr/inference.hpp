#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hmmgmr/model.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

// Scaled forward pass. scaled_alpha rows are the filtered state posteriors
// p(z_t | x_{1:t}); scales(t) is the per-frame predictive likelihood
// p(x_t | x_{1:t-1}), whose logs sum to the sequence log-likelihood.
// log_scales carries the underflow-proof form; scales = exp(log_scales).
struct ForwardResult {
  Eigen::MatrixXd scaled_alpha;  // T x K, rows sum to 1
  Eigen::VectorXd scales;        // T
  Eigen::VectorXd log_scales;    // T
  double log_likelihood = 0.0;
};

// Full smoothing output. xi[t](j, k) = p(z_t = j, z_{t+1} = k | X) for
// t = 0..T-2; each slice sums to 1 and its column sums marginalize to
// gamma.row(t + 1).
struct ForwardBackwardResult {
  double log_likelihood = 0.0;
  Eigen::MatrixXd gamma;             // T x K, rows sum to 1
  std::vector<Eigen::MatrixXd> xi;   // T-1 slices of K x K
  Eigen::MatrixXd scaled_alpha;      // T x K
  Eigen::MatrixXd scaled_beta;       // T x K, last row all ones
  Eigen::VectorXd scales;            // T
  Eigen::VectorXd log_scales;        // T
};

// Per-frame, per-state emission log-densities (T x K).
Eigen::MatrixXd log_emission_matrix(const HmmModel& model, const EventSequence& seq);

ForwardResult forward(const HmmModel& model, const EventSequence& seq);

// Backward pass scaled by the forward scales (log form), so that
// gamma = scaled_alpha .* scaled_beta row-normalized.
Eigen::MatrixXd backward(const HmmModel& model, const EventSequence& seq,
                         const Eigen::VectorXd& log_scales);

ForwardBackwardResult posteriors(const HmmModel& model, const EventSequence& seq);

// Recursion cores decoupled from the Gaussian emission model. Useful for
// abstract emissions and for tests that perturb the emission matrix
// directly.
ForwardResult forward_from_log_emissions(const Eigen::VectorXd& pi, const Eigen::MatrixXd& trans,
                                         const Eigen::MatrixXd& log_emissions);
Eigen::MatrixXd backward_from_log_emissions(const Eigen::MatrixXd& trans,
                                            const Eigen::MatrixXd& log_emissions,
                                            const Eigen::VectorXd& log_scales);
ForwardBackwardResult posteriors_from_log_emissions(const Eigen::VectorXd& pi,
                                                    const Eigen::MatrixXd& trans,
                                                    const Eigen::MatrixXd& log_emissions);

// Brute-force reference: sums the complete-data likelihood over every one of
// the K^T state paths and marginalizes the posteriors directly. Only the
// emission densities are shared with the recursive implementation. Refuses
// state spaces beyond 10^6 paths.
struct EnumerationResult {
  double log_likelihood = 0.0;
  Eigen::MatrixXd gamma;
  std::vector<Eigen::MatrixXd> xi;
};

EnumerationResult enumerate_posteriors(const HmmModel& model, const EventSequence& seq);

}  // namespace hmmgmr
