#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hmmgmr/gaussian.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

// Hidden Markov model with full-covariance Gaussian emissions: initial state
// probabilities, row-stochastic transition matrix (trans(j, k) = p(state k at
// t | state j at t-1)), one component per state.
struct HmmModel {
  Eigen::VectorXd pi;
  Eigen::MatrixXd trans;
  std::vector<GaussianComponent> components;
  FeatureSchema schema;

  int k() const { return static_cast<int>(components.size()); }
  int dim() const { return schema.dim(); }

  // Throws DataError naming the first failing invariant.
  void validate() const;
};

// Static Gaussian mixture over the same schema; weights replace (pi, trans).
struct GmmModel {
  Eigen::VectorXd weights;
  std::vector<GaussianComponent> components;
  FeatureSchema schema;

  int k() const { return static_cast<int>(components.size()); }
  int dim() const { return schema.dim(); }

  void validate() const;
};

// In-place symmetrization plus ridge: eps = eps_scale * max(trace/D, 1e-3).
// The relative term matches the fit's scale; the floor keeps degenerate
// (zero-variance) covariances positive definite.
void regularize_covariance(Eigen::MatrixXd& covariance, double eps_scale);

}  // namespace hmmgmr
