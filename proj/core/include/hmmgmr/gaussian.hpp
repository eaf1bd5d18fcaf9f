#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "hmmgmr/types.hpp"

namespace hmmgmr {

// One emission distribution: mean vector and full covariance matrix.
struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  int dim() const { return static_cast<int>(mean.size()); }
};

// Throws DataError naming the failing invariant (shape, symmetry within
// 1e-12 relative, positive definiteness). expected_dim < 0 skips the
// dimension check.
void validate_component(const GaussianComponent& g, int expected_dim = -1,
                        const std::string& label = "component");

// Cached triangular factorization of a component for repeated log-density
// evaluation. All densities are computed in log space.
class CholeskyGaussian {
 public:
  explicit CholeskyGaussian(const GaussianComponent& g);
  CholeskyGaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance);

  double logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double log_det_covariance() const { return log_det_; }
  const Eigen::VectorXd& mean() const { return mean_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;  // -(D/2) log(2 pi) - (1/2) log|Sigma|
};

// log N(x | mean, covariance). One-shot form; use CholeskyGaussian when
// evaluating many points against the same component.
double gaussian_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianComponent& g);

// Marginal of a component over a subset of coordinates.
GaussianComponent marginal_component(const GaussianComponent& g, const std::vector<int>& indices);

// Input-block marginal (mean^I, Sigma^II) per the schema split.
GaussianComponent input_marginal(const GaussianComponent& g, const FeatureSchema& schema);

// Conditional of the output block given the input block. The conditional
// mean is affine in the input; the conditional covariance does not depend on
// the input, so both the gain and the covariance are precomputed once.
class ConditionalGaussian {
 public:
  ConditionalGaussian(const GaussianComponent& g, const FeatureSchema& schema);

  Eigen::VectorXd conditional_mean(const Eigen::Ref<const Eigen::VectorXd>& x_in) const;
  const Eigen::MatrixXd& conditional_covariance() const { return cov_cond_; }

 private:
  Eigen::VectorXd mean_in_;
  Eigen::VectorXd mean_out_;
  Eigen::MatrixXd gain_;      // Sigma^OI (Sigma^II)^-1
  Eigen::MatrixXd cov_cond_;  // Sigma^OO - Sigma^OI (Sigma^II)^-1 Sigma^IO
};

// (conditional mean, conditional covariance) of the output block at x_in.
// Throws NumericError when the input block is near-singular (condition
// number above 1e12).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> condition_gaussian(
    const GaussianComponent& g, const FeatureSchema& schema,
    const Eigen::Ref<const Eigen::VectorXd>& x_in);

}  // namespace hmmgmr
