#include "hmmgmr/gaussian.hpp"

#include <cmath>
#include <string>

namespace hmmgmr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kSymmetryRelTol = 1e-12;
constexpr double kConditionLimit = 1e12;

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace

void validate_component(const GaussianComponent& g, int expected_dim, const std::string& label) {
  const int d = g.dim();
  if (d < 1) throw DataError(label + ": empty mean");
  if (expected_dim >= 0 && d != expected_dim)
    throw DataError(label + ": dimension " + std::to_string(d) + " != expected " +
                    std::to_string(expected_dim));
  if (g.covariance.rows() != d || g.covariance.cols() != d)
    throw DataError(label + ": covariance shape does not match mean dimension");
  if (!g.mean.allFinite() || !g.covariance.allFinite())
    throw DataError(label + ": non-finite parameter");
  const double scale = g.covariance.cwiseAbs().maxCoeff();
  const double asym = (g.covariance - g.covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryRelTol * std::max(scale, 1.0))
    throw DataError(label + ": covariance not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
  if (llt.info() != Eigen::Success)
    throw DataError(label + ": covariance not positive definite");
}

CholeskyGaussian::CholeskyGaussian(const GaussianComponent& g)
    : CholeskyGaussian(g.mean, g.covariance) {}

CholeskyGaussian::CholeskyGaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance)
    : mean_(std::move(mean)), llt_(covariance) {
  if (covariance.rows() != mean_.size() || covariance.cols() != mean_.size())
    throw DataError("gaussian: covariance shape does not match mean dimension");
  if (llt_.info() != Eigen::Success)
    throw NumericError("gaussian: covariance not positive definite (singular model)");
  log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  log_norm_ = -0.5 * (static_cast<double>(mean_.size()) * kLog2Pi + log_det_);
}

double CholeskyGaussian::logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != mean_.size())
    throw DataError("gaussian: point dimension " + std::to_string(x.size()) +
                    " != component dimension " + std::to_string(mean_.size()));
  // quadratic form via one triangular solve: || L^-1 (x - mu) ||^2
  Eigen::VectorXd u = llt_.matrixL().solve(x - mean_);
  return log_norm_ - 0.5 * u.squaredNorm();
}

double gaussian_logpdf(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianComponent& g) {
  return CholeskyGaussian(g).logpdf(x);
}

GaussianComponent marginal_component(const GaussianComponent& g, const std::vector<int>& indices) {
  for (int i : indices) {
    if (i < 0 || i >= g.dim()) throw DataError("marginal: index out of range");
  }
  return GaussianComponent{gather(g.mean, indices), gather(g.covariance, indices, indices)};
}

GaussianComponent input_marginal(const GaussianComponent& g, const FeatureSchema& schema) {
  if (g.dim() != schema.dim())
    throw DataError("marginal: component dimension does not match schema");
  return marginal_component(g, schema.input_indices());
}

ConditionalGaussian::ConditionalGaussian(const GaussianComponent& g, const FeatureSchema& schema) {
  if (g.dim() != schema.dim())
    throw DataError("conditional: component dimension does not match schema");
  const auto& in = schema.input_indices();
  const auto& out = schema.output_indices();
  if (in.empty()) throw DataError("conditional: schema has no input features");

  mean_in_ = gather(g.mean, in);
  mean_out_ = gather(g.mean, out);
  const Eigen::MatrixXd cov_ii = gather(g.covariance, in, in);
  const Eigen::MatrixXd cov_oi = gather(g.covariance, out, in);
  const Eigen::MatrixXd cov_oo = gather(g.covariance, out, out);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(cov_ii, Eigen::EigenvaluesOnly);
  const double lo = eigs.eigenvalues().minCoeff();
  const double hi = eigs.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionLimit)
    throw NumericError("conditional: input-block covariance near-singular (condition number " +
                       std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                       ")");

  Eigen::LLT<Eigen::MatrixXd> llt(cov_ii);
  if (llt.info() != Eigen::Success)
    throw NumericError("conditional: input-block covariance not positive definite");
  gain_ = llt.solve(cov_oi.transpose()).transpose();  // Sigma^OI (Sigma^II)^-1
  cov_cond_ = cov_oo - gain_ * cov_oi.transpose();
  cov_cond_ = 0.5 * (cov_cond_ + cov_cond_.transpose()).eval();
}

Eigen::VectorXd ConditionalGaussian::conditional_mean(
    const Eigen::Ref<const Eigen::VectorXd>& x_in) const {
  if (x_in.size() != mean_in_.size())
    throw DataError("conditional: input dimension " + std::to_string(x_in.size()) +
                    " != schema input dimension " + std::to_string(mean_in_.size()));
  return mean_out_ + gain_ * (x_in - mean_in_);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> condition_gaussian(
    const GaussianComponent& g, const FeatureSchema& schema,
    const Eigen::Ref<const Eigen::VectorXd>& x_in) {
  ConditionalGaussian cond(g, schema);
  return {cond.conditional_mean(x_in), cond.conditional_covariance()};
}

}  // namespace hmmgmr
