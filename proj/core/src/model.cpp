#include "hmmgmr/model.hpp"

#include <cmath>
#include <string>

namespace hmmgmr {

namespace {

constexpr double kSumTol = 1e-10;

void check_probability_vector(const Eigen::VectorXd& v, const std::string& label) {
  if (!v.allFinite()) throw DataError(label + ": non-finite entry");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) < 0.0 || v(i) > 1.0 + 1e-12)
      throw DataError(label + ": entry " + std::to_string(i) + " = " + std::to_string(v(i)) +
                      " outside [0,1]");
  }
  const double s = v.sum();
  if (std::abs(s - 1.0) > kSumTol)
    throw DataError(label + ": sums to " + std::to_string(s) + ", expected 1");
}

void check_components(const std::vector<GaussianComponent>& components,
                      const FeatureSchema& schema) {
  if (components.empty()) throw DataError("model: no components");
  if (schema.dim() < 1) throw DataError("model: empty schema");
  for (std::size_t i = 0; i < components.size(); ++i)
    validate_component(components[i], schema.dim(), "component " + std::to_string(i));
}

}  // namespace

void HmmModel::validate() const {
  check_components(components, schema);
  if (pi.size() != k()) throw DataError("model: pi length != component count");
  check_probability_vector(pi, "initial probabilities");
  if (trans.rows() != k() || trans.cols() != k())
    throw DataError("model: transition matrix shape != K x K");
  for (Eigen::Index j = 0; j < trans.rows(); ++j)
    check_probability_vector(trans.row(j), "transition row " + std::to_string(j));
}

void GmmModel::validate() const {
  check_components(components, schema);
  if (weights.size() != k()) throw DataError("model: weight length != component count");
  check_probability_vector(weights, "mixture weights");
}

void regularize_covariance(Eigen::MatrixXd& covariance, double eps_scale) {
  const auto d = covariance.rows();
  covariance = 0.5 * (covariance + covariance.transpose()).eval();
  const double eps = eps_scale * std::max(covariance.trace() / static_cast<double>(d), 1e-3);
  covariance.diagonal().array() += eps;
}

}  // namespace hmmgmr
