#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "hmmgmr/model.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

// Per-frame internal-state probabilities. h.row(t) sums to 1;
// dominant_state[t] is the argmax (lowest index on ties).
struct BeliefTrajectory {
  Eigen::MatrixXd h;  // T x K
  std::vector<int> dominant_state;
};

// Full per-frame predictive mixture over the output block, not just its
// mean. Component covariances do not depend on the input, so they are stored
// once per component. point_estimate.row(t) is the belief-weighted sum of
// the component conditional means at frame t.
struct PredictiveDistribution {
  Eigen::MatrixXd point_estimate;                      // T x |O|
  Eigen::MatrixXd weights;                             // T x K
  std::vector<Eigen::MatrixXd> component_means;        // K entries of T x |O|
  std::vector<Eigen::MatrixXd> component_covariances;  // K entries of |O| x |O|
};

// One step of the recursive belief update: h_k proportional to
// (sum_m h_prev_m trans(m, k)) * N(x_in | mean_k^I, cov_k^II), computed in
// log space with max-subtraction. Only the input block of each component is
// evaluated; the prediction target never enters the belief.
Eigen::VectorXd belief_update(const HmmModel& model, const Eigen::VectorXd& h_prev,
                              const Eigen::Ref<const Eigen::VectorXd>& x_in);

// Frame-1 boundary: h_k proportional to pi_k * N(x_in | mean_k^I, cov_k^II).
Eigen::VectorXd belief_init(const HmmModel& model,
                            const Eigen::Ref<const Eigen::VectorXd>& x_in);

// Runs the belief recursion over a T x |I| input stream and conditions every
// component on each frame. Beliefs double as mixture weights.
std::pair<BeliefTrajectory, PredictiveDistribution> predict_sequence(
    const HmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

// Static-mixture baseline: weights proportional to w_k * N(x_t^I | ...) per
// frame, no temporal recursion; identical conditional machinery.
std::pair<BeliefTrajectory, PredictiveDistribution> gmm_gmr_predict(
    const GmmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

// Static mixture sharing the HMM's components, weighted by the stationary
// distribution of the transition matrix. A reducible chain (non-unique
// stationary law) falls back to uniform weights with a warning.
GmmModel gmm_from_hmm(const HmmModel& model);

}  // namespace hmmgmr
