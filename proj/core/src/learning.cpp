#include "hmmgmr/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hmmgmr/detail/parallel.hpp"
#include "hmmgmr/detail/random.hpp"
#include "hmmgmr/inference.hpp"

namespace hmmgmr {

namespace {

constexpr double kCollapseFraction = 1e-8;
constexpr double kPiBinSmoothing = 0.01;

std::string k_label(int k) { return "K=" + std::to_string(k); }

const FeatureSchema& common_schema(std::span<const EventSequence> sequences) {
  if (sequences.empty()) throw DataError("training: no sequences");
  const FeatureSchema& schema = sequences.front().schema();
  for (const auto& seq : sequences) {
    if (seq.schema() != schema)
      throw DataError("training: sequence '" + seq.event_id() + "' has a different schema");
  }
  return schema;
}

long total_frames(std::span<const EventSequence> sequences) {
  long n = 0;
  for (const auto& seq : sequences) n += static_cast<long>(seq.length());
  return n;
}

// cluster labels per sequence frame, plus the moments of each cluster
struct ClusterInit {
  std::vector<GaussianComponent> components;
  std::vector<std::vector<int>> labels;
};

GaussianComponent cluster_moments(std::span<const EventSequence> sequences,
                                  const std::vector<std::vector<int>>& labels, int cluster,
                                  int dim, double reg_eps_scale) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(dim, dim);
  long n = 0;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& frames = sequences[s].frames();
    for (std::size_t t = 0; t < labels[s].size(); ++t) {
      if (labels[s][t] != cluster) continue;
      const Eigen::VectorXd x = frames.row(static_cast<Eigen::Index>(t)).transpose();
      sum += x;
      sq.noalias() += x * x.transpose();
      ++n;
    }
  }
  if (n == 0) throw DataError("initialization: cluster " + std::to_string(cluster) + " is empty");
  const Eigen::VectorXd mean = sum / static_cast<double>(n);
  Eigen::MatrixXd cov = sq / static_cast<double>(n) - mean * mean.transpose();
  regularize_covariance(cov, reg_eps_scale);
  return GaussianComponent{mean, cov};
}

Eigen::MatrixXd transition_from_labels(const std::vector<std::vector<int>>& labels, int k) {
  // add-one smoothing keeps every transition reachable for EM
  Eigen::MatrixXd counts = Eigen::MatrixXd::Ones(k, k);
  for (const auto& seq_labels : labels) {
    for (std::size_t t = 1; t < seq_labels.size(); ++t)
      counts(seq_labels[t - 1], seq_labels[t]) += 1.0;
  }
  for (int j = 0; j < k; ++j) counts.row(j) /= counts.row(j).sum();
  return counts;
}

Eigen::VectorXd weights_from_labels(const std::vector<std::vector<int>>& labels, int k) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  long n = 0;
  for (const auto& seq_labels : labels) {
    for (int label : seq_labels) {
      w(label) += 1.0;
      ++n;
    }
  }
  return w / static_cast<double>(n);
}

ClusterInit k_bins_clusters(std::span<const EventSequence> sequences, int k,
                            double reg_eps_scale) {
  const int dim = sequences.front().dim();
  ClusterInit init;
  init.labels.resize(sequences.size());
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    if (seq.length() < k)
      throw DataError("k_bins initialization: sequence '" + seq.event_id() + "' has " +
                      std::to_string(seq.length()) + " frames, fewer than " + k_label(k) +
                      " bins");
    const auto& ts = seq.timestamps_ms();
    const double t0 = static_cast<double>(ts.front());
    const double span = static_cast<double>(ts.back()) - t0 + 1.0;
    init.labels[s].resize(static_cast<std::size_t>(seq.length()));
    for (std::size_t t = 0; t < init.labels[s].size(); ++t) {
      const double frac = (static_cast<double>(ts[t]) - t0) / span;
      init.labels[s][t] = std::min(k - 1, static_cast<int>(frac * k));
    }
  }
  init.components.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
    init.components.push_back(cluster_moments(sequences, init.labels, c, dim, reg_eps_scale));
  return init;
}

ClusterInit k_means_clusters(std::span<const EventSequence> sequences, int k, std::uint64_t seed,
                             double reg_eps_scale) {
  const int dim = sequences.front().dim();
  const long n = total_frames(sequences);
  if (n < k) throw DataError("k_means initialization: fewer frames than clusters");

  Eigen::MatrixXd points(n, dim);
  {
    long row = 0;
    for (const auto& seq : sequences) {
      points.middleRows(row, seq.length()) = seq.frames();
      row += seq.length();
    }
  }

  detail::Rng rng(seed);
  Eigen::MatrixXd centroids(k, dim);
  Eigen::VectorXd min_dist2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());

  // k-means++ seeding
  centroids.row(0) = points.row(rng.uniform_int(static_cast<int>(n)));
  for (int c = 1; c < k; ++c) {
    for (long i = 0; i < n; ++i) {
      const double d2 = (points.row(i) - centroids.row(c - 1)).squaredNorm();
      min_dist2(i) = std::min(min_dist2(i), d2);
    }
    const double total = min_dist2.sum();
    int pick;
    if (total > 0.0) {
      pick = rng.categorical(std::span<const double>(min_dist2.data(),
                                                     static_cast<std::size_t>(n)));
    } else {
      pick = rng.uniform_int(static_cast<int>(n));
    }
    centroids.row(c) = points.row(pick);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  auto assign_all = [&]() {
    bool changed = false;
    for (long i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = (points.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d2 = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    return changed;
  };

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = assign_all();

    // deterministic empty-cluster rule: re-seed from the farthest point
    std::vector<long> counts(static_cast<std::size_t>(k), 0);
    for (long i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(assignment[i])];
    bool reseeded = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      long farthest = 0;
      double far_d2 = -1.0;
      for (long i = 0; i < n; ++i) {
        const double d2 =
            (points.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
        if (d2 > far_d2) {
          far_d2 = d2;
          farthest = i;
        }
      }
      if (far_d2 <= 0.0) break;  // all points coincide with centroids
      centroids.row(c) = points.row(farthest);
      reseeded = true;
    }
    if (reseeded) {
      assign_all();
      changed = true;
    }

    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(dim);
      long cnt = 0;
      for (long i = 0; i < n; ++i) {
        if (assignment[static_cast<std::size_t>(i)] != c) continue;
        sum += points.row(i);
        ++cnt;
      }
      if (cnt > 0) centroids.row(c) = sum / static_cast<double>(cnt);
    }
    if (!changed) break;
  }

  ClusterInit init;
  init.labels.resize(sequences.size());
  {
    long row = 0;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      const auto len = sequences[s].length();
      init.labels[s].assign(assignment.begin() + row, assignment.begin() + row + len);
      row += len;
    }
  }

  const GaussianComponent global{
      points.colwise().mean().transpose(),
      [&] {
        Eigen::MatrixXd cov =
            points.transpose() * points / static_cast<double>(n) -
            points.colwise().mean().transpose() * points.colwise().mean();
        regularize_covariance(cov, reg_eps_scale);
        return cov;
      }()};

  init.components.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const bool present =
        std::any_of(assignment.begin(), assignment.end(), [c](int a) { return a == c; });
    if (present) {
      init.components.push_back(cluster_moments(sequences, init.labels, c, dim, reg_eps_scale));
    } else {
      emit_warning("k_means initialization: cluster " + std::to_string(c) +
                   " stayed empty; falling back to global moments");
      init.components.push_back(GaussianComponent{centroids.row(c).transpose(), global.covariance});
    }
  }
  return init;
}

HmmModel hmm_from_clusters(const ClusterInit& init, const FeatureSchema& schema, int k,
                           bool bins_pi) {
  HmmModel model;
  model.schema = schema;
  model.components = init.components;
  model.trans = transition_from_labels(init.labels, k);
  if (bins_pi) {
    // indicator on bin 1, smoothed
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, kPiBinSmoothing);
    pi(0) += 1.0;
    model.pi = pi / pi.sum();
  } else {
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(k);
    for (const auto& seq_labels : init.labels) pi(seq_labels.front()) += 1.0;
    model.pi = pi / pi.sum();
  }
  model.validate();
  return model;
}

// pooled soft counts of one E-step
struct SuffStats {
  double loglik = 0.0;
  Eigen::VectorXd gamma1;            // K, summed over sequences
  Eigen::MatrixXd xi_sum;            // K x K
  Eigen::VectorXd w;                 // K
  Eigen::MatrixXd wx;                // K x D
  std::vector<Eigen::MatrixXd> wxx;  // K of D x D
  long n_seq = 0;
  long n_frames = 0;

  static SuffStats zero(int k, int d) {
    SuffStats s;
    s.gamma1 = Eigen::VectorXd::Zero(k);
    s.xi_sum = Eigen::MatrixXd::Zero(k, k);
    s.w = Eigen::VectorXd::Zero(k);
    s.wx = Eigen::MatrixXd::Zero(k, d);
    s.wxx.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(d, d));
    return s;
  }

  void absorb(const SuffStats& other) {
    loglik += other.loglik;
    gamma1 += other.gamma1;
    xi_sum += other.xi_sum;
    w += other.w;
    wx += other.wx;
    for (std::size_t i = 0; i < wxx.size(); ++i) wxx[i] += other.wxx[i];
    n_seq += other.n_seq;
    n_frames += other.n_frames;
  }
};

void accumulate_moments(SuffStats& stats, const Eigen::MatrixXd& gamma,
                        const Eigen::MatrixXd& frames) {
  const auto t_len = frames.rows();
  const auto k = gamma.cols();
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Eigen::VectorXd x = frames.row(t).transpose();
    const Eigen::MatrixXd outer = x * x.transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      const double g = gamma(t, c);
      stats.w(c) += g;
      stats.wx.row(c) += g * x.transpose();
      stats.wxx[static_cast<std::size_t>(c)] += g * outer;
    }
  }
  stats.n_frames += static_cast<long>(t_len);
}

SuffStats e_step_hmm(const HmmModel& model, std::span<const EventSequence> sequences) {
  auto per_seq = detail::parallel_map<SuffStats>(
      static_cast<int>(sequences.size()), [&](int i) {
        const auto& seq = sequences[static_cast<std::size_t>(i)];
        ForwardBackwardResult fb = posteriors(model, seq);
        SuffStats s = SuffStats::zero(model.k(), model.dim());
        s.loglik = fb.log_likelihood;
        s.gamma1 = fb.gamma.row(0).transpose();
        for (const auto& slice : fb.xi) s.xi_sum += slice;
        accumulate_moments(s, fb.gamma, seq.frames());
        s.n_seq = 1;
        return s;
      });
  SuffStats total = SuffStats::zero(model.k(), model.dim());
  for (const auto& s : per_seq) total.absorb(s);
  return total;
}

SuffStats e_step_gmm(const GmmModel& model, std::span<const EventSequence> sequences) {
  const Eigen::VectorXd log_w = model.weights.array().log();
  auto per_seq = detail::parallel_map<SuffStats>(
      static_cast<int>(sequences.size()), [&](int i) {
        const auto& seq = sequences[static_cast<std::size_t>(i)];
        std::vector<CholeskyGaussian> evals;
        evals.reserve(model.components.size());
        for (const auto& g : model.components) evals.emplace_back(g);

        const auto t_len = seq.length();
        Eigen::MatrixXd resp(t_len, model.k());
        SuffStats s = SuffStats::zero(model.k(), model.dim());
        for (Eigen::Index t = 0; t < t_len; ++t) {
          const Eigen::VectorXd x = seq.frames().row(t).transpose();
          Eigen::VectorXd lr(model.k());
          for (int c = 0; c < model.k(); ++c)
            lr(c) = log_w(c) + evals[static_cast<std::size_t>(c)].logpdf(x);
          const double shift = lr.maxCoeff();
          if (!std::isfinite(shift))
            throw NumericError("mixture EM: all component densities underflow at frame " +
                               std::to_string(t));
          const Eigen::ArrayXd e = (lr.array() - shift).exp();
          const double norm = e.sum();
          s.loglik += shift + std::log(norm);
          resp.row(t) = (e / norm).transpose();
        }
        accumulate_moments(s, resp, seq.frames());
        s.n_seq = 1;
        return s;
      });
  SuffStats total = SuffStats::zero(model.k(), model.dim());
  for (const auto& s : per_seq) total.absorb(s);
  return total;
}

std::vector<GaussianComponent> moment_update(const std::vector<GaussianComponent>& previous,
                                             const SuffStats& stats, double reg_eps_scale) {
  const int k = static_cast<int>(previous.size());
  const double total_w = stats.w.sum();
  std::vector<GaussianComponent> components;
  components.reserve(previous.size());
  for (int c = 0; c < k; ++c) {
    const double wc = stats.w(c);
    if (wc < kCollapseFraction * total_w) {
      emit_warning("EM: component " + std::to_string(c) +
                   " collapsed (negligible posterior mass); keeping previous parameters");
      GaussianComponent g = previous[static_cast<std::size_t>(c)];
      regularize_covariance(g.covariance, reg_eps_scale);
      components.push_back(std::move(g));
      continue;
    }
    const Eigen::VectorXd mean = stats.wx.row(c).transpose() / wc;
    Eigen::MatrixXd cov =
        stats.wxx[static_cast<std::size_t>(c)] / wc - mean * mean.transpose();
    regularize_covariance(cov, reg_eps_scale);
    components.push_back(GaussianComponent{mean, cov});
  }
  return components;
}

HmmModel m_step_hmm(const HmmModel& previous, const SuffStats& stats, double reg_eps_scale) {
  HmmModel model;
  model.schema = previous.schema;

  Eigen::VectorXd pi = stats.gamma1 / static_cast<double>(stats.n_seq);
  model.pi = pi / pi.sum();

  model.trans.resize(previous.k(), previous.k());
  for (int j = 0; j < previous.k(); ++j) {
    const double row_sum = stats.xi_sum.row(j).sum();
    if (row_sum > 0.0) {
      model.trans.row(j) = stats.xi_sum.row(j) / row_sum;
    } else {
      emit_warning("EM: state " + std::to_string(j) +
                   " received no transition mass; keeping previous row");
      model.trans.row(j) = previous.trans.row(j);
    }
  }

  model.components = moment_update(previous.components, stats, reg_eps_scale);
  return model;
}

template <typename Model, typename EStep, typename MStep>
std::pair<Model, TrainingTrace> em_loop(Model model, const TrainingConfig& config, EStep e_step,
                                        MStep m_step) {
  if (config.max_iters < 1) throw DataError("training: max_iters must be >= 1");
  if (!(config.rel_tol > 0.0)) throw DataError("training: rel_tol must be positive");

  TrainingTrace trace;
  double prev_ll = 0.0;
  for (int iter = 0;; ++iter) {
    const SuffStats stats = e_step(model);
    if (!std::isfinite(stats.loglik))
      throw NumericError("EM: non-finite log-likelihood at iteration " + std::to_string(iter));
    trace.log_likelihood.push_back(stats.loglik);
    if (iter > 0 &&
        stats.loglik - prev_ll < config.rel_tol * std::max(std::abs(prev_ll), 1e-12)) {
      trace.converged = true;
      break;
    }
    prev_ll = stats.loglik;
    if (iter >= config.max_iters) break;
    model = m_step(model, stats);
    model.validate();
    trace.iterations_run = iter + 1;
  }
  return {std::move(model), std::move(trace)};
}

void check_trainable(std::span<const EventSequence> sequences, int k) {
  common_schema(sequences);
  if (k < 1) throw DataError("training: K must be >= 1");
  for (const auto& seq : sequences) {
    if (seq.length() < 2)
      throw DataError("training: sequence '" + seq.event_id() + "' has fewer than 2 frames");
  }
}

}  // namespace

std::string to_string(InitMethod method) {
  return method == InitMethod::k_bins ? "k_bins" : "k_means";
}

InitMethod init_method_from_string(const std::string& name) {
  if (name == "k_bins" || name == "k-bins") return InitMethod::k_bins;
  if (name == "k_means" || name == "k-means") return InitMethod::k_means;
  throw DataError("unknown initialization method '" + name + "'");
}

HmmModel init_k_bins(std::span<const EventSequence> sequences, int k, double reg_eps_scale) {
  const FeatureSchema& schema = common_schema(sequences);
  if (k < 1) throw DataError("initialization: K must be >= 1");
  ClusterInit init = k_bins_clusters(sequences, k, reg_eps_scale);
  return hmm_from_clusters(init, schema, k, /*bins_pi=*/true);
}

HmmModel init_k_means(std::span<const EventSequence> sequences, int k, std::uint64_t seed,
                      double reg_eps_scale) {
  const FeatureSchema& schema = common_schema(sequences);
  if (k < 1) throw DataError("initialization: K must be >= 1");
  ClusterInit init = k_means_clusters(sequences, k, seed, reg_eps_scale);
  return hmm_from_clusters(init, schema, k, /*bins_pi=*/false);
}

std::pair<HmmModel, TrainingTrace> fit_hmm(std::span<const EventSequence> sequences,
                                           const TrainingConfig& config) {
  check_trainable(sequences, config.k);
  HmmModel model = config.init == InitMethod::k_bins
                       ? init_k_bins(sequences, config.k, config.reg_eps_scale)
                       : init_k_means(sequences, config.k, config.seed, config.reg_eps_scale);
  return fit_hmm(sequences, std::move(model), config);
}

std::pair<HmmModel, TrainingTrace> fit_hmm(std::span<const EventSequence> sequences,
                                           HmmModel initial, const TrainingConfig& config) {
  check_trainable(sequences, initial.k());
  initial.validate();
  if (initial.schema != sequences.front().schema())
    throw DataError("training: initial model schema does not match sequences");
  return em_loop(
      std::move(initial), config, [&](const HmmModel& m) { return e_step_hmm(m, sequences); },
      [&](const HmmModel& m, const SuffStats& s) {
        return m_step_hmm(m, s, config.reg_eps_scale);
      });
}

std::pair<GmmModel, TrainingTrace> fit_gmm(std::span<const EventSequence> sequences,
                                           const TrainingConfig& config) {
  check_trainable(sequences, config.k);
  const FeatureSchema& schema = common_schema(sequences);
  ClusterInit init = config.init == InitMethod::k_bins
                         ? k_bins_clusters(sequences, config.k, config.reg_eps_scale)
                         : k_means_clusters(sequences, config.k, config.seed,
                                            config.reg_eps_scale);
  GmmModel model;
  model.schema = schema;
  model.components = std::move(init.components);
  model.weights = weights_from_labels(init.labels, config.k);
  model.validate();

  return em_loop(
      std::move(model), config, [&](const GmmModel& m) { return e_step_gmm(m, sequences); },
      [&](const GmmModel& m, const SuffStats& s) {
        GmmModel next;
        next.schema = m.schema;
        next.weights = s.w / static_cast<double>(s.n_frames);
        next.weights /= next.weights.sum();
        next.components = moment_update(m.components, s, config.reg_eps_scale);
        return next;
      });
}

int bic_param_count(int k, int d) {
  return (k - 1) + k * (k - 1) + k * d + k * d * (d + 1) / 2;
}

std::pair<double, int> bic_score(const HmmModel& model,
                                 std::span<const EventSequence> sequences) {
  common_schema(sequences);
  auto logliks = detail::parallel_map<double>(static_cast<int>(sequences.size()), [&](int i) {
    return forward(model, sequences[static_cast<std::size_t>(i)]).log_likelihood;
  });
  const double total_ll = std::accumulate(logliks.begin(), logliks.end(), 0.0);
  const long t_total = total_frames(sequences);
  const int n_params = bic_param_count(model.k(), model.dim());
  const double score =
      -total_ll + 0.5 * static_cast<double>(n_params) * std::log(static_cast<double>(t_total));
  return {score, n_params};
}

BicScan select_k(std::span<const EventSequence> sequences, const std::vector<int>& k_values,
                 const TrainingConfig& config) {
  if (k_values.empty()) throw DataError("select_k: empty K range");
  common_schema(sequences);
  const int d = sequences.front().dim();

  BicScan scan;
  scan.k_values = k_values;
  double best_score = std::numeric_limits<double>::infinity();
  scan.best_k = 0;
  for (int k : k_values) {
    double score = std::numeric_limits<double>::infinity();
    int n_params = bic_param_count(k, d);
    try {
      TrainingConfig cfg = config;
      cfg.k = k;
      auto [model, trace] = fit_hmm(sequences, cfg);
      std::tie(score, n_params) = bic_score(model, sequences);
    } catch (const std::exception& err) {
      emit_warning("select_k: " + k_label(k) + " failed (" + err.what() +
                   "); recorded with infinite score");
    }
    scan.scores.push_back(score);
    scan.n_params.push_back(n_params);
    if (score < best_score || (score == best_score && scan.best_k != 0 && k < scan.best_k)) {
      best_score = score;
      scan.best_k = k;
    }
  }
  if (scan.best_k == 0) scan.best_k = *std::min_element(k_values.begin(), k_values.end());
  return scan;
}

}  // namespace hmmgmr
