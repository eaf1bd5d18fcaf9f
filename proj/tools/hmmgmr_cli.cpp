// Command-line surface for the merge-interaction state library: synthesize or
// ingest corpora, train models, scan component counts, decode belief
// timelines, predict, evaluate, and export per-state feature ranges.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hmmgmr/data.hpp"
#include "hmmgmr/detail/text.hpp"
#include "hmmgmr/evaluation.hpp"
#include "hmmgmr/learning.hpp"
#include "hmmgmr/model_io.hpp"
#include "hmmgmr/regression.hpp"
#include "hmmgmr/version.hpp"

namespace fs = std::filesystem;
using hmmgmr::detail::fmt_double;

namespace {

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  for (const auto& part : hmmgmr::detail::split(list, ',')) {
    const std::string name = hmmgmr::detail::trim(part);
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// audit-trail header carried by every output file; no wall-clock content so
// identical runs produce identical bytes
std::string file_header(const std::string& command, std::uint64_t seed,
                        const std::string& config) {
  std::ostringstream os;
  os << "# hmmgmr " << hmmgmr::kVersion << "\n";
  os << "# command: " << command << "\n";
  os << "# seed: " << seed << "\n";
  os << "# config: " << config << "\n";
  return os.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw hmmgmr::DataError("cannot write file: " + path.string());
  out << content;
}

// inputs named on the command line plus the prediction target
hmmgmr::FeatureSchema schema_from_flags(const hmmgmr::Corpus& corpus,
                                        const std::string& features_flag,
                                        const std::string& output_name) {
  std::vector<std::string> inputs;
  if (features_flag.empty()) {
    for (const auto& name : corpus.schema.names())
      if (name != output_name) inputs.push_back(name);
  } else {
    inputs = split_names(features_flag);
  }
  std::vector<std::string> names = inputs;
  names.push_back(output_name);
  return hmmgmr::FeatureSchema::with_output(std::move(names), {output_name});
}

std::vector<hmmgmr::EventSequence> events_for_split(const hmmgmr::Corpus& corpus,
                                                    const std::string& split) {
  if (split == "all") return corpus.events;
  if (!corpus.has_split())
    throw hmmgmr::DataError("corpus has no manifest.txt; use --split all or add a split");
  if (split == "train") return corpus.train_events();
  if (split == "test") return corpus.test_events();
  throw hmmgmr::DataError("unknown split '" + split + "'");
}

Eigen::MatrixXd input_block(const hmmgmr::EventSequence& seq,
                            const hmmgmr::FeatureSchema& schema) {
  const auto& idx = schema.input_indices();
  Eigen::MatrixXd inputs(seq.length(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    inputs.col(static_cast<Eigen::Index>(i)) = seq.frames().col(idx[i]);
  return inputs;
}

struct LoadedModel {
  std::variant<hmmgmr::HmmModel, hmmgmr::GmmModel> model;

  const hmmgmr::FeatureSchema& schema() const {
    return std::visit([](const auto& m) -> const hmmgmr::FeatureSchema& { return m.schema; },
                      model);
  }
  int k() const {
    return std::visit([](const auto& m) { return m.k(); }, model);
  }
  std::pair<hmmgmr::BeliefTrajectory, hmmgmr::PredictiveDistribution> predict(
      const Eigen::MatrixXd& inputs) const {
    if (const auto* hmm = std::get_if<hmmgmr::HmmModel>(&model))
      return hmmgmr::predict_sequence(*hmm, inputs);
    return hmmgmr::gmm_gmr_predict(std::get<hmmgmr::GmmModel>(model), inputs);
  }
};

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string out;
  int events = 600;
  int len = 100;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  std::string noise_features;
  double noise_sigma = 1.0;
};

void cmd_synth(const SynthArgs& args) {
  hmmgmr::SynthSpec spec = hmmgmr::default_synth_spec();
  spec.n_events = args.events;
  spec.event_len = args.len;
  spec.train_fraction = args.train_fraction;
  spec.noise_features = split_names(args.noise_features);
  spec.noise_sigma = args.noise_sigma;

  const hmmgmr::SynthResult result = hmmgmr::synth_corpus(spec, args.seed);

  std::ostringstream config;
  config << "events=" << args.events << " len=" << args.len
         << " train_fraction=" << fmt_double(args.train_fraction)
         << " noise=" << (spec.noise_features.empty() ? "-" : join(spec.noise_features, "+"));
  const std::string header = file_header("synth", args.seed, config.str());

  const fs::path dir(args.out);
  hmmgmr::save_corpus(dir, result.corpus, {"hmmgmr " + std::string(hmmgmr::kVersion),
                                           "command: synth", "seed: " + std::to_string(args.seed),
                                           "config: " + config.str()});
  hmmgmr::save_model(dir / "truth_model.json", result.truth);
  hmmgmr::save_state_paths(dir / "truth_states.csv", result.corpus, result.state_paths,
                           {"hmmgmr " + std::string(hmmgmr::kVersion), "command: synth",
                            "seed: " + std::to_string(args.seed)});
  std::cout << "wrote " << result.corpus.events.size() << " events to " << dir.string() << "\n";
}

// --------------------------------------------------------------- ingest ----

struct IngestArgs {
  std::string tracks;
  std::string labels;
  std::string out;
  int align_len = 100;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  std::string features = "dv_lead,dx_lag,vx_ego,vy_ego";
};

void cmd_ingest(const IngestArgs& args) {
  const auto tracks = hmmgmr::load_tracks(args.tracks);
  const auto labels = hmmgmr::load_labels(args.labels);
  if (labels.empty()) throw hmmgmr::DataError("label file contains no events");

  const std::vector<std::string> names = split_names(args.features);
  const hmmgmr::FeatureSchema schema = hmmgmr::FeatureSchema::with_output(names);

  std::vector<hmmgmr::EventSequence> events;
  events.reserve(labels.size());
  for (const auto& label : labels) events.push_back(hmmgmr::extract_event(tracks, label, schema));
  events = hmmgmr::align_events(events, args.align_len);

  hmmgmr::Corpus corpus;
  corpus.schema = schema;
  corpus.events = std::move(events);
  if (corpus.events.size() >= 2)
    corpus.split = hmmgmr::split_corpus(corpus, args.train_fraction, args.seed);

  std::ostringstream config;
  config << "tracks=" << fs::path(args.tracks).filename().string()
         << " labels=" << fs::path(args.labels).filename().string()
         << " align_len=" << args.align_len
         << " train_fraction=" << fmt_double(args.train_fraction);
  hmmgmr::save_corpus(fs::path(args.out), corpus,
                      {"hmmgmr " + std::string(hmmgmr::kVersion), "command: ingest",
                       "seed: " + std::to_string(args.seed), "config: " + config.str()});
  std::cout << "ingested " << corpus.events.size() << " events into " << args.out << "\n";
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string features;
  std::string output_feature = "vy_ego";
  std::string model_type = "hmm";
  hmmgmr::TrainingConfig config;
  std::string init = "k_bins";
  bool use_all_events = false;
};

std::string training_config_desc(const hmmgmr::TrainingConfig& config,
                                 const hmmgmr::FeatureSchema& schema) {
  std::ostringstream os;
  os << "k=" << config.k << " init=" << hmmgmr::to_string(config.init)
     << " max_iters=" << config.max_iters << " rel_tol=" << fmt_double(config.rel_tol) << " "
     << schema.describe();
  return os.str();
}

std::string trace_csv(const hmmgmr::TrainingTrace& trace, const std::string& header) {
  std::ostringstream os;
  os << header << "iteration,log_likelihood\n";
  for (std::size_t i = 0; i < trace.log_likelihood.size(); ++i)
    os << i << "," << fmt_double(trace.log_likelihood[i]) << "\n";
  os << "# iterations_run: " << trace.iterations_run << "\n";
  os << "# converged: " << (trace.converged ? "true" : "false") << "\n";
  return os.str();
}

void cmd_train(TrainArgs& args) {
  args.config.init = hmmgmr::init_method_from_string(args.init);
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);
  const hmmgmr::FeatureSchema schema =
      schema_from_flags(corpus, args.features, args.output_feature);
  const hmmgmr::Corpus projected = hmmgmr::project_features(corpus, schema);
  const auto sequences =
      args.use_all_events ? projected.events : events_for_split(projected, "train");
  if (sequences.empty()) throw hmmgmr::DataError("no training events selected");

  const std::string header =
      file_header("train", args.config.seed, training_config_desc(args.config, schema) +
                                                 " model_type=" + args.model_type);
  const fs::path dir(args.out);
  if (args.model_type == "hmm") {
    const auto [model, trace] = hmmgmr::fit_hmm(sequences, args.config);
    hmmgmr::save_model(dir / "model.json", model);
    write_text(dir / "trace.csv", trace_csv(trace, header));
    std::cout << "trained hmm (K=" << model.k() << ") on " << sequences.size()
              << " events; final log-likelihood " << fmt_double(trace.log_likelihood.back())
              << (trace.converged ? " (converged)" : " (iteration cap)") << "\n";
  } else if (args.model_type == "gmm") {
    const auto [model, trace] = hmmgmr::fit_gmm(sequences, args.config);
    hmmgmr::save_model(dir / "model.json", model);
    write_text(dir / "trace.csv", trace_csv(trace, header));
    std::cout << "trained gmm (K=" << model.k() << ") on " << sequences.size()
              << " events; final log-likelihood " << fmt_double(trace.log_likelihood.back())
              << (trace.converged ? " (converged)" : " (iteration cap)") << "\n";
  } else {
    throw CLI::ValidationError("--model-type must be hmm or gmm");
  }
}

// ------------------------------------------------------------- select-k ----

struct SelectKArgs {
  std::string corpus;
  std::string out;
  std::string features;
  std::string output_feature = "vy_ego";
  int k_min = 1;
  int k_max = 8;
  hmmgmr::TrainingConfig config;
  std::string init = "k_bins";
  bool use_all_events = false;
};

void cmd_select_k(SelectKArgs& args) {
  args.config.init = hmmgmr::init_method_from_string(args.init);
  if (args.k_min < 1 || args.k_max < args.k_min)
    throw CLI::ValidationError("--k-min/--k-max must satisfy 1 <= k-min <= k-max");
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);
  const hmmgmr::FeatureSchema schema =
      schema_from_flags(corpus, args.features, args.output_feature);
  const hmmgmr::Corpus projected = hmmgmr::project_features(corpus, schema);
  const auto sequences =
      args.use_all_events ? projected.events : events_for_split(projected, "train");

  std::vector<int> k_values;
  for (int k = args.k_min; k <= args.k_max; ++k) k_values.push_back(k);
  const hmmgmr::BicScan scan = hmmgmr::select_k(sequences, k_values, args.config);

  const std::string header = file_header(
      "select-k", args.config.seed,
      training_config_desc(args.config, schema) + " range=" + std::to_string(args.k_min) + ".." +
          std::to_string(args.k_max));

  std::ostringstream txt;
  txt << header;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%4s  %8s  %14s  %s\n", "K", "n_params", "bic_score", "best");
  txt << buf;
  for (std::size_t i = 0; i < scan.k_values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%4d  %8d  %14.4f  %s\n", scan.k_values[i], scan.n_params[i],
                  scan.scores[i], scan.k_values[i] == scan.best_k ? "*" : "");
    txt << buf;
  }
  write_text(fs::path(args.out) / "bic.txt", txt.str());

  std::ostringstream csv;
  csv << header << "k,n_params,bic_score,best\n";
  for (std::size_t i = 0; i < scan.k_values.size(); ++i)
    csv << scan.k_values[i] << "," << scan.n_params[i] << "," << fmt_double(scan.scores[i]) << ","
        << (scan.k_values[i] == scan.best_k ? 1 : 0) << "\n";
  write_text(fs::path(args.out) / "bic.csv", csv.str());

  std::cout << "best K = " << scan.best_k << "\n";
}

// --------------------------------------------------------------- decode ----

struct DecodeArgs {
  std::string model;
  std::string corpus;
  std::string event;
  std::string out;
};

void cmd_decode(const DecodeArgs& args) {
  LoadedModel loaded{hmmgmr::load_model(args.model)};
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);
  const hmmgmr::EventSequence* event = corpus.find_event(args.event);
  if (!event) throw hmmgmr::DataError("event '" + args.event + "' not found in corpus");

  const hmmgmr::EventSequence projected = hmmgmr::project_features(*event, loaded.schema());
  const auto [beliefs, pred] = loaded.predict(input_block(projected, loaded.schema()));

  const std::string header =
      file_header("decode", 0, "event=" + args.event + " model=" + fs::path(args.model).filename().string());
  const int k = loaded.k();

  std::ostringstream csv;
  csv << header << "frame,timestamp_ms";
  for (int c = 1; c <= k; ++c) csv << ",h_" << c;
  csv << ",row_sum,dominant_state\n";
  for (Eigen::Index t = 0; t < beliefs.h.rows(); ++t) {
    csv << t << "," << projected.timestamps_ms()[static_cast<std::size_t>(t)];
    for (int c = 0; c < k; ++c) csv << "," << fmt_double(beliefs.h(t, c));
    csv << "," << fmt_double(beliefs.h.row(t).sum()) << ","
        << beliefs.dominant_state[static_cast<std::size_t>(t)] + 1 << "\n";
  }
  write_text(fs::path(args.out) / ("decode_" + args.event + ".csv"), csv.str());

  std::ostringstream txt;
  txt << header;
  txt << "frame  timestamp_ms";
  for (int c = 1; c <= k; ++c) txt << "       h_" << c;
  txt << "   row_sum  state\n";
  char buf[64];
  for (Eigen::Index t = 0; t < beliefs.h.rows(); ++t) {
    std::snprintf(buf, sizeof(buf), "%5lld  %12lld", static_cast<long long>(t),
                  static_cast<long long>(projected.timestamps_ms()[static_cast<std::size_t>(t)]));
    txt << buf;
    for (int c = 0; c < k; ++c) {
      std::snprintf(buf, sizeof(buf), "  %8.6f", beliefs.h(t, c));
      txt << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %8.6f  %5d\n", beliefs.h.row(t).sum(),
                  beliefs.dominant_state[static_cast<std::size_t>(t)] + 1);
    txt << buf;
  }
  write_text(fs::path(args.out) / ("decode_" + args.event + ".txt"), txt.str());

  std::cout << "decoded " << beliefs.h.rows() << " frames of " << args.event << "\n";
}

// -------------------------------------------------------------- predict ----

struct PredictArgs {
  std::string model;
  std::string corpus;
  std::string out;
  std::string events;
  std::string split = "test";
};

void cmd_predict(const PredictArgs& args) {
  LoadedModel loaded{hmmgmr::load_model(args.model)};
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);

  std::vector<hmmgmr::EventSequence> selected;
  if (!args.events.empty()) {
    for (const auto& id : split_names(args.events)) {
      const hmmgmr::EventSequence* event = corpus.find_event(id);
      if (!event) throw hmmgmr::DataError("event '" + id + "' not found in corpus");
      selected.push_back(*event);
    }
  } else {
    selected = events_for_split(corpus, args.split);
  }
  if (selected.empty()) throw hmmgmr::DataError("no events selected for prediction");

  const auto& schema = loaded.schema();
  const auto output_names = schema.output_names();
  const int k = loaded.k();

  for (const auto& raw : selected) {
    const hmmgmr::EventSequence event = hmmgmr::project_features(raw, schema);
    const auto [beliefs, pred] = loaded.predict(input_block(event, schema));

    std::ostringstream csv;
    csv << file_header("predict", 0,
                       "event=" + event.event_id() + " model=" +
                           fs::path(args.model).filename().string());
    // conditional covariances are input-independent; record them once
    for (int c = 0; c < k; ++c) {
      csv << "# sigma_hat_" << c + 1 << ":";
      const auto& cov = pred.component_covariances[static_cast<std::size_t>(c)];
      for (Eigen::Index r = 0; r < cov.rows(); ++r)
        for (Eigen::Index s = 0; s < cov.cols(); ++s) csv << " " << fmt_double(cov(r, s));
      csv << "\n";
    }
    csv << "frame,timestamp_ms";
    for (const auto& name : output_names) csv << ",pred_" << name;
    for (const auto& name : output_names) csv << ",ref_" << name;
    for (int c = 1; c <= k; ++c) csv << ",h_" << c;
    for (int c = 1; c <= k; ++c)
      for (const auto& name : output_names) csv << ",mu_hat_" << c << "_" << name;
    csv << "\n";

    const auto& out_idx = schema.output_indices();
    for (Eigen::Index t = 0; t < event.length(); ++t) {
      csv << t << "," << event.timestamps_ms()[static_cast<std::size_t>(t)];
      for (int o = 0; o < schema.output_dim(); ++o) csv << "," << fmt_double(pred.point_estimate(t, o));
      for (int o = 0; o < schema.output_dim(); ++o)
        csv << "," << fmt_double(event.frames()(t, out_idx[static_cast<std::size_t>(o)]));
      for (int c = 0; c < k; ++c) csv << "," << fmt_double(beliefs.h(t, c));
      for (int c = 0; c < k; ++c)
        for (int o = 0; o < schema.output_dim(); ++o)
          csv << "," << fmt_double(pred.component_means[static_cast<std::size_t>(c)](t, o));
      csv << "\n";
    }
    write_text(fs::path(args.out) / ("pred_" + event.event_id() + ".csv"), csv.str());
  }
  std::cout << "wrote predictions for " << selected.size() << " events\n";
}

// ------------------------------------------------------------- evaluate ----

struct EvaluateArgs {
  std::string corpus;
  std::string out;
  std::string features;
  std::string output_feature = "vy_ego";
  std::string feature_sets;
  bool comparison = false;
  std::string gmm_source = "em";
  hmmgmr::TrainingConfig config;
  std::string init = "k_bins";
  bool per_event = false;
};

void cmd_evaluate(EvaluateArgs& args) {
  args.config.init = hmmgmr::init_method_from_string(args.init);
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);
  const hmmgmr::GmmSource source = args.gmm_source == "from-hmm"
                                       ? hmmgmr::GmmSource::from_hmm
                                       : hmmgmr::GmmSource::independent_em;
  const fs::path dir(args.out);
  const bool run_sweep = !args.feature_sets.empty();
  if (!run_sweep) args.comparison = true;  // default protocol

  auto emit = [&](const std::string& stem, const std::vector<hmmgmr::EvaluationReport>& reports,
                  const std::string& config_desc) {
    const std::string header = file_header("evaluate", args.config.seed, config_desc);
    write_text(dir / (stem + ".txt"), header + hmmgmr::format_report_table(reports));
    write_text(dir / (stem + ".csv"), header + hmmgmr::report_aggregate_csv(reports));
    if (args.per_event) {
      for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].failed) continue;
        write_text(dir / (stem + "_events_" + std::to_string(i) + ".csv"),
                   header + hmmgmr::report_events_csv(reports[i]));
      }
    }
  };

  if (run_sweep) {
    std::vector<hmmgmr::FeatureSchema> sets;
    for (const auto& set : hmmgmr::detail::split(args.feature_sets, ';')) {
      std::vector<std::string> names = split_names(set);
      if (names.empty()) continue;
      names.push_back(args.output_feature);
      sets.push_back(hmmgmr::FeatureSchema::with_output(std::move(names), {args.output_feature}));
    }
    if (sets.empty()) throw CLI::ValidationError("--feature-sets parsed to nothing");
    const auto reports = hmmgmr::run_variable_sweep(corpus, sets, args.config);
    emit("table_variables", reports,
         "variable sweep, k=" + std::to_string(args.config.k) + " init=" +
             hmmgmr::to_string(args.config.init));
  }

  if (args.comparison) {
    const hmmgmr::FeatureSchema schema =
        schema_from_flags(corpus, args.features, args.output_feature);
    const auto reports = hmmgmr::run_approach_comparison(corpus, schema, args.config, source);
    emit("table_approaches", reports,
         "approach comparison, k=" + std::to_string(args.config.k) + " gmm_source=" +
             hmmgmr::to_string(source) + " " + schema.describe());
  }
  std::cout << "evaluation tables written to " << dir.string() << "\n";
}

// ---------------------------------------------------------- state-ranges ----

struct StateRangesArgs {
  std::string model;
  std::string corpus;
  std::string out;
  std::string split = "all";
};

void cmd_state_ranges(const StateRangesArgs& args) {
  LoadedModel loaded{hmmgmr::load_model(args.model)};
  const hmmgmr::Corpus corpus = hmmgmr::load_corpus(args.corpus);
  const auto events = events_for_split(corpus, args.split);
  if (events.empty()) throw hmmgmr::DataError("no events selected");

  const auto& schema = loaded.schema();
  const int k = loaded.k();
  const auto input_names = schema.input_names();
  const auto n_inputs = static_cast<int>(input_names.size());

  Eigen::MatrixXd lo = Eigen::MatrixXd::Constant(k, n_inputs,
                                                 std::numeric_limits<double>::infinity());
  Eigen::MatrixXd hi = -lo;
  std::vector<long> frames_per_state(static_cast<std::size_t>(k), 0);

  for (const auto& raw : events) {
    const hmmgmr::EventSequence event = hmmgmr::project_features(raw, schema);
    const Eigen::MatrixXd inputs = input_block(event, schema);
    const auto [beliefs, pred] = loaded.predict(inputs);
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
      const int state = beliefs.dominant_state[static_cast<std::size_t>(t)];
      ++frames_per_state[static_cast<std::size_t>(state)];
      for (int f = 0; f < n_inputs; ++f) {
        lo(state, f) = std::min(lo(state, f), inputs(t, f));
        hi(state, f) = std::max(hi(state, f), inputs(t, f));
      }
    }
  }

  const std::string header = file_header(
      "state-ranges", 0, "model=" + fs::path(args.model).filename().string() + " split=" +
                             args.split + " events=" + std::to_string(events.size()));

  std::ostringstream txt;
  txt << header;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-10s", "feature");
  txt << buf;
  for (int c = 1; c <= k; ++c) {
    std::snprintf(buf, sizeof(buf), "  %-22s", ("state " + std::to_string(c)).c_str());
    txt << buf;
  }
  txt << "\n";
  for (int f = 0; f < n_inputs; ++f) {
    std::snprintf(buf, sizeof(buf), "%-10s", input_names[static_cast<std::size_t>(f)].c_str());
    txt << buf;
    for (int c = 0; c < k; ++c) {
      if (frames_per_state[static_cast<std::size_t>(c)] == 0) {
        std::snprintf(buf, sizeof(buf), "  %-22s", "unvisited");
      } else {
        std::snprintf(buf, sizeof(buf), "  [%9.3f, %9.3f]", lo(c, f), hi(c, f));
      }
      txt << buf;
    }
    txt << "\n";
  }
  write_text(fs::path(args.out) / "state_ranges.txt", txt.str());

  std::ostringstream csv;
  csv << header << "state,feature,min,max,frames,visited\n";
  for (int c = 0; c < k; ++c) {
    for (int f = 0; f < n_inputs; ++f) {
      const bool visited = frames_per_state[static_cast<std::size_t>(c)] > 0;
      csv << c + 1 << "," << input_names[static_cast<std::size_t>(f)] << ","
          << (visited ? fmt_double(lo(c, f)) : "") << ","
          << (visited ? fmt_double(hi(c, f)) : "") << ","
          << frames_per_state[static_cast<std::size_t>(c)] << "," << (visited ? 1 : 0) << "\n";
    }
  }
  write_text(fs::path(args.out) / "state_ranges.csv", csv.str());

  std::cout << "state ranges over " << events.size() << " events written\n";
}

void add_training_flags(CLI::App* cmd, hmmgmr::TrainingConfig& config, std::string& init) {
  cmd->add_option("--k", config.k, "component count")->check(CLI::PositiveNumber);
  cmd->add_option("--init", init, "initialization: k_bins | k_means")
      ->check(CLI::IsMember({"k_bins", "k_means"}));
  cmd->add_option("--seed", config.seed, "RNG seed");
  cmd->add_option("--max-iters", config.max_iters, "EM iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--rel-tol", config.rel_tol, "relative log-likelihood stopping tolerance");
  cmd->add_option("--reg-eps", config.reg_eps_scale, "covariance ridge scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interpretable internal states of highway on-ramp merges (HMM-GMR)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hmmgmr::kVersion));
  app.set_config("--config", "", "read options from an INI file (flags override)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic merge corpus");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--events", synth.events, "event count")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--len", synth.len, "frames per event")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");
  synth_cmd->add_option("--train-fraction", synth.train_fraction, "train split fraction");
  synth_cmd->add_option("--noise-features", synth.noise_features,
                        "comma-separated pure-noise channels to append");
  synth_cmd->add_option("--noise-sigma", synth.noise_sigma, "noise channel std dev");

  IngestArgs ingest;
  auto* ingest_cmd =
      app.add_subcommand("ingest", "extract merge events from track recordings");
  ingest_cmd->add_option("--tracks", ingest.tracks, "track recording csv")->required();
  ingest_cmd->add_option("--labels", ingest.labels, "merge event label csv")->required();
  ingest_cmd->add_option("--out", ingest.out, "output corpus directory")->required();
  ingest_cmd->add_option("--align-len", ingest.align_len, "frames per aligned event")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--features", ingest.features, "comma-separated feature list");
  ingest_cmd->add_option("--train-fraction", ingest.train_fraction, "train split fraction");
  ingest_cmd->add_option("--seed", ingest.seed, "split RNG seed");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit a model on the train split");
  train_cmd->add_option("--corpus", train.corpus, "corpus directory")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--features", train.features, "comma-separated input features");
  train_cmd->add_option("--output", train.output_feature, "prediction target feature");
  train_cmd->add_option("--model-type", train.model_type, "hmm | gmm")
      ->check(CLI::IsMember({"hmm", "gmm"}));
  train_cmd->add_flag("--use-all-events", train.use_all_events, "train on every event");
  add_training_flags(train_cmd, train.config, train.init);

  SelectKArgs select;
  auto* select_cmd = app.add_subcommand("select-k", "BIC scan over component counts");
  select_cmd->add_option("--corpus", select.corpus, "corpus directory")->required();
  select_cmd->add_option("--out", select.out, "output directory")->required();
  select_cmd->add_option("--features", select.features, "comma-separated input features");
  select_cmd->add_option("--output", select.output_feature, "prediction target feature");
  select_cmd->add_option("--k-min", select.k_min, "smallest K")->check(CLI::PositiveNumber);
  select_cmd->add_option("--k-max", select.k_max, "largest K")->check(CLI::PositiveNumber);
  select_cmd->add_flag("--use-all-events", select.use_all_events, "scan on every event");
  add_training_flags(select_cmd, select.config, select.init);

  DecodeArgs decode;
  auto* decode_cmd = app.add_subcommand("decode", "belief timeline for one event");
  decode_cmd->add_option("--model", decode.model, "model document")->required();
  decode_cmd->add_option("--corpus", decode.corpus, "corpus directory")->required();
  decode_cmd->add_option("--event", decode.event, "event id")->required();
  decode_cmd->add_option("--out", decode.out, "output directory")->required();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "per-frame predictive mixture");
  predict_cmd->add_option("--model", predict.model, "model document")->required();
  predict_cmd->add_option("--corpus", predict.corpus, "corpus directory")->required();
  predict_cmd->add_option("--out", predict.out, "output directory")->required();
  predict_cmd->add_option("--events", predict.events, "comma-separated event ids");
  predict_cmd->add_option("--split", predict.split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}));

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "variable sweep and approach comparison");
  eval_cmd->add_option("--corpus", evaluate.corpus, "corpus directory")->required();
  eval_cmd->add_option("--out", evaluate.out, "output directory")->required();
  eval_cmd->add_option("--features", evaluate.features,
                       "inputs for the approach comparison");
  eval_cmd->add_option("--output", evaluate.output_feature, "prediction target feature");
  eval_cmd->add_option("--feature-sets", evaluate.feature_sets,
                       "semicolon-separated input sets for the variable sweep");
  eval_cmd->add_flag("--comparison", evaluate.comparison,
                     "run the four-way approach comparison");
  eval_cmd->add_option("--gmm-source", evaluate.gmm_source,
                       "gmm baseline: em (independent) | from-hmm")
      ->check(CLI::IsMember({"em", "from-hmm"}));
  eval_cmd->add_flag("--per-event", evaluate.per_event, "also write per-event score files");
  add_training_flags(eval_cmd, evaluate.config, evaluate.init);

  StateRangesArgs ranges;
  auto* ranges_cmd = app.add_subcommand("state-ranges", "per-state input feature ranges");
  ranges_cmd->add_option("--model", ranges.model, "model document")->required();
  ranges_cmd->add_option("--corpus", ranges.corpus, "corpus directory")->required();
  ranges_cmd->add_option("--out", ranges.out, "output directory")->required();
  ranges_cmd->add_option("--split", ranges.split, "train | test | all")
      ->check(CLI::IsMember({"train", "test", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth_cmd->parsed()) cmd_synth(synth);
    if (ingest_cmd->parsed()) cmd_ingest(ingest);
    if (train_cmd->parsed()) cmd_train(train);
    if (select_cmd->parsed()) cmd_select_k(select);
    if (decode_cmd->parsed()) cmd_decode(decode);
    if (predict_cmd->parsed()) cmd_predict(predict);
    if (eval_cmd->parsed()) cmd_evaluate(evaluate);
    if (ranges_cmd->parsed()) cmd_state_ranges(ranges);
  } catch (const CLI::ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const hmmgmr::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return 2;
  } catch (const hmmgmr::NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  }
  return 0;
}
