#include "hmmgmr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hmmgmr/detail/random.hpp"
#include "hmmgmr/detail/text.hpp"

namespace hmmgmr {

namespace {

using detail::fmt_double;
using detail::parse_double;
using detail::parse_i64;
using detail::split;
using detail::trim;

constexpr double kPlausibleSpeedLimit = 60.0;  // m/s
constexpr std::int64_t kFrameStepMs = 100;

struct CsvReader {
  std::istream& in;
  std::string source;
  long line_number = 0;

  // next non-comment, non-blank line
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_number;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      line = t;
      return true;
    }
    return false;
  }
};

[[noreturn]] void throw_malformed(const std::string& source, const std::vector<long>& lines) {
  std::ostringstream os;
  os << source << ": malformed rows rejected at line";
  os << (lines.size() > 1 ? "s " : " ");
  const std::size_t shown = std::min<std::size_t>(lines.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << lines[i];
  if (lines.size() > shown) os << " (+" << lines.size() - shown << " more)";
  throw DataError(os.str());
}

std::map<std::string, std::size_t> header_map(const std::string& header_line,
                                              const std::vector<std::string>& required,
                                              const std::string& source) {
  const auto cols = split(header_line, ',');
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cols.size(); ++i) index[trim(cols[i])] = i;
  for (const auto& name : required) {
    if (!index.count(name)) throw DataError(source + ": missing column '" + name + "'");
  }
  return index;
}

std::string make_event_id(int i, int n_events) {
  int width = 4;
  for (int v = n_events; v >= 10000; v /= 10) ++width;
  std::string digits = std::to_string(i + 1);
  return "ev" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

Eigen::MatrixXd correlation_to_covariance(const Eigen::VectorXd& sigma,
                                          const Eigen::MatrixXd& corr) {
  return sigma.asDiagonal() * corr * sigma.asDiagonal();
}

std::vector<std::string> default_output(const std::vector<std::string>& names) {
  if (std::find(names.begin(), names.end(), "vy_ego") != names.end()) return {"vy_ego"};
  return {names.back()};
}

}  // namespace

std::vector<TrackRecord> load_tracks(std::istream& in, const std::string& source_name) {
  CsvReader reader{in, source_name};
  std::string line;
  if (!reader.next(line)) throw DataError(source_name + ": empty file (no header)");
  const std::size_t n_cols = split(line, ',').size();
  const auto index =
      header_map(line, {"track_id", "frame_id", "timestamp_ms", "agent_type", "x", "y", "vx",
                        "vy", "psi_rad", "length", "width"},
                 source_name);

  std::vector<TrackRecord> records;
  std::vector<long> malformed;
  long implausible = 0;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    auto field = [&](const char* name) -> const std::string& {
      return fields[index.at(name)];
    };
    if (fields.size() != n_cols) {
      malformed.push_back(reader.line_number);
      continue;
    }
    TrackRecord r;
    bool ok = parse_i64(field("track_id"), r.track_id) &&
              parse_i64(field("frame_id"), r.frame_id) &&
              parse_i64(field("timestamp_ms"), r.timestamp_ms) &&
              parse_double(field("x"), r.x) && parse_double(field("y"), r.y) &&
              parse_double(field("vx"), r.vx) && parse_double(field("vy"), r.vy) &&
              parse_double(field("psi_rad"), r.psi_rad) &&
              parse_double(field("length"), r.length) && parse_double(field("width"), r.width);
    r.agent_type = trim(field("agent_type"));
    ok = ok && (r.agent_type == "car" || r.agent_type == "truck");
    ok = ok && r.timestamp_ms % kFrameStepMs == 0;
    ok = ok && std::isfinite(r.x) && std::isfinite(r.y) && std::isfinite(r.vx) &&
         std::isfinite(r.vy) && std::isfinite(r.psi_rad) && std::isfinite(r.length) &&
         std::isfinite(r.width);
    if (!ok) {
      malformed.push_back(reader.line_number);
      continue;
    }
    if (std::abs(r.vx) > kPlausibleSpeedLimit || std::abs(r.vy) > kPlausibleSpeedLimit) {
      ++implausible;
      if (implausible <= 5)
        emit_warning(source_name + ": implausible speed at line " +
                     std::to_string(reader.line_number) + " (|v| > 60 m/s)");
    }
    records.push_back(std::move(r));
  }
  if (implausible > 5)
    emit_warning(source_name + ": " + std::to_string(implausible - 5) +
                 " further implausible-speed rows");
  if (!malformed.empty()) throw_malformed(source_name, malformed);

  std::stable_sort(records.begin(), records.end(), [](const TrackRecord& a, const TrackRecord& b) {
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.timestamp_ms < b.timestamp_ms;
  });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].track_id == records[i - 1].track_id &&
        records[i].timestamp_ms == records[i - 1].timestamp_ms)
      throw DataError(source_name + ": track " + std::to_string(records[i].track_id) +
                      " has duplicate timestamp " + std::to_string(records[i].timestamp_ms));
  }
  return records;
}

std::vector<TrackRecord> load_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  return load_tracks(in, path.filename().string());
}

std::vector<MergeEventLabel> load_labels(std::istream& in, const std::string& source_name) {
  CsvReader reader{in, source_name};
  std::string line;
  if (!reader.next(line)) throw DataError(source_name + ": empty file (no header)");
  const std::size_t n_cols = split(line, ',').size();
  const auto index =
      header_map(line, {"event_id", "ego_id", "lead_id", "lag_id", "t_s", "t_e"}, source_name);
  // an optional t_m column is accepted and ignored

  std::vector<MergeEventLabel> labels;
  std::vector<long> malformed;
  std::set<std::string> seen;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    if (fields.size() != n_cols) {
      malformed.push_back(reader.line_number);
      continue;
    }
    MergeEventLabel l;
    l.event_id = trim(fields[index.at("event_id")]);
    bool ok = !l.event_id.empty() && parse_i64(fields[index.at("ego_id")], l.ego_id) &&
              parse_i64(fields[index.at("lead_id")], l.lead_id) &&
              parse_i64(fields[index.at("lag_id")], l.lag_id) &&
              parse_i64(fields[index.at("t_s")], l.t_s) &&
              parse_i64(fields[index.at("t_e")], l.t_e);
    ok = ok && l.t_s < l.t_e;
    if (!ok || seen.count(l.event_id)) {
      malformed.push_back(reader.line_number);
      continue;
    }
    seen.insert(l.event_id);
    labels.push_back(std::move(l));
  }
  if (!malformed.empty()) throw_malformed(source_name, malformed);
  return labels;
}

std::vector<MergeEventLabel> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  return load_labels(in, path.filename().string());
}

EventSequence extract_event(const std::vector<TrackRecord>& tracks, const MergeEventLabel& label,
                            const FeatureSchema& schema) {
  if (label.t_s % kFrameStepMs != 0 || label.t_e % kFrameStepMs != 0)
    throw DataError("event '" + label.event_id + "': t_s and t_e must lie on the 100 ms grid");

  std::map<std::int64_t, std::map<std::int64_t, const TrackRecord*>> by_track;
  for (const auto& r : tracks) by_track[r.track_id][r.timestamp_ms] = &r;

  struct Role {
    const char* name;
    std::int64_t id;
  };
  const Role roles[3] = {{"ego", label.ego_id}, {"lead", label.lead_id}, {"lag", label.lag_id}};

  const auto t_count = (label.t_e - label.t_s) / kFrameStepMs + 1;
  std::vector<std::string> gaps;
  auto record_at = [&](const Role& role, std::int64_t ts) -> const TrackRecord* {
    auto track_it = by_track.find(role.id);
    if (track_it == by_track.end()) return nullptr;
    auto frame_it = track_it->second.find(ts);
    return frame_it == track_it->second.end() ? nullptr : frame_it->second;
  };

  for (std::int64_t i = 0; i < t_count; ++i) {
    const std::int64_t ts = label.t_s + i * kFrameStepMs;
    for (const auto& role : roles) {
      if (!record_at(role, ts))
        gaps.push_back(std::string(role.name) + "@" + std::to_string(ts));
    }
  }
  if (!gaps.empty()) {
    std::ostringstream os;
    os << "event '" << label.event_id << "': missing frames: ";
    const std::size_t shown = std::min<std::size_t>(gaps.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << gaps[i];
    if (gaps.size() > shown) os << " (+" << gaps.size() - shown << " more)";
    throw DataError(os.str());
  }

  // travel direction from the ego's mean longitudinal speed
  double vx_sum = 0.0;
  for (std::int64_t i = 0; i < t_count; ++i)
    vx_sum += record_at(roles[0], label.t_s + i * kFrameStepMs)->vx;
  const double direction = vx_sum < 0.0 ? -1.0 : 1.0;

  Eigen::MatrixXd frames(t_count, schema.dim());
  std::vector<std::int64_t> timestamps(static_cast<std::size_t>(t_count));
  for (std::int64_t i = 0; i < t_count; ++i) {
    const std::int64_t ts = label.t_s + i * kFrameStepMs;
    timestamps[static_cast<std::size_t>(i)] = ts;
    const TrackRecord& ego = *record_at(roles[0], ts);
    const TrackRecord& lead = *record_at(roles[1], ts);
    const TrackRecord& lag = *record_at(roles[2], ts);
    for (int f = 0; f < schema.dim(); ++f) {
      const std::string& name = schema.names()[static_cast<std::size_t>(f)];
      double value = 0.0;
      if (name == "dv_lead") {
        value = lead.vx - ego.vx;
      } else if (name == "dv_lag") {
        value = lag.vx - ego.vx;
      } else if (name == "vx_ego") {
        value = ego.vx;
      } else if (name == "vy_ego") {
        value = ego.vy;
      } else if (name == "dx_lag") {
        // bumper-to-bumper: positive while the lag vehicle trails the ego
        value = direction * (ego.x - lag.x) - 0.5 * (ego.length + lag.length);
      } else if (name == "dx_lead") {
        value = direction * (lead.x - ego.x) - 0.5 * (ego.length + lead.length);
      } else {
        throw DataError("extract_event: feature '" + name + "' is not derivable from tracks");
      }
      frames(i, f) = value;
    }
  }
  return EventSequence(label.event_id, schema, std::move(frames), std::move(timestamps));
}

std::vector<EventSequence> align_events(const std::vector<EventSequence>& events,
                                        int target_len) {
  if (target_len < 2) throw DataError("align_events: target length must be >= 2");
  std::vector<EventSequence> out;
  out.reserve(events.size());
  for (const auto& seq : events) {
    if (seq.length() < 2)
      throw DataError("align_events: event '" + seq.event_id() + "' has fewer than 2 frames");
    const auto& ts = seq.timestamps_ms();
    const double t0 = static_cast<double>(ts.front());
    const double t1 = static_cast<double>(ts.back());
    if (t1 - t0 < static_cast<double>(target_len - 1))
      throw DataError("align_events: event '" + seq.event_id() +
                      "' spans fewer milliseconds than the target frame count");

    Eigen::MatrixXd frames(target_len, seq.dim());
    std::vector<std::int64_t> new_ts(static_cast<std::size_t>(target_len));
    std::size_t j = 0;
    for (int i = 0; i < target_len; ++i) {
      const double tau =
          t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(target_len - 1);
      while (j + 2 < ts.size() && static_cast<double>(ts[j + 1]) <= tau) ++j;
      const double lo = static_cast<double>(ts[j]);
      const double hi = static_cast<double>(ts[j + 1]);
      const double theta = std::clamp((tau - lo) / (hi - lo), 0.0, 1.0);
      frames.row(i) = (1.0 - theta) * seq.frames().row(static_cast<Eigen::Index>(j)) +
                      theta * seq.frames().row(static_cast<Eigen::Index>(j + 1));
      new_ts[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::llround(tau));
    }
    // endpoints are exact by construction
    frames.row(0) = seq.frames().row(0);
    frames.row(target_len - 1) = seq.frames().row(seq.length() - 1);
    out.emplace_back(seq.event_id(), seq.schema(), std::move(frames), std::move(new_ts));
  }
  return out;
}

bool SplitManifest::is_train(const std::string& event_id) const {
  return std::find(train_ids.begin(), train_ids.end(), event_id) != train_ids.end();
}

const EventSequence* Corpus::find_event(const std::string& event_id) const {
  for (const auto& e : events) {
    if (e.event_id() == event_id) return &e;
  }
  return nullptr;
}

std::vector<EventSequence> Corpus::train_events() const {
  std::vector<EventSequence> out;
  for (const auto& e : events) {
    if (split.is_train(e.event_id())) out.push_back(e);
  }
  return out;
}

std::vector<EventSequence> Corpus::test_events() const {
  std::vector<EventSequence> out;
  for (const auto& e : events) {
    if (!split.is_train(e.event_id())) out.push_back(e);
  }
  return out;
}

SplitManifest split_corpus(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DataError("split: fraction must lie strictly between 0 and 1");
  const int n = static_cast<int>(corpus.events.size());
  if (n < 2) throw DataError("split: need at least 2 events");

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  detail::Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

  auto n_train = static_cast<int>(std::llround(fraction * n));
  n_train = std::clamp(n_train, 1, n - 1);

  std::vector<bool> in_train(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n_train; ++i) in_train[static_cast<std::size_t>(order[i])] = true;

  SplitManifest manifest;
  manifest.fraction = fraction;
  manifest.seed = seed;
  for (int i = 0; i < n; ++i) {
    const auto& id = corpus.events[static_cast<std::size_t>(i)].event_id();
    (in_train[static_cast<std::size_t>(i)] ? manifest.train_ids : manifest.test_ids).push_back(id);
  }
  return manifest;
}

EventSequence project_features(const EventSequence& seq, const FeatureSchema& schema) {
  Eigen::MatrixXd frames(seq.length(), schema.dim());
  for (int f = 0; f < schema.dim(); ++f) {
    const auto& name = schema.names()[static_cast<std::size_t>(f)];
    const int src = seq.schema().index_of(name);
    if (src < 0)
      throw DataError("projection: feature '" + name + "' not present in event '" +
                      seq.event_id() + "'");
    frames.col(f) = seq.frames().col(src);
  }
  return EventSequence(seq.event_id(), schema, std::move(frames), seq.timestamps_ms());
}

Corpus project_features(const Corpus& corpus, const FeatureSchema& schema) {
  Corpus out;
  out.schema = schema;
  out.split = corpus.split;
  out.events.reserve(corpus.events.size());
  for (const auto& e : corpus.events) out.events.push_back(project_features(e, schema));
  return out;
}

SynthSpec default_synth_spec() {
  SynthSpec spec;
  spec.features = {"dv_lead", "dx_lag", "vx_ego", "vy_ego"};

  spec.pi = Eigen::Vector3d(0.96, 0.03, 0.01);
  spec.trans = Eigen::MatrixXd{{0.965, 0.034, 0.001},
                               {0.001, 0.964, 0.035},
                               {0.001, 0.009, 0.990}};

  // approach: closing on the lead, drifting toward the gap
  Eigen::VectorXd mean1(4), sigma1(4);
  mean1 << 0.25, 5.6, -3.35, 0.10;
  sigma1 << 0.55, 1.6, 0.60, 0.10;
  Eigen::MatrixXd corr1{{1.00, 0.15, 0.20, 0.35},
                        {0.15, 1.00, 0.10, 0.15},
                        {0.20, 0.10, 1.00, -0.55},
                        {0.35, 0.15, -0.55, 1.00}};

  // merge: slow, lateral motion peaks, tight coupling with the lag gap
  Eigen::VectorXd mean2(4), sigma2(4);
  mean2 << -0.55, 6.5, -2.10, 0.55;
  sigma2 << 0.30, 0.90, 0.35, 0.15;
  Eigen::MatrixXd corr2{{1.00, 0.15, 0.25, 0.20},
                        {0.15, 1.00, 0.10, 0.45},
                        {0.25, 0.10, 1.00, -0.30},
                        {0.20, 0.45, -0.30, 1.00}};

  // settle: speeds back near the approach range, couplings reversed as the
  // ego accelerates behind the lead
  Eigen::VectorXd mean3(4), sigma3(4);
  mean3 << -0.10, 6.1, -3.80, 0.15;
  sigma3 << 0.55, 1.6, 0.60, 0.10;
  Eigen::MatrixXd corr3{{1.00, 0.15, 0.20, -0.35},
                        {0.15, 1.00, 0.10, -0.15},
                        {0.20, 0.10, 1.00, 0.55},
                        {-0.35, -0.15, 0.55, 1.00}};

  spec.components = {
      GaussianComponent{mean1, correlation_to_covariance(sigma1, corr1)},
      GaussianComponent{mean2, correlation_to_covariance(sigma2, corr2)},
      GaussianComponent{mean3, correlation_to_covariance(sigma3, corr3)},
  };
  return spec;
}

SynthResult synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.components.empty()) throw DataError("synth: no components");
  const int k = spec.k();
  const int core_dim = static_cast<int>(spec.features.size());
  if (spec.n_events < 1) throw DataError("synth: event count must be >= 1");
  if (spec.event_len < 2) throw DataError("synth: event length must be >= 2");
  if (spec.pi.size() != k) throw DataError("synth: pi length != K");
  if (spec.pi.minCoeff() < 0.0 || std::abs(spec.pi.sum() - 1.0) > 1e-9)
    throw DataError("synth: pi is not a probability vector");
  if (spec.trans.rows() != k || spec.trans.cols() != k)
    throw DataError("synth: transition matrix shape != K x K");
  for (int j = 0; j < k; ++j) {
    if (spec.trans.row(j).minCoeff() < 0.0 || std::abs(spec.trans.row(j).sum() - 1.0) > 1e-9)
      throw DataError("synth: transition row " + std::to_string(j) + " is not stochastic");
  }
  for (int c = 0; c < k; ++c)
    validate_component(spec.components[static_cast<std::size_t>(c)], core_dim,
                       "synth component " + std::to_string(c));

  HmmModel truth;
  truth.pi = spec.pi;
  truth.trans = spec.trans;
  truth.components = spec.components;
  truth.schema = FeatureSchema::with_output(spec.features, default_output(spec.features));
  truth.validate();

  std::vector<std::string> all_names = spec.features;
  for (const auto& n : spec.noise_features) all_names.push_back(n);
  const FeatureSchema corpus_schema =
      FeatureSchema::with_output(all_names, default_output(spec.features));
  const int noise_dim = static_cast<int>(spec.noise_features.size());

  std::vector<Eigen::MatrixXd> chol;
  chol.reserve(spec.components.size());
  for (const auto& g : spec.components) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
    if (llt.info() != Eigen::Success)
      throw DataError("synth: component covariance not positive definite");
    chol.push_back(llt.matrixL());
  }

  detail::Rng rng(seed);
  SynthResult result;
  result.corpus.schema = corpus_schema;
  result.truth = std::move(truth);
  result.corpus.events.reserve(static_cast<std::size_t>(spec.n_events));
  result.state_paths.reserve(static_cast<std::size_t>(spec.n_events));

  std::vector<double> row(static_cast<std::size_t>(k));
  for (int e = 0; e < spec.n_events; ++e) {
    Eigen::MatrixXd frames(spec.event_len, core_dim + noise_dim);
    std::vector<int> path(static_cast<std::size_t>(spec.event_len));
    int state = 0;
    for (int t = 0; t < spec.event_len; ++t) {
      if (t == 0) {
        for (int c = 0; c < k; ++c) row[static_cast<std::size_t>(c)] = spec.pi(c);
      } else {
        for (int c = 0; c < k; ++c) row[static_cast<std::size_t>(c)] = spec.trans(state, c);
      }
      state = rng.categorical(row);
      path[static_cast<std::size_t>(t)] = state;

      Eigen::VectorXd z(core_dim);
      for (int d = 0; d < core_dim; ++d) z(d) = rng.normal();
      frames.row(t).head(core_dim) =
          (spec.components[static_cast<std::size_t>(state)].mean +
           chol[static_cast<std::size_t>(state)] * z)
              .transpose();
      for (int d = 0; d < noise_dim; ++d) {
        const double scale =
            rng.uniform01() < spec.noise_spike_prob ? spec.noise_spike_scale : 1.0;
        frames(t, core_dim + d) = spec.noise_sigma * scale * rng.normal();
      }
    }
    result.corpus.events.push_back(EventSequence::with_uniform_timestamps(
        make_event_id(e, spec.n_events), corpus_schema, std::move(frames)));
    result.state_paths.push_back(std::move(path));
  }

  if (spec.n_events >= 2)
    result.corpus.split = split_corpus(result.corpus, spec.train_fraction, seed);
  return result;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

std::string comment_block(const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  return out;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                 const std::vector<std::string>& header_comments) {
  if (corpus.events.empty()) throw DataError("save_corpus: empty corpus");
  std::filesystem::create_directories(dir);

  std::ostringstream events;
  events << comment_block(header_comments);
  events << "event_id,timestamp_ms";
  for (const auto& name : corpus.schema.names()) events << "," << name;
  events << "\n";
  for (const auto& seq : corpus.events) {
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
      events << seq.event_id() << "," << seq.timestamps_ms()[static_cast<std::size_t>(t)];
      for (int f = 0; f < seq.dim(); ++f) events << "," << fmt_double(seq.frames()(t, f));
      events << "\n";
    }
  }
  write_file(dir / "events.csv", events.str());

  if (corpus.has_split()) {
    std::ostringstream manifest;
    manifest << comment_block(header_comments);
    manifest << "# fraction: " << fmt_double(corpus.split.fraction) << "\n";
    manifest << "# split_seed: " << corpus.split.seed << "\n";
    manifest << "event_id,split\n";
    for (const auto& seq : corpus.events)
      manifest << seq.event_id() << ","
               << (corpus.split.is_train(seq.event_id()) ? "train" : "test") << "\n";
    write_file(dir / "manifest.txt", manifest.str());
  }
}

Corpus load_corpus(const std::filesystem::path& dir,
                   const std::optional<std::vector<std::string>>& output_features) {
  const auto events_path = dir / "events.csv";
  std::ifstream in(events_path);
  if (!in) throw DataError("cannot open file: " + events_path.string());

  CsvReader reader{in, "events.csv"};
  std::string line;
  if (!reader.next(line)) throw DataError("events.csv: empty file (no header)");
  const auto cols = split(line, ',');
  if (cols.size() < 3 || trim(cols[0]) != "event_id" || trim(cols[1]) != "timestamp_ms")
    throw DataError("events.csv: header must start with event_id,timestamp_ms");
  std::vector<std::string> feature_names;
  for (std::size_t i = 2; i < cols.size(); ++i) feature_names.push_back(trim(cols[i]));

  const FeatureSchema schema = FeatureSchema::with_output(
      feature_names, output_features.value_or(default_output(feature_names)));

  Corpus corpus;
  corpus.schema = schema;

  std::string current_id;
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
  std::set<std::string> finished;
  const int dim = schema.dim();

  auto flush = [&]() {
    if (current_id.empty()) return;
    const auto t_len = static_cast<Eigen::Index>(timestamps.size());
    Eigen::MatrixXd frames(t_len, dim);
    for (Eigen::Index t = 0; t < t_len; ++t)
      for (int f = 0; f < dim; ++f)
        frames(t, f) = values[static_cast<std::size_t>(t) * static_cast<std::size_t>(dim) +
                              static_cast<std::size_t>(f)];
    corpus.events.emplace_back(current_id, schema, std::move(frames), timestamps);
    finished.insert(current_id);
    timestamps.clear();
    values.clear();
  };

  std::vector<long> malformed;
  while (reader.next(line)) {
    const auto fields = split(line, ',');
    if (fields.size() != cols.size()) {
      malformed.push_back(reader.line_number);
      continue;
    }
    const std::string id = trim(fields[0]);
    std::int64_t ts = 0;
    bool ok = !id.empty() && parse_i64(fields[1], ts);
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int f = 0; ok && f < dim; ++f)
      ok = parse_double(fields[static_cast<std::size_t>(f) + 2], row[static_cast<std::size_t>(f)]);
    if (!ok) {
      malformed.push_back(reader.line_number);
      continue;
    }
    if (id != current_id) {
      if (finished.count(id))
        throw DataError("events.csv: event '" + id + "' appears non-contiguously (line " +
                        std::to_string(reader.line_number) + ")");
      flush();
      current_id = id;
    }
    timestamps.push_back(ts);
    values.insert(values.end(), row.begin(), row.end());
  }
  flush();
  if (!malformed.empty()) throw_malformed("events.csv", malformed);
  if (corpus.events.empty()) throw DataError("events.csv: no events");

  const auto manifest_path = dir / "manifest.txt";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream min(manifest_path);
    if (!min) throw DataError("cannot open file: " + manifest_path.string());

    // structured comments carry the split provenance
    std::string raw;
    long line_number = 0;
    while (std::getline(min, raw)) {
      ++line_number;
      const std::string t = trim(raw);
      if (t.empty()) continue;
      if (t.front() == '#') {
        const auto fields = split(t.substr(1), ':');
        if (fields.size() == 2) {
          const std::string key = trim(fields[0]);
          double fraction = 0.0;
          std::int64_t seed = 0;
          if (key == "fraction" && parse_double(fields[1], fraction))
            corpus.split.fraction = fraction;
          if (key == "split_seed" && parse_i64(fields[1], seed))
            corpus.split.seed = static_cast<std::uint64_t>(seed);
        }
        continue;
      }
      if (t == "event_id,split") continue;
      const auto fields = split(t, ',');
      if (fields.size() != 2)
        throw DataError("manifest.txt: malformed row at line " + std::to_string(line_number));
      const std::string id = trim(fields[0]);
      const std::string which = trim(fields[1]);
      if (!corpus.find_event(id))
        throw DataError("manifest.txt: unknown event '" + id + "'");
      if (which == "train") {
        corpus.split.train_ids.push_back(id);
      } else if (which == "test") {
        corpus.split.test_ids.push_back(id);
      } else {
        throw DataError("manifest.txt: split label must be train or test (line " +
                        std::to_string(line_number) + ")");
      }
    }
    if (corpus.split.train_ids.size() + corpus.split.test_ids.size() != corpus.events.size())
      throw DataError("manifest.txt: split is not a partition of the corpus events");
  }
  return corpus;
}

void save_state_paths(const std::filesystem::path& path, const Corpus& corpus,
                      const std::vector<std::vector<int>>& state_paths,
                      const std::vector<std::string>& header_comments) {
  if (state_paths.size() != corpus.events.size())
    throw DataError("state paths: per-event path count does not match corpus");
  std::ostringstream out;
  out << comment_block(header_comments);
  out << "event_id,timestamp_ms,state\n";
  for (std::size_t e = 0; e < corpus.events.size(); ++e) {
    const auto& seq = corpus.events[e];
    if (static_cast<Eigen::Index>(state_paths[e].size()) != seq.length())
      throw DataError("state paths: length mismatch for event '" + seq.event_id() + "'");
    for (Eigen::Index t = 0; t < seq.length(); ++t)
      out << seq.event_id() << "," << seq.timestamps_ms()[static_cast<std::size_t>(t)] << ","
          << state_paths[e][static_cast<std::size_t>(t)] + 1 << "\n";
  }
  write_file(path, out.str());
}

}  // namespace hmmgmr
