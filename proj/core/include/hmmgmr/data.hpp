#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "hmmgmr/model.hpp"
#include "hmmgmr/types.hpp"

namespace hmmgmr {

// One row of a trajectory recording. Positions in m, velocities in m/s,
// timestamps on the native 100 ms grid.
struct TrackRecord {
  std::int64_t track_id = 0;
  std::int64_t frame_id = 0;
  std::int64_t timestamp_ms = 0;
  std::string agent_type;  // car | truck
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double psi_rad = 0.0;
  double length = 0.0;
  double width = 0.0;
};

// Comma-separated with a documented header (see docs/formats.md). Columns
// may appear in any order; rows are returned sorted by (track_id,
// timestamp). Malformed rows raise DataError listing their line numbers;
// implausible speeds (|v| > 60 m/s) only warn.
std::vector<TrackRecord> load_tracks(std::istream& in, const std::string& source_name = "tracks");
std::vector<TrackRecord> load_tracks(const std::filesystem::path& path);

// Ego/lead/lag identification and the merge window are inputs, not derived.
struct MergeEventLabel {
  std::string event_id;
  std::int64_t ego_id = 0;
  std::int64_t lead_id = 0;
  std::int64_t lag_id = 0;
  std::int64_t t_s = 0;
  std::int64_t t_e = 0;
};

std::vector<MergeEventLabel> load_labels(std::istream& in,
                                         const std::string& source_name = "labels");
std::vector<MergeEventLabel> load_labels(const std::filesystem::path& path);

// Per-frame features over [t_s, t_e] on the 100 ms grid. Relative speeds are
// other-minus-ego; gaps are bumper-to-bumper along the travel direction
// (sign of mean ego vx), positive when the other vehicle is on its expected
// side (lead ahead, lag behind). Missing vehicle frames raise DataError
// naming the gaps; no interpolation across dropouts.
EventSequence extract_event(const std::vector<TrackRecord>& tracks, const MergeEventLabel& label,
                            const FeatureSchema& schema);

// Linear interpolation onto a uniform time grid over each event's own span.
// First and last frames are preserved exactly.
std::vector<EventSequence> align_events(const std::vector<EventSequence>& events, int target_len);

// Seeded train/test partition, persisted alongside the corpus.
struct SplitManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  double fraction = 0.0;
  std::uint64_t seed = 0;

  bool empty() const { return train_ids.empty() && test_ids.empty(); }
  bool is_train(const std::string& event_id) const;
};

struct Corpus {
  std::vector<EventSequence> events;
  FeatureSchema schema;
  SplitManifest split;

  bool has_split() const { return !split.empty(); }
  const EventSequence* find_event(const std::string& event_id) const;
  std::vector<EventSequence> train_events() const;
  std::vector<EventSequence> test_events() const;
};

SplitManifest split_corpus(const Corpus& corpus, double fraction, std::uint64_t seed);

// Restriction of an event (or corpus) to the features named by the schema,
// in schema order.
EventSequence project_features(const EventSequence& seq, const FeatureSchema& schema);
Corpus project_features(const Corpus& corpus, const FeatureSchema& schema);

// Ground-truth generator used as the oracle for learning and regression
// tests. Draws state paths from (pi, trans) and frames from the component
// emissions; optional pure-noise channels are appended outside the truth
// model.
struct SynthSpec {
  std::vector<std::string> features;
  int n_events = 600;
  int event_len = 100;
  double train_fraction = 0.8;
  Eigen::VectorXd pi;
  Eigen::MatrixXd trans;
  std::vector<GaussianComponent> components;
  // noise channels are i.i.d. across frames and independent of states and
  // outputs; a contaminated-normal draw (occasional wide spikes) emulates the
  // task-irrelevant spiky sensor channels the sweep is meant to reject
  std::vector<std::string> noise_features;
  double noise_sigma = 1.0;
  double noise_spike_prob = 0.10;
  double noise_spike_scale = 5.0;

  int k() const { return static_cast<int>(components.size()); }
};

// Three-phase merge-flavored generator: strongly ordered transitions, the
// first and last states overlapping in the input features, per-state
// input/output correlation so conditioning carries signal.
SynthSpec default_synth_spec();

struct SynthResult {
  Corpus corpus;
  HmmModel truth;
  std::vector<std::vector<int>> state_paths;  // per event, 0-based states
};

SynthResult synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Corpus directory layout: events.csv plus manifest.txt (when a split is
// present). header_comments are emitted verbatim as leading '#' lines.
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                 const std::vector<std::string>& header_comments = {});
Corpus load_corpus(const std::filesystem::path& dir,
                   const std::optional<std::vector<std::string>>& output_features = std::nullopt);

void save_state_paths(const std::filesystem::path& path, const Corpus& corpus,
                      const std::vector<std::vector<int>>& state_paths,
                      const std::vector<std::string>& header_comments = {});

}  // namespace hmmgmr
