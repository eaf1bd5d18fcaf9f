#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmmgmr {

// Error taxonomy mirrored by the CLI exit codes: DataError for malformed or
// inconsistent inputs (exit 2), NumericError for numerically impossible
// operations (exit 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics (implausible values, degenerate fallbacks, skipped
// scan entries) go through a process-wide handler so embedders and tests can
// capture them. Default handler prints to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void reset_warning_handler();
void emit_warning(const std::string& message);

// Feature identifiers understood across the pipeline. Velocities in m/s,
// gaps in m.
const std::vector<std::string>& known_feature_names();
bool is_known_feature(const std::string& name);

// Ordered feature list plus the disjoint input/output index split used by
// the regression side. Output block defaults to {vy_ego}.
class FeatureSchema {
 public:
  FeatureSchema() = default;  // empty; must be assigned before use

  FeatureSchema(std::vector<std::string> names, std::vector<int> input_indices,
                std::vector<int> output_indices);

  // Convenience: output block = the named features, input block = the rest,
  // both in schema order.
  static FeatureSchema with_output(std::vector<std::string> names,
                                   const std::vector<std::string>& output_names = {"vy_ego"});

  int dim() const { return static_cast<int>(names_.size()); }
  int input_dim() const { return static_cast<int>(input_indices_.size()); }
  int output_dim() const { return static_cast<int>(output_indices_.size()); }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& input_indices() const { return input_indices_; }
  const std::vector<int>& output_indices() const { return output_indices_; }

  std::vector<std::string> input_names() const;
  std::vector<std::string> output_names() const;

  // -1 when absent
  int index_of(const std::string& name) const;

  std::string describe() const;

  bool operator==(const FeatureSchema& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<int> input_indices_;
  std::vector<int> output_indices_;
};

// One merge event: T aligned observation frames (rows) over the schema's D
// features (columns), with strictly increasing millisecond timestamps.
// Immutable after construction.
class EventSequence {
 public:
  EventSequence(std::string event_id, FeatureSchema schema, Eigen::MatrixXd frames,
                std::vector<std::int64_t> timestamps_ms);

  static EventSequence with_uniform_timestamps(std::string event_id, FeatureSchema schema,
                                               Eigen::MatrixXd frames,
                                               std::int64_t start_ms = 0,
                                               std::int64_t step_ms = 100);

  const std::string& event_id() const { return event_id_; }
  const FeatureSchema& schema() const { return schema_; }
  const Eigen::MatrixXd& frames() const { return frames_; }
  const std::vector<std::int64_t>& timestamps_ms() const { return timestamps_ms_; }

  Eigen::Index length() const { return frames_.rows(); }
  int dim() const { return static_cast<int>(frames_.cols()); }

 private:
  std::string event_id_;
  FeatureSchema schema_;
  Eigen::MatrixXd frames_;
  std::vector<std::int64_t> timestamps_ms_;
};

}  // namespace hmmgmr
