#include "hmmgmr/types.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <sstream>
#include <utility>

namespace hmmgmr {

namespace {

std::mutex g_warning_mutex;
WarningHandler g_warning_handler;

void default_warning_handler(const std::string& message) {
  std::cerr << "[hmmgmr] warning: " << message << "\n";
}

}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_warning_mutex);
  g_warning_handler = std::move(handler);
}

void reset_warning_handler() { set_warning_handler(nullptr); }

void emit_warning(const std::string& message) {
  WarningHandler handler;
  {
    std::lock_guard<std::mutex> lock(g_warning_mutex);
    handler = g_warning_handler;
  }
  if (handler) {
    handler(message);
  } else {
    default_warning_handler(message);
  }
}

const std::vector<std::string>& known_feature_names() {
  static const std::vector<std::string> names = {"dv_lead", "dx_lag",  "vx_ego",
                                                 "vy_ego",  "dv_lag", "dx_lead"};
  return names;
}

bool is_known_feature(const std::string& name) {
  const auto& known = known_feature_names();
  return std::find(known.begin(), known.end(), name) != known.end();
}

FeatureSchema::FeatureSchema(std::vector<std::string> names, std::vector<int> input_indices,
                             std::vector<int> output_indices)
    : names_(std::move(names)),
      input_indices_(std::move(input_indices)),
      output_indices_(std::move(output_indices)) {
  if (names_.empty()) throw DataError("feature schema: empty feature list");
  for (const auto& n : names_) {
    if (!is_known_feature(n)) throw DataError("feature schema: unknown feature '" + n + "'");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    for (std::size_t j = i + 1; j < names_.size(); ++j) {
      if (names_[i] == names_[j])
        throw DataError("feature schema: duplicate feature '" + names_[i] + "'");
    }
  }
  if (output_indices_.empty()) throw DataError("feature schema: output block is empty");

  std::vector<int> seen(names_.size(), 0);
  auto mark = [&](const std::vector<int>& idx, const char* which) {
    for (int i : idx) {
      if (i < 0 || i >= dim())
        throw DataError(std::string("feature schema: ") + which + " index out of range");
      if (seen[static_cast<std::size_t>(i)]++)
        throw DataError("feature schema: index " + std::to_string(i) +
                        " appears in both input and output blocks (or twice)");
    }
  };
  mark(input_indices_, "input");
  mark(output_indices_, "output");
  for (int i = 0; i < dim(); ++i) {
    if (!seen[static_cast<std::size_t>(i)])
      throw DataError("feature schema: index " + std::to_string(i) +
                      " ('" + names_[static_cast<std::size_t>(i)] +
                      "') belongs to neither block");
  }
}

FeatureSchema FeatureSchema::with_output(std::vector<std::string> names,
                                         const std::vector<std::string>& output_names) {
  std::vector<int> in_idx;
  std::vector<int> out_idx;
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    const bool is_output = std::find(output_names.begin(), output_names.end(),
                                     names[static_cast<std::size_t>(i)]) != output_names.end();
    (is_output ? out_idx : in_idx).push_back(i);
  }
  if (out_idx.size() != output_names.size())
    throw DataError("feature schema: requested output feature not present in feature list");
  return FeatureSchema(std::move(names), std::move(in_idx), std::move(out_idx));
}

std::vector<std::string> FeatureSchema::input_names() const {
  std::vector<std::string> out;
  out.reserve(input_indices_.size());
  for (int i : input_indices_) out.push_back(names_[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<std::string> FeatureSchema::output_names() const {
  std::vector<std::string> out;
  out.reserve(output_indices_.size());
  for (int i : output_indices_) out.push_back(names_[static_cast<std::size_t>(i)]);
  return out;
}

int FeatureSchema::index_of(const std::string& name) const {
  for (int i = 0; i < dim(); ++i) {
    if (names_[static_cast<std::size_t>(i)] == name) return i;
  }
  return -1;
}

std::string FeatureSchema::describe() const {
  std::ostringstream os;
  auto join = [&os](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  };
  os << "in={";
  join(input_names());
  os << "} out={";
  join(output_names());
  os << "}";
  return os.str();
}

EventSequence::EventSequence(std::string event_id, FeatureSchema schema, Eigen::MatrixXd frames,
                             std::vector<std::int64_t> timestamps_ms)
    : event_id_(std::move(event_id)),
      schema_(std::move(schema)),
      frames_(std::move(frames)),
      timestamps_ms_(std::move(timestamps_ms)) {
  if (frames_.rows() < 1)
    throw DataError("event '" + event_id_ + "': no frames");
  if (frames_.cols() != schema_.dim())
    throw DataError("event '" + event_id_ + "': frame dimension " +
                    std::to_string(frames_.cols()) + " != schema dimension " +
                    std::to_string(schema_.dim()));
  if (!frames_.allFinite())
    throw DataError("event '" + event_id_ + "': non-finite frame value");
  if (static_cast<Eigen::Index>(timestamps_ms_.size()) != frames_.rows())
    throw DataError("event '" + event_id_ + "': timestamp count != frame count");
  for (std::size_t t = 1; t < timestamps_ms_.size(); ++t) {
    if (timestamps_ms_[t] <= timestamps_ms_[t - 1])
      throw DataError("event '" + event_id_ + "': timestamps not strictly increasing at index " +
                      std::to_string(t));
  }
}

EventSequence EventSequence::with_uniform_timestamps(std::string event_id, FeatureSchema schema,
                                                     Eigen::MatrixXd frames,
                                                     std::int64_t start_ms, std::int64_t step_ms) {
  std::vector<std::int64_t> ts(static_cast<std::size_t>(frames.rows()));
  for (std::size_t t = 0; t < ts.size(); ++t)
    ts[t] = start_ms + static_cast<std::int64_t>(t) * step_ms;
  return EventSequence(std::move(event_id), std::move(schema), std::move(frames), std::move(ts));
}

}  // namespace hmmgmr
