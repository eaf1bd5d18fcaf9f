#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "hmmgmr/model.hpp"

namespace hmmgmr {

// Versioned JSON model document; field-by-field description in
// docs/formats.md. Serialization validates the model first and round-trips
// every floating-point value exactly (shortest round-trip representation).
std::string serialize_model(const HmmModel& model);
std::string serialize_model(const GmmModel& model);

// Throws DataError on malformed documents, unsupported versions, or
// invariant violations (named in the message).
std::variant<HmmModel, GmmModel> deserialize_model(const std::string& text);
HmmModel deserialize_hmm(const std::string& text);
GmmModel deserialize_gmm(const std::string& text);

void save_model(const std::filesystem::path& path, const HmmModel& model);
void save_model(const std::filesystem::path& path, const GmmModel& model);
std::variant<HmmModel, GmmModel> load_model(const std::filesystem::path& path);
HmmModel load_hmm(const std::filesystem::path& path);
GmmModel load_gmm(const std::filesystem::path& path);

}  // namespace hmmgmr
