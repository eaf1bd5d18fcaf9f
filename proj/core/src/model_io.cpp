#include "hmmgmr/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hmmgmr/version.hpp"

namespace hmmgmr {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw DataError("model document: '" + field + "' is not an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError("model document: '" + field + "' has a non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty())
    throw DataError("model document: '" + field + "' is not a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw DataError("model document: '" + field + "' row " + std::to_string(r) +
                      " has inconsistent length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw DataError("model document: '" + field + "' has a non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

json header_json(const char* kind, const FeatureSchema& schema, int k) {
  json doc;
  doc["format"] = "hmmgmr-model";
  doc["version"] = kModelFormatVersion;
  doc["kind"] = kind;
  doc["features"] = schema.names();
  doc["input_indices"] = schema.input_indices();
  doc["output_indices"] = schema.output_indices();
  doc["k"] = k;
  return doc;
}

json components_to_json(const std::vector<GaussianComponent>& components) {
  json out = json::array();
  for (const auto& g : components) {
    json c;
    c["mean"] = vector_to_json(g.mean);
    c["covariance"] = matrix_to_json(g.covariance);
    out.push_back(c);
  }
  return out;
}

json parse_document(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw DataError("model document: not valid JSON");
  if (!doc.is_object()) throw DataError("model document: top level is not an object");
  if (doc.value("format", std::string()) != "hmmgmr-model")
    throw DataError("model document: missing or unexpected 'format' field");
  if (!doc.contains("version") || !doc["version"].is_number_integer())
    throw DataError("model document: missing 'version' field");
  const int version = doc["version"].get<int>();
  if (version != kModelFormatVersion)
    throw DataError("model document: unsupported version " + std::to_string(version) +
                    " (expected " + std::to_string(kModelFormatVersion) + ")");
  return doc;
}

std::vector<int> indices_from_json(const json& j, const std::string& field) {
  std::vector<int> out;
  if (!j.is_array()) throw DataError("model document: '" + field + "' is not an array");
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw DataError("model document: '" + field + "' entry not an integer");
    out.push_back(e.get<int>());
  }
  return out;
}

FeatureSchema schema_from_json(const json& doc) {
  if (!doc.contains("features")) throw DataError("model document: missing 'features'");
  std::vector<std::string> names = doc["features"].get<std::vector<std::string>>();
  if (doc.contains("input_indices") != doc.contains("output_indices"))
    throw DataError("model document: input_indices and output_indices must be given together");
  if (doc.contains("input_indices")) {
    return FeatureSchema(std::move(names), indices_from_json(doc["input_indices"], "input_indices"),
                         indices_from_json(doc["output_indices"], "output_indices"));
  }
  return FeatureSchema::with_output(std::move(names));
}

std::vector<GaussianComponent> components_from_json(const json& doc, int k) {
  if (!doc.contains("components") || !doc["components"].is_array())
    throw DataError("model document: missing 'components' array");
  const auto& arr = doc["components"];
  if (static_cast<int>(arr.size()) != k)
    throw DataError("model document: 'components' has " + std::to_string(arr.size()) +
                    " entries, 'k' is " + std::to_string(k));
  std::vector<GaussianComponent> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& c = arr[i];
    if (!c.is_object() || !c.contains("mean") || !c.contains("covariance"))
      throw DataError("model document: component " + std::to_string(i) +
                      " missing 'mean' or 'covariance'");
    out.push_back(GaussianComponent{vector_from_json(c["mean"], "mean"),
                                    matrix_from_json(c["covariance"], "covariance")});
  }
  return out;
}

int k_from_json(const json& doc) {
  if (!doc.contains("k") || !doc["k"].is_number_integer())
    throw DataError("model document: missing integer 'k'");
  const int k = doc["k"].get<int>();
  if (k < 1) throw DataError("model document: 'k' must be >= 1");
  return k;
}

}  // namespace

std::string serialize_model(const HmmModel& model) {
  model.validate();
  json doc = header_json("hmm", model.schema, model.k());
  doc["pi"] = vector_to_json(model.pi);
  doc["trans"] = matrix_to_json(model.trans);
  doc["components"] = components_to_json(model.components);
  return doc.dump(2) + "\n";
}

std::string serialize_model(const GmmModel& model) {
  model.validate();
  json doc = header_json("gmm", model.schema, model.k());
  doc["weights"] = vector_to_json(model.weights);
  doc["components"] = components_to_json(model.components);
  return doc.dump(2) + "\n";
}

std::variant<HmmModel, GmmModel> deserialize_model(const std::string& text) {
  json doc = parse_document(text);
  const std::string kind = doc.value("kind", std::string());
  const int k = k_from_json(doc);
  FeatureSchema schema = schema_from_json(doc);
  auto components = components_from_json(doc, k);

  if (kind == "hmm") {
    HmmModel model;
    model.schema = std::move(schema);
    model.components = std::move(components);
    // a minimal single-state document may omit pi/trans; they are forced
    if (doc.contains("pi")) {
      model.pi = vector_from_json(doc["pi"], "pi");
    } else if (k == 1) {
      model.pi = Eigen::VectorXd::Ones(1);
    } else {
      throw DataError("model document: missing 'pi'");
    }
    if (doc.contains("trans")) {
      model.trans = matrix_from_json(doc["trans"], "trans");
    } else if (k == 1) {
      model.trans = Eigen::MatrixXd::Ones(1, 1);
    } else {
      throw DataError("model document: missing 'trans'");
    }
    model.validate();
    return model;
  }
  if (kind == "gmm") {
    GmmModel model;
    model.schema = std::move(schema);
    model.components = std::move(components);
    if (doc.contains("weights")) {
      model.weights = vector_from_json(doc["weights"], "weights");
    } else if (k == 1) {
      model.weights = Eigen::VectorXd::Ones(1);
    } else {
      throw DataError("model document: missing 'weights'");
    }
    model.validate();
    return model;
  }
  throw DataError("model document: unknown kind '" + kind + "'");
}

HmmModel deserialize_hmm(const std::string& text) {
  auto m = deserialize_model(text);
  if (auto* hmm = std::get_if<HmmModel>(&m)) return std::move(*hmm);
  throw DataError("model document: expected kind 'hmm'");
}

GmmModel deserialize_gmm(const std::string& text) {
  auto m = deserialize_model(text);
  if (auto* gmm = std::get_if<GmmModel>(&m)) return std::move(*gmm);
  throw DataError("model document: expected kind 'gmm'");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

}  // namespace

void save_model(const std::filesystem::path& path, const HmmModel& model) {
  write_file(path, serialize_model(model));
}

void save_model(const std::filesystem::path& path, const GmmModel& model) {
  write_file(path, serialize_model(model));
}

std::variant<HmmModel, GmmModel> load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

HmmModel load_hmm(const std::filesystem::path& path) { return deserialize_hmm(read_file(path)); }

GmmModel load_gmm(const std::filesystem::path& path) { return deserialize_gmm(read_file(path)); }

}  // namespace hmmgmr
