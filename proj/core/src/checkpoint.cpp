#include "cropattn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "cropattn/errors.hpp"

namespace cropattn {

namespace {

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 ||
      static_cast<size_t>(rows) * static_cast<size_t>(cols) != data.size()) {
    throw SchemaError("checkpoint matrix '" + name + "' has inconsistent shape");
  }
  Matrix m(rows, cols);
  size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[at++];
  }
  return m;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "cropattn-checkpoint";
  j["version"] = 1;

  const ModelConfig& c = ckpt.params.config;
  j["config"]["num_layers"] = c.num_layers;
  j["config"]["num_heads"] = c.num_heads;
  j["config"]["model_dim"] = c.model_dim;
  j["config"]["key_dim"] = c.key_dim;
  j["config"]["value_dim"] = c.value_dim;
  j["config"]["feed_forward_dim"] = c.feed_forward_dim;
  j["config"]["num_classes"] = c.num_classes;
  j["config"]["t_max"] = c.t_max;
  j["config"]["layer_norm_eps"] = c.layer_norm_eps;

  j["class_vocabulary"] = ckpt.class_vocabulary;

  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for_each_parameter(ckpt.params, [&](const std::string& name, const Matrix& m) {
    params[name] = matrix_to_json(m);
  });
  j["parameters"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  if (j.value("format", "") != "cropattn-checkpoint") {
    throw SchemaError("'" + path + "' is not a model checkpoint");
  }

  Checkpoint ckpt;
  try {
    const auto& c = j.at("config");
    ckpt.params.config.num_layers = c.at("num_layers").get<int>();
    ckpt.params.config.num_heads = c.at("num_heads").get<int>();
    ckpt.params.config.model_dim = c.at("model_dim").get<int>();
    ckpt.params.config.key_dim = c.at("key_dim").get<int>();
    ckpt.params.config.value_dim = c.at("value_dim").get<int>();
    ckpt.params.config.feed_forward_dim = c.at("feed_forward_dim").get<int>();
    ckpt.params.config.num_classes = c.at("num_classes").get<int>();
    ckpt.params.config.t_max = c.at("t_max").get<int>();
    ckpt.params.config.layer_norm_eps = c.at("layer_norm_eps").get<double>();
    ckpt.class_vocabulary = j.at("class_vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("'" + path + "': " + e.what());
  }
  ckpt.params.config.validate();

  // Allocate by shape, then fill by name so file order doesn't matter.
  const ModelConfig cfg = ckpt.params.config;
  Rng rng(0);
  ckpt.params = ParameterSet::init(cfg, rng);
  const auto& params = j.at("parameters");
  for_each_parameter(ckpt.params, [&](const std::string& name, Matrix& m) {
    if (!params.contains(name)) {
      throw SchemaError("checkpoint is missing parameter '" + name + "'");
    }
    Matrix loaded = matrix_from_json(params.at(name), name);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw SchemaError("checkpoint parameter '" + name + "' has the wrong shape");
    }
    m = std::move(loaded);
  });
  if (!all_finite(ckpt.params)) {
    throw SchemaError("checkpoint '" + path + "' contains non-finite values");
  }
  return ckpt;
}

} // namespace cropattn
