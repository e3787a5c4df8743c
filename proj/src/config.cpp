#include "gramsyn/config.hpp"

#include <fstream>
#include <sstream>

#include "gramsyn/errors.hpp"
#include "gramsyn/io.hpp"

namespace gramsyn {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    fail(ErrorKind::Schema, std::string(where) + ": missing required key '" + key + "'");
  return *it;
}

std::vector<std::string> string_list(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::Schema, std::string(what) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) fail(ErrorKind::Schema, std::string(what) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<std::vector<std::string>> string_matrix(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::Schema, std::string(what) + " must be an array of rows");
  std::vector<std::vector<std::string>> out;
  for (const auto& row : j) out.push_back(string_list(row, what));
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Schema, std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg;
  {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(io::fnv1a64(text)));
    cfg.config_hash = buf;
  }

  const json& model = require(doc, "model", "config");
  ModelConfig& mc = cfg.model;
  mc.dimension = require(model, "dimension", "model").get<int>();
  mc.inputs = require(model, "inputs", "model").get<int>();
  mc.t0 = require(model, "t0", "model").get<double>();
  mc.T = require(model, "T", "model").get<double>();
  if (model.contains("drift")) mc.drift = string_list(model["drift"], "model.drift");
  mc.input_matrix = string_matrix(require(model, "input_matrix", "model"), "model.input_matrix");
  if (model.contains("modulation"))
    mc.modulation = string_matrix(model["modulation"], "model.modulation");
  if (model.contains("params")) {
    if (!model["params"].is_object()) fail(ErrorKind::Schema, "model.params must be an object");
    for (auto it = model["params"].begin(); it != model["params"].end(); ++it)
      mc.params[it.key()] = it.value().get<double>();
  }

  if (model.contains("bounds")) {
    const json& b = model["bounds"];
    if (b.contains("lambda1")) mc.lambda1 = b["lambda1"].get<double>();
    if (b.contains("lambda2")) mc.lambda2 = b["lambda2"].get<double>();
    if (b.contains("l_b")) mc.l_b = b["l_b"].get<double>();
    if (b.contains("b_sup")) mc.b_sup = b["b_sup"].get<double>();
    if (b.contains("a_sup")) mc.a_sup = b["a_sup"].get<double>();
    if (b.contains("b_lower")) mc.b_lower = b["b_lower"].get<std::string>();
  }

  if (model.contains("hopfield")) {
    const json& h = model["hopfield"];
    HopfieldParams hp;
    const json& dd = require(h, "D", "model.hopfield");
    if (!dd.is_array()) fail(ErrorKind::Schema, "hopfield.D must be an array");
    for (const auto& v : dd) hp.decay.push_back(v.get<double>());
    const json& ww = require(h, "W", "model.hopfield");
    if (!ww.is_array()) fail(ErrorKind::Schema, "hopfield.W must be a matrix");
    const int d = static_cast<int>(ww.size());
    hp.connectivity = Mat(d, d);
    for (int i = 0; i < d; ++i) {
      if (!ww[i].is_array() || static_cast<int>(ww[i].size()) != d)
        fail(ErrorKind::Schema, "hopfield.W must be square");
      for (int j = 0; j < d; ++j) hp.connectivity(i, j) = ww[i][j].get<double>();
    }
    mc.hopfield = std::move(hp);
  }

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    if (g.contains("nodes")) cfg.grid.nodes = g["nodes"].get<int>();
    if (g.contains("integrator_step")) cfg.grid.integrator_step = g["integrator_step"].get<double>();
  }
  if (cfg.grid.nodes < 2) fail(ErrorKind::Schema, "grid.nodes must be >= 2");
  if (!(cfg.grid.integrator_step > 0.0))
    fail(ErrorKind::Schema, "grid.integrator_step must be positive");

  if (doc.contains("run")) cfg.run = doc["run"];
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace gramsyn
