#pragma once

#include <string>

#include <json.hpp>

#include "gramsyn/model.hpp"

namespace gramsyn {

struct GridConfig {
  int nodes = 101;
  double integrator_step = 1e-3;
};

// One JSON document drives every subcommand: a model block, a grid block and
// a free-form run block whose fields depend on the command.
struct RunConfig {
  ModelConfig model;
  GridConfig grid;
  nlohmann::json run;       // may be null
  std::string config_hash;  // fnv1a-64 of the raw bytes, hex
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace gramsyn
