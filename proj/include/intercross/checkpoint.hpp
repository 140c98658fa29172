#pragma once

#include <string>

#include "intercross/model.hpp"

namespace intercross {

struct Checkpoint {
  ModelConfig config;
  ParamStore params;
  long long step = 0;
};

// Directory layout: index.json (config, step, tensor table) + params.f64
// (concatenated little-endian float64 blobs, row-major).
void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace intercross
