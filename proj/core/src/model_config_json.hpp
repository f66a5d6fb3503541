#pragma once

// Internal: ModelConfig from a JSON object, with explicit defaults.

#include <nlohmann/json.hpp>

#include "prbcast/model_config.hpp"

namespace prbcast::detail {

template <typename T>
void read_json_field(const nlohmann::json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig defaults) {
  ModelConfig m = defaults;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  read_json_field(j, "context_length", m.context_length);
  read_json_field(j, "horizon", m.horizon);
  read_json_field(j, "hidden_size", m.hidden_size);
  read_json_field(j, "num_layers", m.num_layers);
  read_json_field(j, "epochs", m.epochs);
  read_json_field(j, "batch_size", m.batch_size);
  read_json_field(j, "batches_per_epoch", m.batches_per_epoch);
  read_json_field(j, "learning_rate", m.learning_rate);
  read_json_field(j, "num_sample_paths", m.num_sample_paths);
  read_json_field(j, "season_length", m.season_length);
  read_json_field(j, "num_heads", m.num_heads);
  read_json_field(j, "model_dim", m.model_dim);
  read_json_field(j, "seed", m.seed);
  return m;
}

}  // namespace prbcast::detail
