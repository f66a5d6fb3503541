#include "prbcast/model_config.hpp"

#include "prbcast/errors.hpp"

namespace prbcast {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kSeasonalNaive: return "seasonal_naive";
    case ModelKind::kLstm: return "lstm";
    case ModelKind::kSff: return "sff";
    case ModelKind::kDeepar: return "deepar";
    case ModelKind::kTransformer: return "transformer";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "seasonal_naive" || name == "sn") return ModelKind::kSeasonalNaive;
  if (name == "lstm") return ModelKind::kLstm;
  if (name == "sff") return ModelKind::kSff;
  if (name == "deepar") return ModelKind::kDeepar;
  if (name == "transformer") return ModelKind::kTransformer;
  throw ConfigError("unknown model kind '" + name +
                    "' (expected seasonal_naive|lstm|sff|deepar|transformer)");
}

bool is_probabilistic(ModelKind kind) {
  return kind == ModelKind::kSff || kind == ModelKind::kDeepar || kind == ModelKind::kTransformer;
}

void ModelConfig::validate() const {
  auto positive = [](const char* field, long long v) {
    if (v <= 0) {
      throw ConfigError(std::string("model config: ") + field + " must be positive, got " +
                        std::to_string(v));
    }
  };
  positive("horizon", horizon);
  if (kind == ModelKind::kSeasonalNaive) {
    positive("season_length", season_length);
    return;
  }
  positive("context_length", context_length);
  positive("hidden_size", hidden_size);
  positive("num_layers", num_layers);
  positive("epochs", epochs);
  positive("batch_size", batch_size);
  positive("batches_per_epoch", batches_per_epoch);
  if (!(learning_rate > 0.0)) throw ConfigError("model config: learning_rate must be positive");
  if (is_probabilistic(kind) && num_sample_paths < 2) {
    throw ConfigError("model config: num_sample_paths must be >= 2, got " +
                      std::to_string(num_sample_paths));
  }
  if (kind == ModelKind::kTransformer) {
    positive("num_heads", num_heads);
    positive("model_dim", model_dim);
    if (model_dim % num_heads != 0) {
      throw ConfigError("model config: model_dim " + std::to_string(model_dim) +
                        " not divisible by num_heads " + std::to_string(num_heads));
    }
  }
}

}  // namespace prbcast
