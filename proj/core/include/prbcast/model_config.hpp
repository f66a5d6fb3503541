#pragma once

#include <cstdint>
#include <string>

namespace prbcast {

enum class ModelKind {
  kSeasonalNaive,
  kLstm,
  kSff,
  kDeepar,
  kTransformer,
};

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);  // ConfigError on unknown

/// True for models whose output is a predictive distribution.
bool is_probabilistic(ModelKind kind);

/// Hyperparameters for one forecaster. Fields irrelevant to a kind are
/// ignored by it (e.g. num_heads outside the transformer).
struct ModelConfig {
  ModelKind kind = ModelKind::kDeepar;
  int context_length = 192;
  int horizon = 48;
  int hidden_size = 40;
  int num_layers = 2;
  int epochs = 200;
  int batch_size = 32;
  int batches_per_epoch = 8;
  double learning_rate = 1e-3;
  int num_sample_paths = 100;
  int season_length = 96;  ///< seasonal-naive period; also the MASE scale season
  int num_heads = 4;       ///< transformer
  int model_dim = 32;      ///< transformer
  std::uint64_t seed = 0;
  bool use_positional_encoding = true;  ///< transformer diagnostic knob

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

}  // namespace prbcast
