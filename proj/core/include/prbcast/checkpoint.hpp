#pragma once

#include <filesystem>

#include "prbcast/forecaster.hpp"

namespace prbcast {

/// Binary checkpoint, little-endian. Layout:
///   magic "PRBC", u32 version (1),
///   u64 header length, header JSON (kind, hyperparameters, final_loss,
///   loss_curve),
///   u32 parameter count, then per parameter:
///     u32 name length, name bytes,
///     u32 rank, u64 dims[rank],
///     f64 data[product(dims)] (raw IEEE-754 bits; round-trip is lossless).
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);

/// Throws ParseError on malformed files. The embedded config makes the
/// result directly usable for forecasting.
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace prbcast
