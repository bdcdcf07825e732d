#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tapret/config.hpp"
#include "tapret/model.hpp"
#include "tapret/tensor.hpp"

namespace tapret {

// Single-file binary checkpoint: magic + version byte, a config snapshot,
// epoch and seed, then length-prefixed (name, shape, little-endian f64 data)
// parameter records. Reload reproduces evaluation bit-exactly.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, Tensor>> params;

  static Checkpoint snapshot(const TrainConfig& cfg, std::uint64_t epoch, const ModelParams& model);
  // Rebuilds model weights from the named records; shapes must agree with the
  // dimensions in the stored config and the dataset feature width.
  ModelParams to_model(int d_in) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tapret
