#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ofsr/adam.hpp"
#include "ofsr/model.hpp"

namespace ofsr {

// Single-file binary checkpoint. Layout (all little-endian):
//   8 bytes   magic "OFSRCKP1"
//   u32       format version (1)
//   u32 + n   model config as JSON text
//   u64       FNV-1a hash of that JSON
//   i32       epoch (next epoch to run)
//   u32       layer count, then per layer:
//               u32 + n  layer path
//               4 x i32  weight shape, f32 weight data
//               4 x i32  bias shape,   f32 bias data
//   u8        optimizer-state flag; when set:
//               i64 step count, f32 beta1 / beta2 / epsilon,
//               per layer: m and v tensors for weight and bias
// Files are written to a temp path and renamed into place.

struct Checkpoint {
  OfsrConfig config;
  ModelParams<float> params;
  std::optional<AdamState<float>> adam;
  int epoch = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ofsr
