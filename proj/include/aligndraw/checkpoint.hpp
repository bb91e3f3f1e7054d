// Copyright 2026 The aligndraw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ALIGNDRAW_CHECKPOINT_HPP_
#define ALIGNDRAW_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aligndraw/run_config.hpp"
#include "aligndraw/trainer.hpp"

namespace aligndraw {

/// File layout:
///   "ALIGNDRAW-CKPT 1\n"
///   manifest lines "key = value\n" (the run config, then vocab,
///   epochs_done and opt_step), closed by "end-manifest\n"
///   u32 tensor count, then per tensor sorted by name: u32 name length,
///   name bytes, u32 rank, u64 extents, little-endian f64 payload
///   u64 FNV-1a hash of every preceding byte
/// Optimizer accumulators are stored as "opt/<param name>".
struct Checkpoint {
  RunConfig run;
  TrainState state;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes via a temporary file and rename.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

}  // namespace aligndraw

#endif  // ALIGNDRAW_CHECKPOINT_HPP_
