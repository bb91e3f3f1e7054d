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

#ifndef ALIGNDRAW_RUN_CONFIG_HPP_
#define ALIGNDRAW_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "aligndraw/dataset.hpp"
#include "aligndraw/eval.hpp"
#include "aligndraw/model.hpp"
#include "aligndraw/trainer.hpp"

namespace aligndraw {

struct DataConfig {
  /// IDX archive paths; "none" selects the procedural glyph pool.
  std::string digit_images = "none";
  std::string digit_labels = "none";
  std::size_t glyphs_per_class = 200;
  std::size_t digit_size = 28;
  std::size_t margin = 2;
  double two_digit_fraction = 0.5;
  ConfigurationSet heldout;
  std::size_t train_samples = 10000;
  std::size_t test_samples = 1000;
  std::size_t heldout_samples = 1000;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct EvalConfig {
  std::size_t bound_samples = 1;
  std::size_t bound_images = 200;
  std::size_t ssi_captions = 20;
  std::size_t ssi_samples = kSsiSamplesPerCaption;
  std::size_t retrieval_pool = 200;
  std::size_t retrieval_samples = 1;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

/// Everything that determines a run. The model vocabulary size is not a key:
/// it always equals the caption vocabulary.
struct RunConfig {
  ModelConfig model;
  TrainSchedule schedule;
  DataConfig data;
  EvalConfig eval;
  std::uint64_t seed = 1;

  void validate() const;
  SceneGeometry scene() const;

  static RunConfig mnist();
  static RunConfig micro();

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// "key = value" lines; '#' starts a comment. Every key must appear exactly
/// once and unknown keys are rejected.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical document; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& c);

}  // namespace aligndraw

#endif  // ALIGNDRAW_RUN_CONFIG_HPP_
