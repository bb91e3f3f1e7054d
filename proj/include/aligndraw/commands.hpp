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

#ifndef ALIGNDRAW_COMMANDS_HPP_
#define ALIGNDRAW_COMMANDS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "aligndraw/checkpoint.hpp"
#include "aligndraw/dataset.hpp"
#include "aligndraw/eval.hpp"
#include "aligndraw/run_config.hpp"
#include "aligndraw/trainer.hpp"

namespace aligndraw {

/// Failure with a machine-readable category ("usage", "config", "io",
/// "input", "numeric").
class CommandError : public std::runtime_error {
 public:
  CommandError(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

/// Category for an arbitrary exception escaping a command.
std::string error_category(const std::exception& e);

struct DatasetSplits {
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
  std::vector<SceneSample> heldout;  // empty when nothing is held out
};

/// Digit pool resized to the scene digit size. Procedural glyphs use a
/// separate pool per `tag` so test digits are unseen in training.
DigitPool load_digit_pool(const RunConfig& run, std::uint64_t tag);
DatasetSplits synthesize_splits(const RunConfig& run);

/// Writes train/, test/, heldout/ dumps and split.txt.
void cmd_make_dataset(const RunConfig& run, const std::filesystem::path& out);

struct TrainReport {
  TrainOutcome outcome;
  std::filesystem::path last_checkpoint;
};

/// Trains, writing epoch-NNNN.ckpt after every epoch and metrics.tsv
/// (epoch, mean_bound, lr, wall_seconds). With `resume` the latest
/// checkpoint in `out` is continued.
TrainReport cmd_train(const RunConfig& run, const std::filesystem::path& out,
                      bool resume, std::size_t max_epochs = 0, bool parallel = true);

/// Latest epoch-NNNN.ckpt in dir, or empty.
std::filesystem::path latest_checkpoint(const std::filesystem::path& dir);

/// Lowercase, whitespace split, encode. Unknown words raise CommandError.
std::vector<std::size_t> encode_caption_text(const std::string& text);

/// Writes samples.pgm, a grid of sigmoid(c_T) images.
std::vector<Tensor> cmd_sample(const std::filesystem::path& checkpoint,
                               const std::string& caption, std::size_t count,
                               std::uint64_t seed, const std::filesystem::path& out);

/// Writes canvas-NN.pgm (sigmoid(c_t)), write-NN.pgm (canvas with the write
/// grid box), alpha.tsv and trace.tsv.
GenTrace cmd_trace(const std::filesystem::path& checkpoint, const std::string& caption,
                   std::uint64_t seed, const std::filesystem::path& out);

/// which: bound | ssi | retrieval. Writes eval-<which>.tsv.
std::vector<MetricRow> cmd_eval(const std::filesystem::path& checkpoint,
                                const std::string& which, std::uint64_t seed,
                                const std::filesystem::path& out);

}  // namespace aligndraw

#endif  // ALIGNDRAW_COMMANDS_HPP_
