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

#ifndef ALIGNDRAW_TRAINER_HPP_
#define ALIGNDRAW_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aligndraw/model.hpp"
#include "aligndraw/rng.hpp"

namespace aligndraw {

struct TrainSchedule {
  std::size_t epochs = 150;
  std::size_t samples_per_epoch = 10000;
  std::size_t batch_size = 100;
  double initial_lr = 1e-3;
  double drop_lr = 1e-4;
  /// Epochs after this one use drop_lr.
  std::size_t drop_epoch = 110;
  double clip_norm = 10.0;
  double rmsprop_decay = 0.95;
  double rmsprop_epsilon = 1e-6;
  double init_std = 0.01;

  void validate() const;
  /// Learning rate for a 1-based epoch index.
  double lr_for_epoch(std::size_t epoch) const;

  static TrainSchedule mnist();
  static TrainSchedule coco();
  static TrainSchedule micro();

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

/// Dense gradients aligned with ModelParams positions.
using GradTable = std::vector<Tensor>;

GradTable zero_grads(const ModelParams& params);
GradTable dense_grads(const ModelParams& params, const Gradients& sparse);
double global_norm(const GradTable& grads);

/// Rescales every gradient by threshold / g when the global norm g exceeds
/// the threshold.
GradTable clip_gradients(GradTable grads, double threshold);

struct OptState {
  std::vector<Tensor> accumulators;
  double decay = 0.95;
  double epsilon = 1e-6;
  std::uint64_t step = 0;

  static OptState for_params(const ModelParams& params, double decay,
                             double epsilon);
  friend bool operator==(const OptState&, const OptState&) = default;
};

/// acc = decay acc + (1 - decay) g^2; p -= lr g / sqrt(acc + eps).
void rmsprop_step(ModelParams& params, const GradTable& grads, OptState& state,
                  double lr);

/// Weights ~ N(0, std^2); LSTM, alignment and head biases start at zero.
ModelParams init_params(const ModelConfig& cfg, RngStream& rng,
                        double std = 0.01);

struct TrainingPair {
  Tensor image;
  std::vector<std::size_t> codes;
};

using SampleSource = std::function<TrainingPair(RngStream&)>;

struct SampleGradient {
  double loss = 0;  // minus the bound
  Gradients grads;
};

SampleGradient sample_gradient(const ModelParams& params,
                               const TrainingPair& pair,
                               std::span<const Tensor> noise);

struct BatchResult {
  double mean_loss = 0;
  GradTable grads;             // of the mean loss
  std::vector<double> bounds;  // per sample
};

/// Mean-loss gradient over a batch. Samples are split into a fixed number of
/// contiguous chunks reduced in order, so the result does not depend on the
/// thread count or on `parallel`.
BatchResult batch_gradient(const ModelParams& params,
                           std::span<const TrainingPair> batch,
                           std::span<const std::vector<Tensor>> noise,
                           bool parallel = true);

struct TrainState {
  ModelParams params;
  OptState opt;
  std::size_t epochs_done = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_bound = 0;
  double lr = 0;
  double wall_seconds = 0;
};

struct TrainOptions {
  /// Stop after this many epochs in this call; 0 runs to the schedule's end.
  std::size_t max_epochs_this_call = 0;
  bool parallel = true;
  std::function<void(const TrainState&, const EpochMetrics&)> on_epoch;
};

struct TrainOutcome {
  TrainState state;
  std::vector<EpochMetrics> log;
  bool aborted = false;
  std::string abort_reason;
};

TrainState start_training(const ModelConfig& cfg, const TrainSchedule& sched,
                          std::uint64_t seed);

/// Runs epochs state.epochs_done + 1 .. schedule.epochs. Every epoch's data
/// and noise derive from (seed, epoch, sample), so resuming from a saved
/// state continues bit-identically. A non-finite loss stops training and
/// leaves the state at the end of the last completed epoch.
TrainOutcome train(TrainState state, const TrainSchedule& sched,
                   const SampleSource& source, std::uint64_t seed,
                   const TrainOptions& options = {});

}  // namespace aligndraw

#endif  // ALIGNDRAW_TRAINER_HPP_
