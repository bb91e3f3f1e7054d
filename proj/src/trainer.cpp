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

#include "aligndraw/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

namespace aligndraw {
namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;   // "init"
constexpr std::uint64_t kDataTag = 0x64617461;   // "data"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973;  // "nois"
constexpr std::size_t kChunks = 8;

void add_into(GradTable& dst, const Gradients& src) {
  for (const auto& [id, g] : src) {
    auto d = dst[id].data();
    auto s = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  }
}

}  // namespace

void TrainSchedule::validate() const {
  if (epochs < 1 || samples_per_epoch < 1 || batch_size < 1) {
    throw std::invalid_argument(
        "schedule: epochs, samples_per_epoch and batch_size must be >= 1");
  }
  if (drop_epoch > epochs) {
    throw std::invalid_argument("schedule: drop_epoch exceeds epochs");
  }
  if (!(clip_norm > 0.0)) {
    throw std::invalid_argument("schedule: clip_norm must be > 0");
  }
  if (!(initial_lr > 0.0) || !(drop_lr > 0.0)) {
    throw std::invalid_argument("schedule: learning rates must be > 0");
  }
  if (!(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0) ||
      !(rmsprop_epsilon > 0.0) || !(init_std > 0.0)) {
    throw std::invalid_argument(
        "schedule: need 0 <= decay < 1, epsilon > 0, init_std > 0");
  }
}

double TrainSchedule::lr_for_epoch(std::size_t epoch) const {
  return epoch > drop_epoch ? drop_lr : initial_lr;
}

TrainSchedule TrainSchedule::mnist() { return TrainSchedule{}; }

TrainSchedule TrainSchedule::coco() {
  TrainSchedule s;
  s.epochs = 18;
  s.drop_epoch = 11;
  return s;
}

TrainSchedule TrainSchedule::micro() {
  TrainSchedule s;
  s.epochs = 30;
  s.samples_per_epoch = 1000;
  s.batch_size = 10;
  s.drop_epoch = 30;
  return s;
}

GradTable zero_grads(const ModelParams& params) {
  GradTable g;
  g.reserve(params.size());
  for (const Tensor& t : params.tensors()) g.push_back(Tensor::zeros_like(t));
  return g;
}

GradTable dense_grads(const ModelParams& params, const Gradients& sparse) {
  GradTable g = zero_grads(params);
  add_into(g, sparse);
  return g;
}

double global_norm(const GradTable& grads) {
  double s = 0.0;
  for (const Tensor& g : grads) s += dot(g.data(), g.data());
  return std::sqrt(s);
}

GradTable clip_gradients(GradTable grads, double threshold) {
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("clip_gradients: threshold must be > 0");
  }
  const double norm = global_norm(grads);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= scale;
  }
  return grads;
}

OptState OptState::for_params(const ModelParams& params, double decay,
                              double epsilon) {
  OptState s;
  s.decay = decay;
  s.epsilon = epsilon;
  for (const Tensor& t : params.tensors())
    s.accumulators.push_back(Tensor::zeros_like(t));
  return s;
}

void rmsprop_step(ModelParams& params, const GradTable& grads, OptState& state,
                  double lr) {
  if (grads.size() != params.size() ||
      state.accumulators.size() != params.size()) {
    throw std::invalid_argument("rmsprop_step: gradient table does not match "
                                "parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params.tensor(p);
    Tensor& acc = state.accumulators[p];
    const Tensor& g = grads[p];
    if (g.shape() != w.shape() || acc.shape() != w.shape()) {
      throw std::invalid_argument("rmsprop_step: shape mismatch for " +
                                  params.name(p) + ": " +
                                  shape_string(g.shape()) + " vs " +
                                  shape_string(w.shape()));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      acc[i] = state.decay * acc[i] + (1.0 - state.decay) * g[i] * g[i];
      w[i] -= lr * g[i] / std::sqrt(acc[i] + state.epsilon);
    }
  }
  ++state.step;
}

ModelParams init_params(const ModelConfig& cfg, RngStream& rng, double std) {
  ModelParams params(cfg);
  const auto specs = param_specs(cfg);
  for (std::size_t p = 0; p < specs.size(); ++p) {
    if (specs[p].zero_init) continue;
    for (double& v : params.tensor(p).data()) v = std * rng.normal();
  }
  return params;
}

SampleGradient sample_gradient(const ModelParams& params,
                               const TrainingPair& pair,
                               std::span<const Tensor> noise) {
  Tape tape;
  NetworkVars net = bind_network(tape, params);
  LangEncoding enc = encode_condition(net, Conditioning::caption(pair.codes));
  const std::vector<Tensor> one(noise.begin(), noise.end());
  SampleGradient out;
  try {
    BoundGraph g = build_bound(net, enc, tape.constant(pair.image),
                               std::span<const std::vector<Tensor>>(&one, 1));
    out.loss = g.loss.value().item();
    if (std::isfinite(out.loss)) out.grads = tape.backward(g.loss);
  } catch (const std::domain_error&) {
    // Numeric breakdown inside the rollout counts as a non-finite loss.
    out.loss = std::numeric_limits<double>::quiet_NaN();
    out.grads.clear();
  }
  return out;
}

BatchResult batch_gradient(const ModelParams& params,
                           std::span<const TrainingPair> batch,
                           std::span<const std::vector<Tensor>> noise,
                           bool parallel) {
  if (batch.empty() || noise.size() != batch.size()) {
    throw std::invalid_argument("batch_gradient: need one noise set per sample");
  }
  const std::size_t n = batch.size();
  const std::size_t chunks = std::min(kChunks, n);
  std::vector<GradTable> chunk_grads(chunks);
  std::vector<double> losses(n, 0.0);
  std::vector<std::exception_ptr> errors(chunks);
  auto run_chunk = [&](std::size_t c) {
    try {
      GradTable acc = zero_grads(params);
      const std::size_t begin = c * n / chunks, end = (c + 1) * n / chunks;
      for (std::size_t i = begin; i < end; ++i) {
        SampleGradient sg = sample_gradient(params, batch[i], noise[i]);
        losses[i] = sg.loss;
        add_into(acc, sg.grads);
      }
      chunk_grads[c] = std::move(acc);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (parallel) {
    const auto count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < count; ++c)
      run_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  BatchResult out;
  out.grads = std::move(chunk_grads[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t p = 0; p < out.grads.size(); ++p) {
      auto d = out.grads[p].data();
      auto s = chunk_grads[c][p].data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (Tensor& g : out.grads)
    for (double& v : g.data()) v *= inv;
  double total = 0.0;
  for (double l : losses) total += l;
  out.mean_loss = total * inv;
  out.bounds.reserve(n);
  for (double l : losses) out.bounds.push_back(-l);
  return out;
}

TrainState start_training(const ModelConfig& cfg, const TrainSchedule& sched,
                          std::uint64_t seed) {
  sched.validate();
  RngStream rng = RngStream(seed).derive(kInitTag);
  TrainState s;
  s.params = init_params(cfg, rng, sched.init_std);
  s.opt = OptState::for_params(s.params, sched.rmsprop_decay,
                               sched.rmsprop_epsilon);
  return s;
}

TrainOutcome train(TrainState state, const TrainSchedule& sched,
                   const SampleSource& source, std::uint64_t seed,
                   const TrainOptions& options) {
  sched.validate();
  TrainOutcome out;
  const RngStream root(seed);
  const ModelConfig& cfg = state.params.config();
  std::size_t ran = 0;
  for (std::size_t epoch = state.epochs_done + 1; epoch <= sched.epochs;
       ++epoch) {
    if (options.max_epochs_this_call && ran == options.max_epochs_this_call)
      break;
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = sched.lr_for_epoch(epoch);
    RngStream data_rng = root.derive(kDataTag, epoch);
    // Work on a copy so an abort leaves `state` at the last completed epoch.
    ModelParams params = state.params;
    OptState opt = state.opt;
    double bound_sum = 0.0;
    for (std::size_t start = 0; start < sched.samples_per_epoch;
         start += sched.batch_size) {
      const std::size_t count =
          std::min(sched.batch_size, sched.samples_per_epoch - start);
      std::vector<TrainingPair> batch;
      std::vector<std::vector<Tensor>> noise;
      batch.reserve(count);
      noise.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        batch.push_back(source(data_rng));
        RngStream nrng = root.derive(kNoiseTag, (epoch << 32) + start + i);
        noise.push_back(draw_noise(nrng, cfg));
      }
      BatchResult br = batch_gradient(params, batch, noise, options.parallel);
      if (!std::isfinite(br.mean_loss) || !std::isfinite(global_norm(br.grads))) {
        out.aborted = true;
        out.abort_reason = "non-finite loss in epoch " + std::to_string(epoch);
        out.state = std::move(state);
        return out;
      }
      for (double b : br.bounds) bound_sum += b;
      rmsprop_step(params, clip_gradients(std::move(br.grads), sched.clip_norm),
                   opt, lr);
    }
    state.params = std::move(params);
    state.opt = std::move(opt);
    state.epochs_done = epoch;
    EpochMetrics m;
    m.epoch = epoch;
    m.mean_bound = bound_sum / static_cast<double>(sched.samples_per_epoch);
    m.lr = lr;
    m.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    out.log.push_back(m);
    if (options.on_epoch) options.on_epoch(state, m);
    ++ran;
  }
  out.state = std::move(state);
  return out;
}

}  // namespace aligndraw
