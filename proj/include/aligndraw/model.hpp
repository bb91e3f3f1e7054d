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

#ifndef ALIGNDRAW_MODEL_HPP_
#define ALIGNDRAW_MODEL_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aligndraw/attention.hpp"
#include "aligndraw/canvas.hpp"
#include "aligndraw/latent.hpp"
#include "aligndraw/recurrent.hpp"
#include "aligndraw/rng.hpp"
#include "aligndraw/tape.hpp"

namespace aligndraw {

struct ModelConfig {
  std::size_t glimpses = 32;       // T
  std::size_t gen_hidden = 300;    // n
  std::size_t infer_hidden = 300;
  std::size_t latent = 150;        // D
  std::size_t read_patch = 8;
  std::size_t write_patch = 8;
  std::size_t height = 60;
  std::size_t width = 60;
  std::size_t encoder_hidden = 128;  // m, per direction
  std::size_t align_size = 512;      // l
  std::size_t vocab = 0;             // K
  bool use_intensity = true;
  /// When false the step-dependent sentence representation is replaced by
  /// the final encoder state (the no-alignment baseline).
  bool use_align = true;

  void validate() const;
  CanvasGeometry geometry() const { return {height, width}; }

  /// Captioned-MNIST architecture.
  static ModelConfig mnist(std::size_t vocab);
  /// 32x32 COCO architecture; kept as a documented preset.
  static ModelConfig coco(std::size_t vocab);
  /// Small configuration for tests and CI runs.
  static ModelConfig micro(std::size_t vocab);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  bool zero_init = false;
};

/// Every learnable tensor, in a fixed order determined by the config.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

/// Named parameter tensors plus the config they were built for. The
/// position of a tensor is its ParamId on a tape.
class ModelParams {
 public:
  ModelParams() = default;
  /// All-zero parameters with the shapes of param_specs(cfg).
  explicit ModelParams(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }
  std::size_t index(const std::string& name) const;
  Tensor& operator[](const std::string& name) { return tensors_[index(name)]; }
  const Tensor& operator[](const std::string& name) const {
    return tensors_[index(name)];
  }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t scalar_count() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.config_ == b.config_ && a.names_ == b.names_ &&
           a.tensors_ == b.tensors_;
  }

 private:
  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// What the model is conditioned on: caption word codes, or a fixed
/// N x 2m encoding used in place of an encoded caption.
struct Conditioning {
  std::vector<std::size_t> codes;
  std::optional<Tensor> encoding;

  static Conditioning caption(std::vector<std::size_t> codes);
  static Conditioning fixed(Tensor encoding);
};

/// Model parameters bound as leaves of one tape.
struct NetworkVars {
  const ModelConfig* config = nullptr;
  Var embedding;
  LstmWeights enc_fwd;
  LstmWeights enc_bwd;
  AlignParams align;
  LstmWeights gen;
  LstmWeights infer;
  GaussianHead prior;
  GaussianHead posterior;
  GridHead read_grid;
  WriteHeads write;
  Var h_gen0;
  Var h_infer0;
  Var canvas0;
};

NetworkVars bind_network(Tape& tape, const ModelParams& params);
LangEncoding encode_condition(const NetworkVars& net, const Conditioning& c);

/// One generative step: align on the previous state, advance the generative
/// LSTM on [z, s], and add the write output to the canvas.
struct GenerativeStep {
  Alignment alignment;
  LstmState state;
  WriteOutput write;
  Var canvas;
};

GenerativeStep generative_step(const NetworkVars& net,
                               const AlignContext& align_ctx,
                               const LangEncoding& enc, const LstmState& prev,
                               Var canvas_prev, Var z);

/// Inference-side rollout for one Monte Carlo sample.
struct InferenceRollout {
  std::vector<Var> z;
  std::vector<DiagGaussian> posterior;
  std::vector<DiagGaussian> prior;  // step 1 is the standard normal
  std::vector<Var> kl;
  std::vector<Var> canvases;  // c_0 .. c_T
  Var nll;
  Var bound;  // -nll - sum(kl)
};

InferenceRollout infer_rollout(const NetworkVars& net, const LangEncoding& enc,
                               Var x, std::span<const Tensor> noise);

/// Generative rollout driven either by standard-normal noise through the
/// prior, or directly by latent values when `noise_is_latent` is set.
struct GenerativeRollout {
  std::vector<Var> z;
  std::vector<Var> alpha;
  std::vector<GridParams> write_grid;
  std::vector<Var> canvases;  // c_0 .. c_T
};

GenerativeRollout generate_rollout(const NetworkVars& net,
                                   const LangEncoding& enc,
                                   std::span<const Tensor> noise,
                                   bool noise_is_latent);

/// -sum_i [x_i log sigmoid(c_i) + (1 - x_i) log(1 - sigmoid(c_i))], written
/// as sum(softplus(c) - x c).
Var bernoulli_nll(Var logits, Var x);
double bernoulli_nll(const Tensor& logits, const Tensor& x);

struct StepTrace {
  Tensor z;
  Tensor alpha;
  GridValues write_grid;
  Tensor canvas;  // c_t
};

struct GenTrace {
  Tensor canvas0;
  std::vector<StepTrace> steps;
  Tensor mean_image;  // sigmoid(c_T)
};

/// T standard-normal vectors of size D, drawn in step order.
std::vector<Tensor> draw_noise(RngStream& rng, const ModelConfig& cfg);

GenTrace generate(const Conditioning& cond, const ModelParams& params,
                  RngStream& rng);
GenTrace generate_from_latents(const Conditioning& cond,
                               const ModelParams& params,
                               std::span<const Tensor> latents);

struct LossReport {
  double reconstruction_nll = 0;
  std::vector<double> kl_per_step;
  double bound = 0;
};

/// Monte Carlo bound on the tape: loss is minus the bound averaged over the
/// noise sets (one per sample, each T vectors of size D).
struct BoundGraph {
  Var loss;
  LossReport report;
};

BoundGraph build_bound(const NetworkVars& net, const LangEncoding& enc, Var x,
                       std::span<const std::vector<Tensor>> noise);

/// Variational bound of x under the caption with `samples` noise draws taken
/// from `rng`. Throws when x has the wrong size or pixels outside [0, 1].
LossReport infer_bound(const Tensor& x, const Conditioning& cond,
                       const ModelParams& params, RngStream& rng,
                       std::size_t samples = 1);

void validate_image(const Tensor& x, const ModelConfig& cfg);

}  // namespace aligndraw

#endif  // ALIGNDRAW_MODEL_HPP_
