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

#include "aligndraw/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aligndraw {

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> sizes[] = {
      {"glimpses", glimpses},         {"gen_hidden", gen_hidden},
      {"infer_hidden", infer_hidden}, {"latent", latent},
      {"read_patch", read_patch},     {"write_patch", write_patch},
      {"height", height},             {"width", width},
      {"encoder_hidden", encoder_hidden}, {"align_size", align_size},
      {"vocab", vocab}};
  for (const auto& [name, v] : sizes) {
    if (v < 1) {
      throw std::invalid_argument(std::string("model config: ") + name +
                                  " must be >= 1");
    }
  }
}

ModelConfig ModelConfig::mnist(std::size_t vocab) {
  ModelConfig c;
  c.vocab = vocab;
  return c;
}

ModelConfig ModelConfig::coco(std::size_t vocab) {
  ModelConfig c;
  c.glimpses = 32;
  c.gen_hidden = 550;
  c.infer_hidden = 550;
  c.latent = 275;
  c.read_patch = 9;
  c.write_patch = 9;
  c.height = 32;
  c.width = 32;
  c.vocab = vocab;
  return c;
}

ModelConfig ModelConfig::micro(std::size_t vocab) {
  ModelConfig c;
  c.glimpses = 4;
  c.gen_hidden = 48;
  c.infer_hidden = 48;
  c.latent = 8;
  c.read_patch = 4;
  c.write_patch = 4;
  c.height = 12;
  c.width = 12;
  c.encoder_hidden = 16;
  c.align_size = 24;
  c.vocab = vocab;
  return c;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.encoder_hidden, n = cfg.gen_hidden,
                    ni = cfg.infer_hidden, d = cfg.latent, l = cfg.align_size;
  const std::size_t read_in = 2 * cfg.read_patch * cfg.read_patch + n;
  const std::size_t pw2 = cfg.write_patch * cfg.write_patch;
  std::vector<ParamSpec> s;
  auto lstm = [&s](const std::string& prefix, std::size_t in, std::size_t h) {
    s.push_back({prefix + ".wx", {4 * h, in}});
    s.push_back({prefix + ".wh", {4 * h, h}});
    s.push_back({prefix + ".b", {4 * h}, true});
  };
  s.push_back({"embed", {cfg.vocab, m}});
  lstm("enc_fwd", m, m);
  lstm("enc_bwd", m, m);
  s.push_back({"align.v", {l}});
  s.push_back({"align.u", {l, 2 * m}});
  s.push_back({"align.w", {l, n}});
  s.push_back({"align.b", {l}, true});
  lstm("gen", d + 2 * m, n);
  lstm("infer", read_in, ni);
  s.push_back({"prior.w_mu", {d, n}});
  s.push_back({"prior.w_sigma", {d, n}});
  s.push_back({"post.w_mu", {d, ni}});
  s.push_back({"post.w_sigma", {d, ni}});
  s.push_back({"read_grid.w", {5, n}});
  s.push_back({"read_grid.b", {5}, true});
  s.push_back({"write_grid.w", {5, n}});
  s.push_back({"write_grid.b", {5}, true});
  s.push_back({"write_patch.w", {pw2, n}});
  s.push_back({"write_patch.b", {pw2}, true});
  s.push_back({"init.h_gen", {n}});
  s.push_back({"init.h_infer", {ni}});
  s.push_back({"init.canvas", {cfg.height, cfg.width}});
  return s;
}

ModelParams::ModelParams(const ModelConfig& cfg) : config_(cfg) {
  for (auto& spec : param_specs(cfg)) {
    index_.emplace(spec.name, names_.size());
    names_.push_back(spec.name);
    tensors_.emplace_back(spec.shape);
  }
}

std::size_t ModelParams::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::out_of_range("unknown parameter '" + name + "'");
  }
  return it->second;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

Conditioning Conditioning::caption(std::vector<std::size_t> codes) {
  Conditioning c;
  c.codes = std::move(codes);
  return c;
}

Conditioning Conditioning::fixed(Tensor encoding) {
  Conditioning c;
  c.encoding = std::move(encoding);
  return c;
}

NetworkVars bind_network(Tape& tape, const ModelParams& params) {
  auto p = [&](const char* name) {
    const std::size_t i = params.index(name);
    return tape.parameter(i, params.tensor(i));
  };
  auto lstm = [&](const std::string& prefix) {
    LstmWeights w{p((prefix + ".wx").c_str()), p((prefix + ".wh").c_str()),
                  p((prefix + ".b").c_str())};
    w.validate();
    return w;
  };
  NetworkVars net;
  net.config = &params.config();
  net.embedding = p("embed");
  net.enc_fwd = lstm("enc_fwd");
  net.enc_bwd = lstm("enc_bwd");
  net.align = {p("align.v"), p("align.u"), p("align.w"), p("align.b")};
  net.gen = lstm("gen");
  net.infer = lstm("infer");
  net.prior = {p("prior.w_mu"), p("prior.w_sigma")};
  net.posterior = {p("post.w_mu"), p("post.w_sigma")};
  net.read_grid = {p("read_grid.w"), p("read_grid.b")};
  net.write = {{p("write_grid.w"), p("write_grid.b")},
               p("write_patch.w"),
               p("write_patch.b")};
  net.h_gen0 = p("init.h_gen");
  net.h_infer0 = p("init.h_infer");
  net.canvas0 = p("init.canvas");
  return net;
}

LangEncoding encode_condition(const NetworkVars& net, const Conditioning& c) {
  const std::size_t width = 2 * net.config->encoder_hidden;
  if (c.encoding) {
    if (c.encoding->rank() != 2 || c.encoding->shape()[1] != width) {
      throw std::invalid_argument("fixed encoding " +
                                  shape_string(c.encoding->shape()) +
                                  " must have " + std::to_string(width) +
                                  " columns");
    }
    return fixed_encoding(net.embedding.tape(), *c.encoding);
  }
  return encode_caption(c.codes, net.embedding, net.enc_fwd, net.enc_bwd);
}

GenerativeStep generative_step(const NetworkVars& net,
                               const AlignContext& align_ctx,
                               const LangEncoding& enc, const LstmState& prev,
                               Var canvas_prev, Var z) {
  const ModelConfig& cfg = *net.config;
  GenerativeStep step;
  if (cfg.use_align) {
    step.alignment = align(prev.h, align_ctx, net.align);
  } else {
    step.alignment = {Var(), enc.final_state};
  }
  step.state = lstm_step(prev, ad::concat({z, step.alignment.s}), net.gen);
  step.write = write(step.state.h, net.write, cfg.geometry(), cfg.write_patch,
                     cfg.use_intensity);
  step.canvas = canvas_prev + step.write.delta;
  return step;
}

namespace {

void check_noise(std::span<const Tensor> noise, const ModelConfig& cfg) {
  if (noise.size() != cfg.glimpses) {
    throw std::invalid_argument("expected " + std::to_string(cfg.glimpses) +
                                " noise vectors, got " +
                                std::to_string(noise.size()));
  }
  for (const Tensor& e : noise) {
    if (e.shape() != Shape{cfg.latent}) {
      throw std::invalid_argument("noise vector " + shape_string(e.shape()) +
                                  " must be [" + std::to_string(cfg.latent) +
                                  "]");
    }
  }
}

AlignContext maybe_prepare(const NetworkVars& net, const LangEncoding& enc) {
  if (!net.config->use_align) return {&enc, Var()};
  return prepare_alignment(enc, net.align);
}

}  // namespace

InferenceRollout infer_rollout(const NetworkVars& net, const LangEncoding& enc,
                               Var x, std::span<const Tensor> noise) {
  const ModelConfig& cfg = *net.config;
  check_noise(noise, cfg);
  Tape& tape = x.tape();
  const AlignContext ctx = maybe_prepare(net, enc);

  InferenceRollout out;
  LstmState gen{net.h_gen0, tape.constant(Tensor(Shape{cfg.gen_hidden}))};
  LstmState inf{net.h_infer0, tape.constant(Tensor(Shape{cfg.infer_hidden}))};
  Var canvas = net.canvas0;
  out.canvases.push_back(canvas);
  for (std::size_t t = 0; t < cfg.glimpses; ++t) {
    Var x_hat = x - ad::sigmoid(canvas);
    Var r = read(x, x_hat, gen.h, net.read_grid, cfg.geometry(),
                 cfg.read_patch, cfg.use_intensity);
    inf = lstm_step(inf, ad::concat({r, gen.h}), net.infer);
    DiagGaussian q = gaussian_params(inf.h, net.posterior);
    Var z = sample_reparam(q, noise[t]);
    DiagGaussian p = t == 0 ? standard_normal(tape, cfg.latent)
                            : gaussian_params(gen.h, net.prior);
    out.kl.push_back(kl_diag_gauss(q, p));
    GenerativeStep step = generative_step(net, ctx, enc, gen, canvas, z);
    gen = step.state;
    canvas = step.canvas;
    out.z.push_back(z);
    out.posterior.push_back(q);
    out.prior.push_back(p);
    out.canvases.push_back(canvas);
  }
  out.nll = bernoulli_nll(canvas, x);
  Var total = out.nll;
  for (Var kl : out.kl) total = total + kl;
  out.bound = ad::affine(total, -1.0);
  return out;
}

GenerativeRollout generate_rollout(const NetworkVars& net,
                                   const LangEncoding& enc,
                                   std::span<const Tensor> noise,
                                   bool noise_is_latent) {
  const ModelConfig& cfg = *net.config;
  check_noise(noise, cfg);
  Tape& tape = net.h_gen0.tape();
  const AlignContext ctx = maybe_prepare(net, enc);

  GenerativeRollout out;
  LstmState gen{net.h_gen0, tape.constant(Tensor(Shape{cfg.gen_hidden}))};
  Var canvas = net.canvas0;
  out.canvases.push_back(canvas);
  for (std::size_t t = 0; t < cfg.glimpses; ++t) {
    Var z;
    if (noise_is_latent) {
      z = tape.constant(noise[t]);
    } else {
      DiagGaussian p = t == 0 ? standard_normal(tape, cfg.latent)
                              : gaussian_params(gen.h, net.prior);
      z = sample_reparam(p, noise[t]);
    }
    GenerativeStep step = generative_step(net, ctx, enc, gen, canvas, z);
    gen = step.state;
    canvas = step.canvas;
    out.z.push_back(z);
    out.alpha.push_back(step.alignment.alpha);
    out.write_grid.push_back(step.write.grid);
    out.canvases.push_back(canvas);
  }
  return out;
}

Var bernoulli_nll(Var logits, Var x) {
  if (logits.shape() != x.shape()) {
    throw std::invalid_argument("bernoulli_nll: logits " +
                                shape_string(logits.shape()) + " vs target " +
                                shape_string(x.shape()));
  }
  return ad::sum(ad::softplus(logits) - logits * x);
}

double bernoulli_nll(const Tensor& logits, const Tensor& x) {
  Tape tape;
  return bernoulli_nll(tape.constant(logits), tape.constant(x)).value().item();
}

std::vector<Tensor> draw_noise(RngStream& rng, const ModelConfig& cfg) {
  std::vector<Tensor> noise;
  noise.reserve(cfg.glimpses);
  for (std::size_t t = 0; t < cfg.glimpses; ++t)
    noise.push_back(rng.normal_tensor(Shape{cfg.latent}));
  return noise;
}

namespace {

Tensor sigmoid_image(const Tensor& c) {
  Tensor out(c.shape());
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i] = c[i] >= 0 ? 1.0 / (1.0 + std::exp(-c[i]))
                       : std::exp(c[i]) / (1.0 + std::exp(c[i]));
  }
  return out;
}

GenTrace to_trace(const GenerativeRollout& r) {
  GenTrace trace;
  trace.canvas0 = r.canvases.front().value();
  for (std::size_t t = 0; t < r.z.size(); ++t) {
    StepTrace s;
    s.z = r.z[t].value();
    s.alpha = r.alpha[t].valid() ? r.alpha[t].value() : Tensor();
    s.write_grid = grid_values(r.write_grid[t]);
    s.canvas = r.canvases[t + 1].value();
    ensure_finite(s.canvas, "generated canvas");
    trace.steps.push_back(std::move(s));
  }
  trace.mean_image = sigmoid_image(r.canvases.back().value());
  return trace;
}

}  // namespace

GenTrace generate(const Conditioning& cond, const ModelParams& params,
                  RngStream& rng) {
  const std::vector<Tensor> noise = draw_noise(rng, params.config());
  Tape tape;
  NetworkVars net = bind_network(tape, params);
  LangEncoding enc = encode_condition(net, cond);
  return to_trace(generate_rollout(net, enc, noise, false));
}

GenTrace generate_from_latents(const Conditioning& cond,
                               const ModelParams& params,
                               std::span<const Tensor> latents) {
  Tape tape;
  NetworkVars net = bind_network(tape, params);
  LangEncoding enc = encode_condition(net, cond);
  return to_trace(generate_rollout(net, enc, latents, true));
}

void validate_image(const Tensor& x, const ModelConfig& cfg) {
  const Shape dims{cfg.height, cfg.width};
  if (x.shape() != dims) {
    throw std::invalid_argument("image " + shape_string(x.shape()) +
                                " does not match model canvas " +
                                shape_string(dims));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
      throw std::invalid_argument("pixel " + std::to_string(i) + " value " +
                                  std::to_string(x[i]) +
                                  " outside [0, 1]");
    }
  }
}

BoundGraph build_bound(const NetworkVars& net, const LangEncoding& enc, Var x,
                       std::span<const std::vector<Tensor>> noise) {
  if (noise.empty()) {
    throw std::invalid_argument("bound needs at least one Monte Carlo sample");
  }
  const double inv = 1.0 / static_cast<double>(noise.size());
  BoundGraph g;
  g.report.kl_per_step.assign(net.config->glimpses, 0.0);
  Var total;
  for (const auto& eps : noise) {
    InferenceRollout r = infer_rollout(net, enc, x, eps);
    total = total.valid() ? total + r.bound : r.bound;
    g.report.reconstruction_nll += r.nll.value().item() * inv;
    for (std::size_t t = 0; t < r.kl.size(); ++t)
      g.report.kl_per_step[t] += r.kl[t].value().item() * inv;
  }
  double kl_sum = 0.0;
  for (double k : g.report.kl_per_step) kl_sum += k;
  g.report.bound = -g.report.reconstruction_nll - kl_sum;
  g.loss = ad::affine(total, -inv);
  return g;
}

LossReport infer_bound(const Tensor& x, const Conditioning& cond,
                       const ModelParams& params, RngStream& rng,
                       std::size_t samples) {
  const ModelConfig& cfg = params.config();
  validate_image(x, cfg);
  if (samples < 1) throw std::invalid_argument("infer_bound: L must be >= 1");
  std::vector<std::vector<Tensor>> noise;
  for (std::size_t l = 0; l < samples; ++l)
    noise.push_back(draw_noise(rng, cfg));
  Tape tape;
  NetworkVars net = bind_network(tape, params);
  LangEncoding enc = encode_condition(net, cond);
  BoundGraph g = build_bound(net, enc, tape.constant(x), noise);
  if (!std::isfinite(g.report.bound)) {
    throw std::domain_error("non-finite variational bound");
  }
  return g.report;
}

}  // namespace aligndraw
