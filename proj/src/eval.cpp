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

#include "aligndraw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "aligndraw/latent.hpp"
#include "aligndraw/tape.hpp"

namespace aligndraw {
namespace {

Estimate mean_and_error(std::span<const double> v, bool error_of_mean) {
  Estimate e;
  e.count = v.size();
  if (v.empty()) return e;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
  e.mean = mean;
  e.std_err = error_of_mean ? std::sqrt(var / static_cast<double>(v.size()))
                            : std::sqrt(var);
  return e;
}

}  // namespace

double bound_with_noise(const Tensor& x, const Conditioning& cond,
                        const ModelParams& params,
                        std::span<const std::vector<Tensor>> noise) {
  validate_image(x, params.config());
  Tape tape;
  NetworkVars net = bind_network(tape, params);
  LangEncoding enc = encode_condition(net, cond);
  return build_bound(net, enc, tape.constant(x), noise).report.bound;
}

Estimate estimate_bound(const Tensor& x, const Conditioning& cond,
                        const ModelParams& params, RngStream& rng,
                        std::size_t n_samples) {
  if (n_samples < 1) throw std::invalid_argument("estimate_bound: n_samples must be >= 1");
  std::vector<double> bounds;
  bounds.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    bounds.push_back(infer_bound(x, cond, params, rng, 1).bound);
  return mean_and_error(bounds, true);
}

Estimate importance_log_likelihood(const Tensor& x, const Conditioning& cond,
                                   const ModelParams& params, RngStream& rng,
                                   std::size_t n_samples) {
  if (n_samples < 1) {
    throw std::invalid_argument("importance_log_likelihood: n_samples must be >= 1");
  }
  const ModelConfig& cfg = params.config();
  validate_image(x, cfg);
  std::vector<double> log_w;
  log_w.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::vector<Tensor> noise = draw_noise(rng, cfg);
    Tape tape;
    NetworkVars net = bind_network(tape, params);
    LangEncoding enc = encode_condition(net, cond);
    InferenceRollout r = infer_rollout(net, enc, tape.constant(x), noise);
    double lw = -r.nll.value().item();
    for (std::size_t t = 0; t < r.z.size(); ++t) {
      const Tensor& z = r.z[t].value();
      lw += log_density(z, r.prior[t].mu.value(), r.prior[t].sigma.value());
      lw -= log_density(z, r.posterior[t].mu.value(), r.posterior[t].sigma.value());
    }
    log_w.push_back(lw);
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w;
  w.reserve(n_samples);
  for (double lw : log_w) w.push_back(std::exp(lw - top));
  const Estimate we = mean_and_error(w, true);
  Estimate out;
  out.count = n_samples;
  out.mean = top + std::log(we.mean);
  out.std_err = we.std_err / we.mean;
  return out;
}

// ---------------------------------------------------------------------------

SsiConfig SsiConfig::for_range(double range) {
  SsiConfig c;
  c.range = range;
  c.c1 = (0.01 * range) * (0.01 * range);
  c.c2 = (0.03 * range) * (0.03 * range);
  return c;
}

void SsiConfig::validate(std::size_t rows, std::size_t cols) const {
  if (!(c1 > 0) || !(c2 > 0) || !(range > 0)) {
    throw std::invalid_argument("SSI stabilizers and range must be positive");
  }
  if (window == 0 || stride == 0) {
    throw std::invalid_argument("SSI window and stride must be positive");
  }
  if (window > rows || window > cols) {
    throw std::invalid_argument("SSI window " + std::to_string(window) +
                                " does not fit a " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " image");
  }
}

namespace {

double window_mean(const Tensor& a, std::size_t r0, std::size_t c0, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += a.at(r0 + i, c0 + j);
  return s / static_cast<double>(n * n);
}

// Covariance and variance share this routine so ssi(x, x) is exactly 1.
double window_cov(const Tensor& a, double ma, const Tensor& b, double mb,
                  std::size_t r0, std::size_t c0, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s += (a.at(r0 + i, c0 + j) - ma) * (b.at(r0 + i, c0 + j) - mb);
  return s / static_cast<double>(n * n);
}

}  // namespace

double ssi(const Tensor& a, const Tensor& b, const SsiConfig& cfg) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw std::invalid_argument("ssi: images must be matrices of equal shape, got " +
                                shape_string(a.shape()) + " and " +
                                shape_string(b.shape()));
  }
  cfg.validate(a.rows(), a.cols());
  const std::size_t n = cfg.window;
  const std::size_t nr = (a.rows() - n) / cfg.stride + 1;
  const std::size_t nc = (a.cols() - n) / cfg.stride + 1;
  std::vector<double> scores(nr * nc);
#pragma omp parallel for schedule(static) if (nr * nc >= 64)
  for (std::size_t k = 0; k < nr * nc; ++k) {
    const std::size_t r0 = (k / nc) * cfg.stride, c0 = (k % nc) * cfg.stride;
    const double ma = window_mean(a, r0, c0, n), mb = window_mean(b, r0, c0, n);
    const double va = window_cov(a, ma, a, ma, r0, c0, n);
    const double vb = window_cov(b, mb, b, mb, r0, c0, n);
    const double cab = window_cov(a, ma, b, mb, r0, c0, n);
    scores[k] = ((2 * ma * mb + cfg.c1) * (2 * cab + cfg.c2)) /
                ((ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2));
  }
  double s = 0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

Estimate ssi_protocol(const ModelParams& params,
                      std::span<const std::vector<std::size_t>> captions,
                      std::span<const Tensor> references, const RngStream& rng,
                      std::size_t samples_per_caption, const SsiConfig& cfg) {
  if (captions.size() != references.size()) {
    throw std::invalid_argument("ssi_protocol: one reference image per caption");
  }
  if (samples_per_caption == 0) {
    throw std::invalid_argument("ssi_protocol: samples_per_caption must be >= 1");
  }
  std::vector<double> scores(captions.size() * samples_per_caption);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    RngStream local = rng.derive(i);
    const Conditioning cond = Conditioning::caption(captions[i]);
    for (std::size_t s = 0; s < samples_per_caption; ++s) {
      const GenTrace g = generate(cond, params, local);
      scores[i * samples_per_caption + s] = ssi(g.mean_image, references[i], cfg);
    }
  }
  return mean_and_error(scores, false);
}

// ---------------------------------------------------------------------------

double RetrievalResult::recall_at(std::size_t k) const {
  if (ranks.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r : ranks) hit += r <= k ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(ranks.size());
}

RetrievalResult retrieval(std::span<const std::size_t> truth, std::size_t pool_size,
                          const PairScorer& score) {
  if (pool_size == 0) throw std::invalid_argument("retrieval: empty pool");
  RetrievalResult out;
  out.ranks.reserve(truth.size());
  std::vector<double> row(pool_size);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= pool_size) {
      throw std::invalid_argument("retrieval: ground truth " + std::to_string(truth[i]) +
                                  " for caption " + std::to_string(i) +
                                  " is not in the pool of " + std::to_string(pool_size));
    }
    for (std::size_t j = 0; j < pool_size; ++j) row[j] = score(i, j);
    const double target = row[truth[i]];
    std::size_t rank = 1;
    for (std::size_t j = 0; j < pool_size; ++j) {
      if (row[j] > target || (row[j] == target && j < truth[i])) ++rank;
    }
    out.ranks.push_back(rank);
  }
  out.recall_1 = out.recall_at(1);
  out.recall_5 = out.recall_at(5);
  out.recall_10 = out.recall_at(10);
  out.recall_50 = out.recall_at(50);
  if (!out.ranks.empty()) {
    std::vector<std::size_t> sorted = out.ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    out.median_rank = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                                 : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  }
  return out;
}

Tensor mean_sentence_baseline(const ModelParams& params,
                              std::span<const std::vector<std::size_t>> captions) {
  if (captions.empty()) {
    throw std::invalid_argument("mean_sentence_baseline: no captions");
  }
  const std::size_t width = 2 * params.config().encoder_hidden;
  Tensor mean(Shape{1, width}, 0.0);
  std::size_t k = 0;
  for (const auto& codes : captions) {
    Tape tape;
    NetworkVars net = bind_network(tape, params);
    const Tensor& states = encode_condition(net, Conditioning::caption(codes)).states.value();
    ++k;
    for (std::size_t j = 0; j < width; ++j) {
      double avg = 0;
      for (std::size_t r = 0; r < states.rows(); ++r) avg += states.at(r, j);
      avg /= static_cast<double>(states.rows());
      mean[j] += (avg - mean[j]) / static_cast<double>(k);
    }
  }
  return mean;
}

RetrievalResult likelihood_ratio_retrieval(
    const ModelParams& params, std::span<const std::vector<std::size_t>> captions,
    std::span<const std::size_t> truth, std::span<const Tensor> pool,
    const Tensor& baseline, const RngStream& rng, std::size_t n_samples) {
  if (captions.size() != truth.size()) {
    throw std::invalid_argument("retrieval: one ground-truth index per caption");
  }
  if (n_samples == 0) throw std::invalid_argument("retrieval: n_samples must be >= 1");
  for (std::size_t t : truth) {
    if (t >= pool.size()) {
      throw std::invalid_argument("retrieval: ground truth " + std::to_string(t) +
                                  " is not in the pool of " + std::to_string(pool.size()));
    }
  }
  const ModelConfig& cfg = params.config();
  std::vector<std::vector<std::vector<Tensor>>> noise(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    RngStream local = rng.derive(j);
    for (std::size_t l = 0; l < n_samples; ++l) noise[j].push_back(draw_noise(local, cfg));
  }
  const Conditioning base = Conditioning::fixed(baseline);
  const std::size_t nc = captions.size(), np = pool.size();
  std::vector<double> base_bound(np);
  std::vector<double> scores(nc * np);
  std::exception_ptr error;
  auto guarded = [&error](auto&& body) {
    try {
      body();
    } catch (...) {
#pragma omp critical(aligndraw_retrieval_error)
      if (!error) error = std::current_exception();
    }
  };
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < np; ++j)
    guarded([&] { base_bound[j] = bound_with_noise(pool[j], base, params, noise[j]); });
  if (error) std::rethrow_exception(error);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < nc * np; ++k) {
    const std::size_t i = k / np, j = k % np;
    guarded([&] {
      scores[k] = bound_with_noise(pool[j], Conditioning::caption(captions[i]), params,
                                   noise[j]) -
                  base_bound[j];
    });
  }
  if (error) std::rethrow_exception(error);
  return retrieval(truth, np, [&](std::size_t i, std::size_t j) { return scores[i * np + j]; });
}

void write_metrics_table(const std::filesystem::path& path,
                         std::span<const MetricRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric\tvalue\tstd_err\tcount\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    out << r.metric;
    std::snprintf(buf, sizeof buf, "\t%.17g", r.value);
    out << buf;
    std::snprintf(buf, sizeof buf, "\t%.17g", r.std_err);
    out << buf << '\t' << r.count << '\n';
  }
}

}  // namespace aligndraw
