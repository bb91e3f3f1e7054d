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

#ifndef ALIGNDRAW_EVAL_HPP_
#define ALIGNDRAW_EVAL_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aligndraw/model.hpp"
#include "aligndraw/rng.hpp"
#include "aligndraw/tensor.hpp"

namespace aligndraw {

struct Estimate {
  double mean = 0;
  double std_err = 0;  // or the standard deviation, where stated
  std::size_t count = 0;
};

// ---------------------------------------------------------------------------
// Variational bound.

/// Bound of x under the given noise draws (one T x D set per sample).
double bound_with_noise(const Tensor& x, const Conditioning& cond,
                        const ModelParams& params,
                        std::span<const std::vector<Tensor>> noise);

/// Mean and standard error of n_samples single-sample bounds drawn in
/// sequence from rng.
Estimate estimate_bound(const Tensor& x, const Conditioning& cond,
                        const ModelParams& params, RngStream& rng,
                        std::size_t n_samples);

/// log p(x | y) by importance sampling with the posterior as proposal:
/// log mean_i p(x, z_i | y) / q(z_i | x, y). The standard error is the
/// delta-method estimate sd(w) / (mean(w) sqrt(n)).
Estimate importance_log_likelihood(const Tensor& x, const Conditioning& cond,
                                   const ModelParams& params, RngStream& rng,
                                   std::size_t n_samples);

// ---------------------------------------------------------------------------
// Structural similarity.

struct SsiConfig {
  std::size_t window = 8;
  std::size_t stride = 4;
  double c1 = 1e-4;  // (0.01 L)^2
  double c2 = 9e-4;  // (0.03 L)^2
  double range = 1.0;

  static SsiConfig for_range(double range);
  void validate(std::size_t rows, std::size_t cols) const;
};

/// Mean over sliding windows of the per-window SSIM score. Window statistics
/// use uniform weights and population variances.
double ssi(const Tensor& a, const Tensor& b, const SsiConfig& cfg = {});

inline constexpr std::size_t kSsiSamplesPerCaption = 50;

/// Draws samples_per_caption prior images per caption and scores each
/// against the caption's reference image. Returns mean and standard
/// deviation (in std_err) over all scores.
Estimate ssi_protocol(const ModelParams& params,
                      std::span<const std::vector<std::size_t>> captions,
                      std::span<const Tensor> references, const RngStream& rng,
                      std::size_t samples_per_caption = kSsiSamplesPerCaption,
                      const SsiConfig& cfg = {});

// ---------------------------------------------------------------------------
// Retrieval.

struct RetrievalResult {
  std::vector<std::size_t> ranks;  // 1-based, per caption
  double recall_1 = 0;
  double recall_5 = 0;
  double recall_10 = 0;
  double recall_50 = 0;
  double median_rank = 0;

  double recall_at(std::size_t k) const;
};

/// score(caption, image); higher is better.
using PairScorer = std::function<double(std::size_t, std::size_t)>;

/// Ranks the pool for every caption by descending score. Ties go to the
/// lower pool index. truth[i] is the pool index of caption i's image.
RetrievalResult retrieval(std::span<const std::size_t> truth,
                          std::size_t pool_size, const PairScorer& score);

/// Length-averaged encoder output averaged over captions, as a 1 x 2m
/// pseudo-caption encoding.
Tensor mean_sentence_baseline(const ModelParams& params,
                              std::span<const std::vector<std::size_t>> captions);

/// Likelihood-ratio retrieval: score = bound(image | caption) -
/// bound(image | baseline). Every image keeps one noise draw (derived from
/// rng and its pool index) across all captions.
RetrievalResult likelihood_ratio_retrieval(
    const ModelParams& params, std::span<const std::vector<std::size_t>> captions,
    std::span<const std::size_t> truth, std::span<const Tensor> pool,
    const Tensor& baseline, const RngStream& rng, std::size_t n_samples = 1);

// ---------------------------------------------------------------------------

struct MetricRow {
  std::string metric;
  double value = 0;
  double std_err = 0;
  std::size_t count = 0;
};

/// Tab-separated "metric value std_err count" with a header line.
void write_metrics_table(const std::filesystem::path& path,
                         std::span<const MetricRow> rows);

}  // namespace aligndraw

#endif  // ALIGNDRAW_EVAL_HPP_
