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

#include "aligndraw/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aligndraw {
namespace {

inline double filter_offset(std::size_t i, std::size_t patch) {
  return static_cast<double>(i) + 0.5 - static_cast<double>(patch) / 2.0;
}

// Fills `f` and reports per column whether the uniform fallback was used.
void fill_filterbank(double center, double stride, double variance,
                     std::size_t extent, std::size_t patch, Tensor& f,
                     std::vector<char>& degenerate) {
  degenerate.assign(patch, 0);
  for (std::size_t i = 0; i < patch; ++i) {
    const double mu = center + filter_offset(i, patch) * stride;
    double mass = 0.0;
    for (std::size_t a = 0; a < extent; ++a) {
      const double d = static_cast<double>(a + 1) - mu;
      const double e = std::exp(-d * d / (2.0 * variance));
      f[a * patch + i] = e;
      mass += e;
    }
    if (!(mass >= std::numeric_limits<double>::min())) {
      degenerate[i] = 1;
      for (std::size_t a = 0; a < extent; ++a)
        f[a * patch + i] = 1.0 / static_cast<double>(extent);
    } else {
      for (std::size_t a = 0; a < extent; ++a) f[a * patch + i] /= mass;
    }
  }
}

}  // namespace

GridValues grid_values(const GridParams& g) {
  return {g.center_x.value().item(), g.center_y.value().item(),
          g.stride.value().item(), g.variance.value().item(),
          g.intensity.value().item()};
}

GridParams grid_params_from_hidden(Var h, const GridHead& head,
                                   CanvasGeometry geom, std::size_t patch,
                                   bool use_intensity) {
  if (patch == 0) throw std::invalid_argument("grid: patch size must be >= 1");
  if (head.w.shape().size() != 2 || head.w.shape()[0] != 5) {
    throw std::invalid_argument("grid head must have 5 outputs, got " +
                                shape_string(head.w.shape()));
  }
  Var raw = ad::matmul(head.w, h) + head.b;
  const double hx = static_cast<double>(geom.height);
  const double wy = static_cast<double>(geom.width);
  GridParams g;
  g.center_x = ad::affine(ad::element(raw, 0), (hx + 1.0) / 2.0, (hx + 1.0) / 2.0);
  g.center_y = ad::affine(ad::element(raw, 1), (wy + 1.0) / 2.0, (wy + 1.0) / 2.0);
  g.variance = ad::exp(ad::element(raw, 2));
  const double span =
      patch > 1
          ? (static_cast<double>(std::max(geom.height, geom.width)) - 1.0) /
                static_cast<double>(patch - 1)
          : 1.0;
  g.stride = ad::affine(ad::exp(ad::element(raw, 3)), span);
  Tape& tape = h.tape();
  if (use_intensity) {
    g.log_intensity = ad::element(raw, 4);
    g.intensity = ad::exp(g.log_intensity);
  } else {
    g.log_intensity = tape.constant(Tensor::scalar(0.0));
    g.intensity = tape.constant(Tensor::scalar(1.0));
  }
  return g;
}

Tensor filterbank_values(double center, double stride, double variance,
                         std::size_t extent, std::size_t patch) {
  if (extent == 0 || patch == 0) {
    throw std::invalid_argument("filterbank: extent and patch must be >= 1");
  }
  Tensor f(Shape{extent, patch});
  std::vector<char> degenerate;
  fill_filterbank(center, stride, variance, extent, patch, f, degenerate);
  return f;
}

Var filterbank(Var center, Var stride, Var variance, std::size_t extent,
               std::size_t patch) {
  if (extent == 0 || patch == 0) {
    throw std::invalid_argument("filterbank: extent and patch must be >= 1");
  }
  const double c = center.value().item();
  const double s = stride.value().item();
  const double v = variance.value().item();
  if (!(v > 0.0)) {
    throw std::domain_error("filterbank: variance must be positive");
  }
  Tensor f(Shape{extent, patch});
  std::vector<char> degenerate;
  fill_filterbank(c, s, v, extent, patch, f, degenerate);
  const Var inputs[] = {center, stride, variance};
  return center.tape().record(
      "filterbank", std::move(f), inputs,
      [c, s, v, extent, patch, degenerate](BackwardContext& ctx) {
        const Tensor& f = ctx.output();
        const Tensor& g = ctx.grad();
        double d_center = 0.0, d_stride = 0.0, d_var = 0.0;
        for (std::size_t i = 0; i < patch; ++i) {
          if (degenerate[i]) continue;
          const double mu = c + filter_offset(i, patch) * s;
          // With f_a = e_a / sum_b e_b and log e_a = -(a - mu)^2 / 2v:
          // df_a = f_a (dlog e_a - sum_b f_b dlog e_b).
          double mean_d = 0.0, mean_d2 = 0.0, gf = 0.0, gfd = 0.0, gfd2 = 0.0;
          for (std::size_t a = 0; a < extent; ++a) {
            const double d = static_cast<double>(a + 1) - mu;
            const double fa = f[a * patch + i];
            const double ga = g[a * patch + i];
            mean_d += fa * d;
            mean_d2 += fa * d * d;
            gf += ga * fa;
            gfd += ga * fa * d;
            gfd2 += ga * fa * d * d;
          }
          const double d_mu = (gfd - gf * mean_d) / v;
          d_var += (gfd2 - gf * mean_d2) / (2.0 * v * v);
          d_center += d_mu;
          d_stride += d_mu * filter_offset(i, patch);
        }
        if (Tensor* gc = ctx.input_grad(0)) (*gc)[0] += d_center;
        if (Tensor* gs = ctx.input_grad(1)) (*gs)[0] += d_stride;
        if (Tensor* gv = ctx.input_grad(2)) (*gv)[0] += d_var;
      });
}

FilterBanks build_filterbanks(const GridParams& g, CanvasGeometry geom,
                              std::size_t patch) {
  return {filterbank(g.center_x, g.stride, g.variance, geom.height, patch),
          filterbank(g.center_y, g.stride, g.variance, geom.width, patch)};
}

Var place_patch(const FilterBanks& fb, Var patch) {
  return ad::matmul(ad::matmul(fb.fx, patch), ad::transpose(fb.fy));
}

Var extract_patch(const FilterBanks& fb, Var image) {
  return ad::matmul(ad::matmul(ad::transpose(fb.fx), image), fb.fy);
}

WriteOutput write(Var h_gen, const WriteHeads& heads, CanvasGeometry geom,
                  std::size_t patch, bool use_intensity) {
  GridParams g = grid_params_from_hidden(h_gen, heads.grid, geom, patch,
                                         use_intensity);
  FilterBanks fb = build_filterbanks(g, geom, patch);
  Var k = ad::reshape(ad::matmul(heads.patch_w, h_gen) + heads.patch_b,
                      Shape{patch, patch});
  Var placed = place_patch(fb, k);
  if (use_intensity) {
    placed = ad::mul(placed, ad::exp(ad::affine(g.log_intensity, -1.0)));
  }
  return {placed, g};
}

Var read(Var x, Var x_hat, Var h_gen_prev, const GridHead& head,
         CanvasGeometry geom, std::size_t patch, bool use_intensity) {
  const Shape dims{geom.height, geom.width};
  if (x.shape() != dims || x_hat.shape() != dims) {
    throw std::invalid_argument("read: image " + shape_string(x.shape()) +
                                " and error image " +
                                shape_string(x_hat.shape()) +
                                " must both be " + shape_string(dims));
  }
  GridParams g =
      grid_params_from_hidden(h_gen_prev, head, geom, patch, use_intensity);
  FilterBanks fb = build_filterbanks(g, geom, patch);
  const Shape flat{patch * patch};
  Var r = ad::concat({ad::reshape(extract_patch(fb, x), flat),
                      ad::reshape(extract_patch(fb, x_hat), flat)});
  if (use_intensity) r = ad::mul(r, g.intensity);
  return r;
}

}  // namespace aligndraw
