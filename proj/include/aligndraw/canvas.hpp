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

#ifndef ALIGNDRAW_CANVAS_HPP_
#define ALIGNDRAW_CANVAS_HPP_

#include <cstddef>

#include "aligndraw/tape.hpp"
#include "aligndraw/tensor.hpp"

namespace aligndraw {

struct CanvasGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Attention grid. All fields are rank-0. Coordinates are 1-based: pixel a
/// on an axis of extent A sits at a, so the grid centre (A + 1) / 2 is the
/// middle of the image.
struct GridParams {
  Var center_x;  // along rows (height axis)
  Var center_y;  // along columns (width axis)
  Var stride;
  Var variance;
  Var intensity;
  Var log_intensity;
};

struct GridValues {
  double center_x = 0;
  double center_y = 0;
  double stride = 0;
  double variance = 0;
  double intensity = 0;
};

GridValues grid_values(const GridParams& g);

/// Linear map from a hidden state to the five raw grid outputs
/// (x offset, y offset, log variance, log stride scale, log intensity).
struct GridHead {
  Var w;  // 5 x n
  Var b;  // 5
};

GridParams grid_params_from_hidden(Var h, const GridHead& head,
                                   CanvasGeometry geom, std::size_t patch,
                                   bool use_intensity = true);

/// Column i of the (extent x patch) result is a Gaussian over pixel
/// coordinates 1..extent centred at center + (i + 1 - patch/2 - 0.5) * stride,
/// normalised to unit mass. A column whose mass underflows is replaced by a
/// uniform filter.
Tensor filterbank_values(double center, double stride, double variance,
                         std::size_t extent, std::size_t patch);

/// Differentiable form of filterbank_values in the three rank-0 inputs.
Var filterbank(Var center, Var stride, Var variance, std::size_t extent,
               std::size_t patch);

struct FilterBanks {
  Var fx;  // height x patch
  Var fy;  // width x patch
};

FilterBanks build_filterbanks(const GridParams& g, CanvasGeometry geom,
                              std::size_t patch);

/// Fx K Fy^T: places a patch x patch matrix onto a height x width canvas.
Var place_patch(const FilterBanks& fb, Var patch);
/// Fx^T X Fy: the adjoint of place_patch.
Var extract_patch(const FilterBanks& fb, Var image);

struct WriteHeads {
  GridHead grid;
  Var patch_w;  // p^2 x n
  Var patch_b;  // p^2
};

struct WriteOutput {
  Var delta;  // height x width
  GridParams grid;
};

/// Canvas update from the current generative state: Fx K Fy^T / intensity.
WriteOutput write(Var h_gen, const WriteHeads& heads, CanvasGeometry geom,
                  std::size_t patch, bool use_intensity);

/// Glimpse of the image and the error image from the previous generative
/// state: intensity * [Fx^T x Fy, Fx^T x_hat Fy], flattened to 2 p^2 values.
Var read(Var x, Var x_hat, Var h_gen_prev, const GridHead& head,
         CanvasGeometry geom, std::size_t patch, bool use_intensity);

}  // namespace aligndraw

#endif  // ALIGNDRAW_CANVAS_HPP_
