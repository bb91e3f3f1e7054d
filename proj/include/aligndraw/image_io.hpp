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

#ifndef ALIGNDRAW_IMAGE_IO_HPP_
#define ALIGNDRAW_IMAGE_IO_HPP_

#include <filesystem>
#include <vector>

#include "aligndraw/tensor.hpp"

namespace aligndraw {

/// 8-bit quantisation used for every image written to disk:
/// round(255 * clamp(v, 0, 1)).
unsigned char to_gray8(double v);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Tensor& image);
Tensor read_pgm(const std::filesystem::path& path);

/// Tiles equally sized images left to right, `columns` per row, with a
/// one-pixel gap of value 1.
Tensor tile_images(const std::vector<Tensor>& images, std::size_t columns);

}  // namespace aligndraw

#endif  // ALIGNDRAW_IMAGE_IO_HPP_
