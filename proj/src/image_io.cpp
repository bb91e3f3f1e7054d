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

#include "aligndraw/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace aligndraw {

unsigned char to_gray8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(255.0 * c));
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 2) {
    throw std::invalid_argument("write_pgm: image must be a matrix, got " +
                                shape_string(image.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::string bytes(image.size(), '\0');
  for (std::size_t i = 0; i < image.size(); ++i)
    bytes[i] = static_cast<char>(to_gray8(image[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w == 0 || h == 0) {
    throw std::runtime_error(path.string() + ": not an 8-bit binary PGM");
  }
  in.get();
  std::string bytes(w * h, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  Tensor img(Shape{h, w});
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  return img;
}

Tensor tile_images(const std::vector<Tensor>& images, std::size_t columns) {
  if (images.empty() || columns == 0) {
    throw std::invalid_argument("tile_images: nothing to tile");
  }
  const std::size_t h = images[0].rows(), w = images[0].cols();
  const std::size_t cols = std::min(columns, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  Tensor out(Shape{rows * (h + 1) - 1, cols * (w + 1) - 1}, 1.0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].shape() != images[0].shape()) {
      throw std::invalid_argument("tile_images: images differ in size");
    }
    const std::size_t r0 = (k / cols) * (h + 1), c0 = (k % cols) * (w + 1);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out.at(r0 + i, c0 + j) = images[k].at(i, j);
  }
  return out;
}

}  // namespace aligndraw
