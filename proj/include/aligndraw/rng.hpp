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

#ifndef ALIGNDRAW_RNG_HPP_
#define ALIGNDRAW_RNG_HPP_

#include <cstddef>
#include <cstdint>
#include <random>

#include "aligndraw/tensor.hpp"

namespace aligndraw {

/// Seeded random source. The engine is std::mt19937_64, whose output
/// sequence the standard fixes; uniforms and normals are derived from raw
/// 64-bit draws here rather than through the <random> distributions, whose
/// algorithms differ between standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  /// Number of 64-bit draws taken so far.
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  double normal();
  double uniform_range(double lo, double hi);
  std::size_t uniform_index(std::size_t n);
  Tensor normal_tensor(const Shape& shape);

  /// Independent stream keyed on this stream's seed and the given tags. Does
  /// not advance this stream.
  RngStream derive(std::uint64_t a, std::uint64_t b = 0) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace aligndraw

#endif  // ALIGNDRAW_RNG_HPP_
