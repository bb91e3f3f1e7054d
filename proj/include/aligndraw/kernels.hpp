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

#ifndef ALIGNDRAW_KERNELS_HPP_
#define ALIGNDRAW_KERNELS_HPP_

#include <cstddef>
#include <span>

namespace aligndraw::kernels {

enum class Transpose { kNo, kYes };

// Dense product C (m x n) = op(A) (m x k) * op(B) (k x n), or C += ... when
// `accumulate` is set. A and B are row-major in their stored orientation.
//
// Both variants share the per-row inner kernel, so every entry of C is summed
// over k in the same order and the two produce bit-identical results. The
// serial one stays as the reference the tests and the benchmark compare
// against.
namespace serial {
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);
}  // namespace serial

namespace parallel {
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);
}  // namespace parallel

/// Picks the parallel kernel for products above a work threshold, unless
/// parallel kernels are disabled or we are already inside a parallel region.
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

void set_parallel_enabled(bool enabled);
bool parallel_enabled();
int max_threads();
bool in_parallel_region();

}  // namespace aligndraw::kernels

#endif  // ALIGNDRAW_KERNELS_HPP_
