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

#include "aligndraw/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aligndraw::kernels {
namespace {

std::atomic<bool> g_parallel{true};

constexpr std::size_t kParallelWork = 1 << 15;

void check_sizes(std::size_t m, std::size_t n, std::size_t k,
                 std::span<const double> a, std::span<const double> b,
                 std::span<double> c) {
  if (a.size() != m * k || b.size() != k * n || c.size() != m * n) {
    throw std::invalid_argument(
        "gemm operand sizes do not match m=" + std::to_string(m) +
        " n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
}

inline void gemm_row(Transpose ta, Transpose tb, std::size_t i, std::size_t m,
                     std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = ta == Transpose::kNo ? a[i * k + p] : a[p * m + i];
    if (aip == 0.0) continue;
    if (tb == Transpose::kNo) {
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * k + p];
    }
  }
}

}  // namespace

namespace serial {
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  check_sizes(m, n, k, a, b, c);
  for (std::size_t i = 0; i < m; ++i) {
    gemm_row(ta, tb, i, m, n, k, a.data(), b.data(), c.data(), accumulate);
  }
}
}  // namespace serial

namespace parallel {
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  check_sizes(m, n, k, a, b, c);
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_row(ta, tb, static_cast<std::size_t>(i), m, n, k, ap, bp, cp,
             accumulate);
  }
}
}  // namespace parallel

void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  if (g_parallel.load(std::memory_order_relaxed) && m > 1 &&
      m * n * k >= kParallelWork && !in_parallel_region()) {
    parallel::gemm(ta, tb, m, n, k, a, b, c, accumulate);
  } else {
    serial::gemm(ta, tb, m, n, k, a, b, c, accumulate);
  }
}

void set_parallel_enabled(bool enabled) {
  g_parallel.store(enabled, std::memory_order_relaxed);
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

}  // namespace aligndraw::kernels
