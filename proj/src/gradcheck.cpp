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

#include "aligndraw/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aligndraw {

Gradients finite_difference_gradient(const ScalarFunction& f,
                                     std::vector<Tensor> params, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_difference_gradient: eps must be > 0");
  }
  Gradients out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor g = Tensor::zeros_like(params[p]);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + eps;
      const double up = f(params);
      params[p][i] = saved - eps;
      const double down = f(params);
      params[p][i] = saved;
      g[i] = (up - down) / (2.0 * eps);
    }
    out.emplace(p, std::move(g));
  }
  return out;
}

double relative_error(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("relative_error: shape mismatch " +
                                shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
  }
  const double scale = std::max(l2_norm(a.data()), l2_norm(b.data()));
  if (scale == 0.0) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

}  // namespace aligndraw
