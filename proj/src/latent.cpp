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

#include "aligndraw/latent.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aligndraw {

DiagGaussian gaussian_params(Var h, const GaussianHead& head) {
  if (head.w_mu.shape() != head.w_sigma.shape()) {
    throw std::invalid_argument("gaussian head maps differ: " +
                                shape_string(head.w_mu.shape()) + " vs " +
                                shape_string(head.w_sigma.shape()));
  }
  return {ad::tanh(ad::matmul(head.w_mu, h)),
          ad::exp(ad::tanh(ad::matmul(head.w_sigma, h)))};
}

DiagGaussian standard_normal(Tape& tape, std::size_t dim) {
  return {tape.constant(Tensor(Shape{dim}, 0.0)),
          tape.constant(Tensor(Shape{dim}, 1.0))};
}

Var sample_reparam(const DiagGaussian& g, const Tensor& noise) {
  if (noise.shape() != g.mu.shape()) {
    throw std::invalid_argument("sample_reparam: noise " +
                                shape_string(noise.shape()) + " vs mean " +
                                shape_string(g.mu.shape()));
  }
  return g.mu + g.sigma * g.mu.tape().constant(noise);
}

Var kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mu.shape() != p.mu.shape() || q.sigma.shape() != p.sigma.shape() ||
      q.mu.shape() != q.sigma.shape()) {
    throw std::invalid_argument("kl_diag_gauss: dimension mismatch " +
                                shape_string(q.mu.shape()) + " vs " +
                                shape_string(p.mu.shape()));
  }
  Var diff = q.mu - p.mu;
  Var num = q.sigma * q.sigma + diff * diff;
  Var den = ad::affine(p.sigma * p.sigma, 2.0);
  Var per_dim = ad::log(p.sigma) - ad::log(q.sigma) + ad::div(num, den);
  return ad::affine(ad::sum(per_dim), 1.0,
                    -0.5 * static_cast<double>(q.mu.size()));
}

double log_density(const Tensor& z, const Tensor& mu, const Tensor& sigma) {
  if (z.size() != mu.size() || z.size() != sigma.size()) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  double lp = 0.0;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double u = (z[i] - mu[i]) / sigma[i];
    lp += -0.5 * u * u - std::log(sigma[i]) - half_log_2pi;
  }
  return lp;
}

}  // namespace aligndraw
