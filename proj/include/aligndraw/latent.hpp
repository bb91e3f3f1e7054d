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

#ifndef ALIGNDRAW_LATENT_HPP_
#define ALIGNDRAW_LATENT_HPP_

#include <cstddef>

#include "aligndraw/tape.hpp"
#include "aligndraw/tensor.hpp"

namespace aligndraw {

/// Diagonal Gaussian; sigma holds standard deviations.
struct DiagGaussian {
  Var mu;
  Var sigma;
};

/// mu = tanh(W_mu h), sigma = exp(tanh(W_sigma h)). No bias terms.
struct GaussianHead {
  Var w_mu;     // D x n
  Var w_sigma;  // D x n
};

DiagGaussian gaussian_params(Var h, const GaussianHead& head);
DiagGaussian standard_normal(Tape& tape, std::size_t dim);

/// z = mu + sigma * noise.
Var sample_reparam(const DiagGaussian& g, const Tensor& noise);

/// KL(q || p) in nats, summed over dimensions.
Var kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p);

/// log N(z; mu, diag(sigma^2)) on plain values.
double log_density(const Tensor& z, const Tensor& mu, const Tensor& sigma);

}  // namespace aligndraw

#endif  // ALIGNDRAW_LATENT_HPP_
