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

#include <cmath>

#include "aligndraw/latent.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aligndraw;
using namespace aligndraw::testing;

namespace {

DiagGaussian gauss(Tape& tape, const Tensor& mu, const Tensor& sigma) {
  return {tape.constant(mu), tape.constant(sigma)};
}

double kl_value(const Tensor& mq, const Tensor& sq, const Tensor& mp, const Tensor& sp) {
  Tape tape;
  return kl_diag_gauss(gauss(tape, mq, sq), gauss(tape, mp, sp)).value().item();
}

}  // namespace

TEST_SUITE("latent") {

TEST_CASE("zero hidden state gives the standard normal") {
  RngStream rng(1);
  Tape tape;
  const GaussianHead head{tape.constant(random_tensor(rng, {3, 4})), tape.constant(random_tensor(rng, {3, 4}))};
  const DiagGaussian g = gaussian_params(tape.constant(Tensor(Shape{4})), head);
  for (double v : g.mu.value().values()) CHECK(v == 0.0);
  for (double v : g.sigma.value().values()) CHECK(v == 1.0);
  const DiagGaussian s = standard_normal(tape, 3);
  CHECK(s.mu.value() == Tensor(Shape{3}, 0.0));
  CHECK(s.sigma.value() == Tensor(Shape{3}, 1.0));
}

TEST_CASE("head standard deviations stay within exp(-1) and exp(1)") {
  RngStream rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Tape tape;
    const GaussianHead head{tape.constant(random_tensor(rng, {5, 3}, -20, 20)),
                            tape.constant(random_tensor(rng, {5, 3}, -20, 20))};
    const DiagGaussian g = gaussian_params(tape.constant(random_tensor(rng, {3}, -5, 5)), head);
    for (double v : g.sigma.value().values()) {
      CHECK(v >= std::exp(-1.0));
      CHECK(v <= std::exp(1.0));
    }
    for (double v : g.mu.value().values()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("reparameterised sampling") {
  RngStream rng(3);
  Tape tape;
  const Tensor mu = random_tensor(rng, {4}), sigma = random_tensor(rng, {4}, 0.5, 2);
  CHECK(sample_reparam(gauss(tape, mu, sigma), Tensor(Shape{4}, 0.0)).value() == mu);
  const Tensor eps = rng.normal_tensor({4});
  CHECK(sample_reparam(standard_normal(tape, 4), eps).value() == eps);
  CHECK_THROWS_AS(sample_reparam(gauss(tape, mu, sigma), Tensor(Shape{3})), std::invalid_argument);
}

TEST_CASE("reparameterised draws have the requested moments") {
  RngStream rng(4);
  const Tensor mu = Tensor::vector({0.3, -1.2}), sigma = Tensor::vector({0.7, 2.0});
  const std::size_t n = 100000;
  std::vector<double> s(2, 0), ss(2, 0);
  for (std::size_t k = 0; k < n; ++k) {
    Tape tape;
    const Tensor z = sample_reparam(gauss(tape, mu, sigma), rng.normal_tensor({2})).value();
    for (std::size_t d = 0; d < 2; ++d) s[d] += z[d], ss[d] += z[d] * z[d];
  }
  for (std::size_t d = 0; d < 2; ++d) {
    const double m = s[d] / n, sd = std::sqrt(ss[d] / n - m * m);
    CHECK(std::abs(m - mu[d]) < 3 * sigma[d] / std::sqrt(n));
    // Standard error of a sample standard deviation is about sigma / sqrt(2n).
    CHECK(std::abs(sd - sigma[d]) < 3 * sigma[d] / std::sqrt(2.0 * n));
  }
}

TEST_CASE("KL closed forms") {
  RngStream rng(5);
  const Tensor m = random_tensor(rng, {6}), s = random_tensor(rng, {6}, 0.4, 2.5);
  CHECK(kl_value(m, s, m, s) == 0.0);
  CHECK(kl_value(Tensor::vector({0.5}), Tensor::vector({1.0}), Tensor::vector({0.0}), Tensor::vector({1.0})) == 0.125);
  const double wide = kl_value(Tensor::vector({0.0}), Tensor::vector({2.0}), Tensor::vector({0.0}), Tensor::vector({1.0}));
  CHECK(std::abs(wide - (-std::log(2.0) + 2.0 - 0.5)) < 1e-15);
  CHECK(std::abs(wide - 0.806853) < 1e-6);
}

TEST_CASE("KL closed forms agree with a million-sample estimate") {
  RngStream rng(6);
  const auto a = kl_monte_carlo(Tensor::vector({0.5}), Tensor::vector({1.0}), Tensor::vector({0.0}),
                                Tensor::vector({1.0}), 1000000, rng);
  CHECK(std::abs(a.mean - 0.125) < 3 * a.std_err);
  const auto b = kl_monte_carlo(Tensor::vector({0.0}), Tensor::vector({2.0}), Tensor::vector({0.0}),
                                Tensor::vector({1.0}), 1000000, rng);
  CHECK(std::abs(b.mean - (-std::log(2.0) + 1.5)) < 3 * b.std_err);
}

TEST_CASE("KL is non-negative and vanishes only at equality") {
  RngStream rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t d = random_size(rng, 1, 6);
    const Tensor mq = random_tensor(rng, {d}, -2, 2), sq = random_tensor(rng, {d}, 0.2, 3);
    const Tensor mp = random_tensor(rng, {d}, -2, 2), sp = random_tensor(rng, {d}, 0.2, 3);
    CHECK(kl_value(mq, sq, mp, sp) > 0.0);
  }
}

TEST_CASE("KL matches Monte Carlo within three standard errors on 20 pairs") {
  RngStream rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = random_size(rng, 1, 4);
    const Tensor mq = random_tensor(rng, {d}, -1, 1), sq = random_tensor(rng, {d}, 0.4, 2.5);
    const Tensor mp = random_tensor(rng, {d}, -1, 1), sp = random_tensor(rng, {d}, 0.4, 2.5);
    const auto mc = kl_monte_carlo(mq, sq, mp, sp, 100000, rng);
    CHECK(std::abs(kl_value(mq, sq, mp, sp) - mc.mean) < 3 * mc.std_err);
  }
}

TEST_CASE("KL gradients match finite differences") {
  RngStream rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<Tensor> in = {random_tensor(rng, {3}), random_tensor(rng, {3}, 0.3, 2),
                                    random_tensor(rng, {3}), random_tensor(rng, {3}, 0.3, 2)};
    const Builder build = [](Tape&, std::span<const Var> v) {
      return kl_diag_gauss({v[0], v[1]}, {v[2], v[3]});
    };
    CHECK(adjoint_error(build, in, rng) < 1e-6);
  }
}

TEST_CASE("Gaussian head gradients match finite differences") {
  RngStream rng(10);
  const std::vector<Tensor> in = {random_tensor(rng, {4}), random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})};
  const Builder build = [](Tape&, std::span<const Var> v) {
    const DiagGaussian g = gaussian_params(v[0], {v[1], v[2]});
    return ad::concat({g.mu, g.sigma});
  };
  CHECK(adjoint_error(build, in, rng) < 1e-6);
}

TEST_CASE("KL rejects mismatched dimensions") {
  Tape tape;
  CHECK_THROWS_AS(kl_diag_gauss(standard_normal(tape, 2), standard_normal(tape, 3)), std::invalid_argument);
}

TEST_CASE("log density of the standard normal at zero") {
  const double v = log_density(Tensor::vector({0.0, 0.0}), Tensor::vector({0.0, 0.0}), Tensor::vector({1.0, 1.0}));
  CHECK(std::abs(v + std::log(2 * M_PI)) < 1e-15);
}

}  // TEST_SUITE
