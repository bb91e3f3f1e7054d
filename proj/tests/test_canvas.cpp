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

#include <cfloat>
#include <cmath>

#include "aligndraw/canvas.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aligndraw;
using namespace aligndraw::testing;

namespace {

// Per-entry evaluation of a normalised Gaussian filterbank, 1-based pixels.
Tensor oracle_filterbank(double center, double stride, double var, std::size_t extent,
                         std::size_t patch) {
  Tensor f(Shape{extent, patch});
  for (std::size_t i = 0; i < patch; ++i) {
    const double mu = center + (static_cast<double>(i) + 0.5 - patch / 2.0) * stride;
    double z = 0;
    for (std::size_t a = 0; a < extent; ++a) {
      const double d = static_cast<double>(a + 1) - mu;
      z += f.at(a, i) = std::exp(-d * d / (2 * var));
    }
    // Columns whose mass underflows become uniform.
    for (std::size_t a = 0; a < extent; ++a)
      f.at(a, i) = z < DBL_MIN ? 1.0 / static_cast<double>(extent) : f.at(a, i) / z;
  }
  return f;
}

GridHead bias_head(Tape& tape, std::size_t n, std::vector<double> raw) {
  return {tape.constant(Tensor(Shape{5, n}, 0.0)), tape.constant(Tensor::vector(std::move(raw)))};
}

double inner(const Tensor& a, const Tensor& b) { return dot(a.data(), b.data()); }

}  // namespace

TEST_SUITE("canvas") {

TEST_CASE("zero raw outputs centre the grid on a 60x60 image") {
  Tape tape;
  const GridParams g = grid_params_from_hidden(tape.constant(Tensor(Shape{3})), bias_head(tape, 3, {0, 0, 0, 0, 0}),
                                               {60, 60}, 8, true);
  const GridValues v = grid_values(g);
  CHECK(v.center_x == 30.5);
  CHECK(v.center_y == 30.5);
  CHECK(v.variance == 1.0);
  CHECK(v.intensity == 1.0);
  CHECK(v.stride == doctest::Approx(59.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("grid centres follow their own axes on non-square canvases") {
  Tape tape;
  const GridValues v = grid_values(grid_params_from_hidden(
      tape.constant(Tensor(Shape{2})), bias_head(tape, 2, {0, 0, 0, 0, 0}), {10, 20}, 1, false));
  CHECK(v.center_x == 5.5);
  CHECK(v.center_y == 10.5);
  CHECK(v.stride == 1.0);
  CHECK(v.intensity == 1.0);
}

TEST_CASE("single filter at mid-image is unimodal with unit mass") {
  const Tensor f = filterbank_values(10.3, 1.0, 2.0, 20, 1);
  double sum = 0;
  std::size_t peak = 0;
  for (std::size_t a = 0; a < 20; ++a) {
    sum += f.at(a, 0);
    if (f.at(a, 0) > f.at(peak, 0)) peak = a;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(peak + 1 == 10);
  for (std::size_t a = 1; a <= peak; ++a) CHECK(f.at(a, 0) > f.at(a - 1, 0));
  for (std::size_t a = peak + 1; a < 20; ++a) CHECK(f.at(a, 0) < f.at(a - 1, 0));
}

TEST_CASE("delta-limit filters are one-hot at integer centres") {
  const std::size_t p = 4, extent = 9;
  // mu_i = 3 + i * 2 for center 6, stride 2.
  const Tensor f = filterbank_values(6.0, 2.0, 1e-6, extent, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t a = 0; a < extent; ++a) CHECK(f.at(a, i) == (a + 1 == 3 + 2 * i ? 1.0 : 0.0));
}

TEST_CASE("random filterbanks have unit mass and match the per-entry oracle") {
  RngStream rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t extent = random_size(rng, 1, 40), p = random_size(rng, 1, 10);
    const double c = rng.uniform_range(-5, extent + 5.0), s = std::exp(rng.uniform_range(-2, 1.5)),
                 v = std::exp(rng.uniform_range(-3, 3));
    const Tensor f = filterbank_values(c, s, v, extent, p);
    const Tensor o = oracle_filterbank(c, s, v, extent, p);
    for (std::size_t i = 0; i < p; ++i) {
      double sum = 0;
      for (std::size_t a = 0; a < extent; ++a) {
        sum += f.at(a, i);
        CHECK(std::abs(f.at(a, i) - o.at(a, i)) < 1e-10);
      }
      CHECK(std::abs(sum - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("off-image filters fall back to uniform with zero gradient") {
  const Tensor f = filterbank_values(-1000.0, 1.0, 0.5, 8, 2);
  for (std::size_t a = 0; a < 8; ++a) CHECK(f.at(a, 0) == 0.125);
  Tape tape;
  const Tensor c = Tensor::scalar(-1000.0), s = Tensor::scalar(1.0), v = Tensor::scalar(0.5);
  const Var fb = filterbank(tape.parameter(0, c), tape.parameter(1, s), tape.parameter(2, v), 8, 2);
  const Gradients g = tape.backward(ad::sum(ad::mul(fb, tape.constant(Tensor::matrix(8, 2, std::vector<double>(16, 0.3))))));
  for (std::size_t k = 0; k < 3; ++k) CHECK((g.count(k) == 0 || g.at(k).item() == 0.0));
}

TEST_CASE("filterbank gradients match finite differences") {
  RngStream rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t extent = random_size(rng, 2, 16), p = random_size(rng, 1, 5);
    const std::vector<Tensor> in = {Tensor::scalar(rng.uniform_range(1, extent)),
                                    Tensor::scalar(rng.uniform_range(0.3, 3)),
                                    Tensor::scalar(rng.uniform_range(0.3, 4))};
    const Builder build = [=](Tape&, std::span<const Var> v) {
      return filterbank(v[0], v[1], v[2], extent, p);
    };
    CHECK(adjoint_error(build, in, rng) < 1e-6);
  }
}

TEST_CASE("zero patch writes nothing") {
  RngStream rng(3);
  Tape tape;
  const std::size_t n = 4, p = 3;
  const WriteHeads heads{{tape.constant(random_tensor(rng, {5, n})), tape.constant(random_tensor(rng, {5}))},
                         tape.constant(Tensor(Shape{p * p, n})), tape.constant(Tensor(Shape{p * p}))};
  const WriteOutput w = write(tape.constant(random_tensor(rng, {n})), heads, {7, 9}, p, true);
  for (double v : w.delta.value().values()) CHECK(v == 0.0);
}

TEST_CASE("delta-limit placement with p equal to the canvas reproduces the patch") {
  RngStream rng(4);
  const std::size_t p = 4;
  Tape tape;
  // Centre (p+1)/2 and unit stride put filter i on pixel i + 1.
  const Tensor fx = filterbank_values((p + 1) / 2.0, 1.0, 1e-6, p, p);
  const FilterBanks fb{tape.constant(fx), tape.constant(fx)};
  const Tensor k = random_tensor(rng, {p, p});
  CHECK(place_patch(fb, tape.constant(k)).value() == k);
  CHECK(extract_patch(fb, tape.constant(k)).value() == k);
}

TEST_CASE("write matches the triple-loop oracle") {
  RngStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5, p = random_size(rng, 1, 4), H = random_size(rng, 3, 9), W = random_size(rng, 3, 9);
    const Tensor gw = random_tensor(rng, {5, n}, -0.5, 0.5), gb = random_tensor(rng, {5}, -0.5, 0.5);
    const Tensor pw = random_tensor(rng, {p * p, n}), pb = random_tensor(rng, {p * p});
    const Tensor h = random_tensor(rng, {n});
    Tape tape;
    const WriteHeads heads{{tape.constant(gw), tape.constant(gb)}, tape.constant(pw), tape.constant(pb)};
    const WriteOutput out = write(tape.constant(h), heads, {H, W}, p, true);
    const GridValues g = grid_values(out.grid);
    const Tensor fx = oracle_filterbank(g.center_x, g.stride, g.variance, H, p);
    const Tensor fy = oracle_filterbank(g.center_y, g.stride, g.variance, W, p);
    Tensor k(Shape{p, p});
    for (std::size_t r = 0; r < p * p; ++r) {
      double s = pb[r];
      for (std::size_t j = 0; j < n; ++j) s += pw.at(r, j) * h[j];
      k[r] = s;
    }
    for (std::size_t a = 0; a < H; ++a)
      for (std::size_t b = 0; b < W; ++b) {
        double s = 0;
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j) s += fx.at(a, i) * k.at(i, j) * fy.at(b, j);
        CHECK(std::abs(out.delta.value().at(a, b) - s / g.intensity) < 1e-10);
      }
  }
}

TEST_CASE("read of a constant image through delta filters") {
  const std::size_t p = 4, n = 3;
  Tape tape;
  // Zero offsets centre the grid at 2.5; a unit stride-scale gives stride 1.
  const GridHead head = bias_head(tape, n, {0, 0, std::log(1e-6), 0, 0});
  const Var r = read(tape.constant(Tensor(Shape{p, p}, 1.0)), tape.constant(Tensor(Shape{p, p}, 0.0)),
                     tape.constant(Tensor(Shape{n})), head, {p, p}, p, true);
  REQUIRE(r.size() == 2 * p * p);
  for (std::size_t i = 0; i < p * p; ++i) CHECK(r.value()[i] == 1.0);
  for (std::size_t i = p * p; i < 2 * p * p; ++i) CHECK(r.value()[i] == 0.0);
}

TEST_CASE("read matches the triple-loop oracle") {
  RngStream rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4, p = random_size(rng, 1, 4), H = random_size(rng, 3, 9), W = random_size(rng, 3, 9);
    const Tensor gw = random_tensor(rng, {5, n}, -0.5, 0.5), gb = random_tensor(rng, {5}, -0.5, 0.5);
    const Tensor x = random_image(rng, H, W), xh = random_tensor(rng, {H, W});
    const Tensor h = random_tensor(rng, {n});
    Tape tape;
    const GridHead head{tape.constant(gw), tape.constant(gb)};
    const Tensor r = read(tape.constant(x), tape.constant(xh), tape.constant(h), head, {H, W}, p, true).value();
    const GridValues g = grid_values(grid_params_from_hidden(tape.constant(h), head, {H, W}, p, true));
    const Tensor fx = oracle_filterbank(g.center_x, g.stride, g.variance, H, p);
    const Tensor fy = oracle_filterbank(g.center_y, g.stride, g.variance, W, p);
    for (int half = 0; half < 2; ++half) {
      const Tensor& img = half == 0 ? x : xh;
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          double s = 0;
          for (std::size_t a = 0; a < H; ++a)
            for (std::size_t b = 0; b < W; ++b) s += fx.at(a, i) * img.at(a, b) * fy.at(b, j);
          CHECK(std::abs(r[half * p * p + i * p + j] - g.intensity * s) < 1e-10);
        }
    }
  }
}

TEST_CASE("placement and extraction are adjoint") {
  RngStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = random_size(rng, 1, 6), H = random_size(rng, 1, 20), W = random_size(rng, 1, 20);
    Tape tape;
    const FilterBanks fb{
        tape.constant(filterbank_values(rng.uniform_range(0, H + 1.0), rng.uniform_range(0.2, 3), rng.uniform_range(0.2, 5), H, p)),
        tape.constant(filterbank_values(rng.uniform_range(0, W + 1.0), rng.uniform_range(0.2, 3), rng.uniform_range(0.2, 5), W, p))};
    const Tensor k = random_tensor(rng, {p, p}), x = random_tensor(rng, {H, W});
    const double lhs = inner(place_patch(fb, tape.constant(k)).value(), x);
    const double rhs = inner(k, extract_patch(fb, tape.constant(x)).value());
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("gradient of squared write through the grid heads") {
  RngStream rng(8);
  const std::size_t n = 4, p = 3;
  const std::vector<Tensor> in = {random_tensor(rng, {n}), random_tensor(rng, {5, n}, -0.4, 0.4),
                                  random_tensor(rng, {5}, -0.3, 0.3), random_tensor(rng, {p * p, n}),
                                  random_tensor(rng, {p * p})};
  for (bool intensity : {true, false}) {
    const Builder build = [=](Tape&, std::span<const Var> v) {
      const WriteHeads heads{{v[1], v[2]}, v[3], v[4]};
      const Var d = write(v[0], heads, {6, 5}, p, intensity).delta;
      return ad::sum(ad::mul(d, d));
    };
    CHECK(adjoint_error(build, in, rng) < 1e-5);
  }
}

TEST_CASE("read gradients match finite differences") {
  RngStream rng(9);
  const std::size_t n = 3, p = 2;
  const std::vector<Tensor> in = {random_image(rng, 5, 4), random_tensor(rng, {5, 4}), random_tensor(rng, {n}),
                                  random_tensor(rng, {5, n}, -0.4, 0.4), random_tensor(rng, {5}, -0.3, 0.3)};
  const Builder build = [=](Tape&, std::span<const Var> v) {
    return read(v[0], v[1], v[2], {v[3], v[4]}, {5, 4}, p, true);
  };
  CHECK(adjoint_error(build, in, rng) < 1e-5);
}

TEST_CASE("read rejects mismatched images") {
  Tape tape;
  const GridHead head = bias_head(tape, 2, {0, 0, 0, 0, 0});
  CHECK_THROWS_AS(read(tape.constant(Tensor(Shape{4, 4})), tape.constant(Tensor(Shape{4, 5})),
                       tape.constant(Tensor(Shape{2})), head, {4, 4}, 2, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(grid_params_from_hidden(tape.constant(Tensor(Shape{2})), head, {4, 4}, 0, true),
                  std::invalid_argument);
}

}  // TEST_SUITE
