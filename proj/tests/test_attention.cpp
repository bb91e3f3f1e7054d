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

#include "aligndraw/attention.hpp"
#include "aligndraw/recurrent.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aligndraw;
using namespace aligndraw::testing;

namespace {

struct RawAlign {
  Tensor v, u, w, b;
};

RawAlign random_align(RngStream& rng, std::size_t l, std::size_t two_m, std::size_t n) {
  return {random_tensor(rng, {l}), random_tensor(rng, {l, two_m}), random_tensor(rng, {l, n}),
          random_tensor(rng, {l})};
}

AlignParams bind(Tape& tape, const RawAlign& a) {
  return {tape.constant(a.v), tape.constant(a.u), tape.constant(a.w), tape.constant(a.b)};
}

// Direct evaluation of the alignment softmax, one word at a time.
std::vector<double> scalar_alpha(const RawAlign& a, const Tensor& states, const Tensor& h) {
  const std::size_t l = a.v.size(), N = states.rows(), M = states.cols(), n = h.size();
  std::vector<double> score(N);
  for (std::size_t k = 0; k < N; ++k) {
    double s = 0;
    for (std::size_t r = 0; r < l; ++r) {
      double pre = a.b[r];
      for (std::size_t j = 0; j < M; ++j) pre += a.u.at(r, j) * states.at(k, j);
      for (std::size_t j = 0; j < n; ++j) pre += a.w.at(r, j) * h[j];
      s += a.v[r] * std::tanh(pre);
    }
    score[k] = s;
  }
  const double top = *std::max_element(score.begin(), score.end());
  double z = 0;
  for (double& s : score) z += (s = std::exp(s - top));
  for (double& s : score) s /= z;
  return score;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("single word gets all the weight") {
  RngStream rng(1);
  const RawAlign a = random_align(rng, 4, 6, 3);
  Tape tape;
  const LangEncoding enc = fixed_encoding(tape, random_tensor(rng, {1, 6}));
  const Var alpha = alignment_probabilities(tape.constant(random_tensor(rng, {3})), enc, bind(tape, a));
  REQUIRE(alpha.size() == 1);
  CHECK(alpha.value()[0] == 1.0);
}

TEST_CASE("zero v gives uniform alignment") {
  RngStream rng(2);
  RawAlign a = random_align(rng, 4, 6, 3);
  a.v = Tensor(Shape{4}, 0.0);
  Tape tape;
  const LangEncoding enc = fixed_encoding(tape, random_tensor(rng, {5, 6}));
  const Tensor alpha = alignment_probabilities(tape.constant(random_tensor(rng, {3})), enc, bind(tape, a)).value();
  for (double v : alpha.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("alignment matches the scalar oracle") {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const RawAlign a = random_align(rng, 4, 4, 3);  // l=4, m=2, n=3
    const Tensor states = random_tensor(rng, {5, 4});
    const Tensor h = random_tensor(rng, {3});
    Tape tape;
    const LangEncoding enc = fixed_encoding(tape, states);
    const Tensor alpha = alignment_probabilities(tape.constant(h), enc, bind(tape, a)).value();
    const auto expect = scalar_alpha(a, states, h);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(alpha[k] - expect[k]) < 1e-14);
  }
}

TEST_CASE("one-hot alpha selects a word exactly") {
  RngStream rng(4);
  const Tensor states = random_tensor(rng, {4, 6});
  Tape tape;
  const LangEncoding enc = fixed_encoding(tape, states);
  for (std::size_t k = 0; k < 4; ++k) {
    Tensor alpha(Shape{4}, 0.0);
    alpha[k] = 1.0;
    const Tensor s = dynamic_representation(tape.constant(alpha), enc).value();
    for (std::size_t j = 0; j < 6; ++j) CHECK(s[j] == states.at(k, j));
  }
}

TEST_CASE("uniform alpha over identical words returns that word") {
  RngStream rng(5);
  const Tensor row = random_tensor(rng, {6});
  Tensor states(Shape{3, 6});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 6; ++j) states.at(k, j) = row[j];
  Tape tape;
  const Tensor s = dynamic_representation(tape.constant(Tensor(Shape{3}, 1.0 / 3.0)),
                                          fixed_encoding(tape, states)).value();
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(s[j] - row[j]) < 1e-15);
}

TEST_CASE("weighted sum matches compensated accumulation") {
  RngStream rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t N = random_size(rng, 1, 30);
    const Tensor states = random_tensor(rng, {N, 8}, -100, 100);
    Tape tape;
    const Tensor alpha = ad::softmax(tape.constant(random_tensor(rng, {N}, -3, 3))).value();
    const Tensor s = dynamic_representation(tape.constant(alpha), fixed_encoding(tape, states)).value();
    for (std::size_t j = 0; j < 8; ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < N; ++k) acc += static_cast<long double>(alpha[k]) * states.at(k, j);
      CHECK(std::abs(s[j] - static_cast<double>(acc)) < 1e-12);
    }
  }
}

TEST_CASE("alignment is a distribution and a convex combination over 1000 draws") {
  RngStream rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = random_size(rng, 1, 12), M = 2 * random_size(rng, 1, 4),
                      l = random_size(rng, 1, 6), n = random_size(rng, 1, 5);
    const RawAlign a = random_align(rng, l, M, n);
    const Tensor states = random_tensor(rng, {N, M}, -3, 3);
    Tape tape;
    const LangEncoding enc = fixed_encoding(tape, states);
    const AlignContext ctx = prepare_alignment(enc, bind(tape, a));
    const Alignment al = align(tape.constant(random_tensor(rng, {n}, -3, 3)), ctx, bind(tape, a));
    double sum = 0;
    for (double v : al.alpha.value().values()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-10);
    for (std::size_t j = 0; j < M; ++j) {
      double lo = states.at(0, j), hi = lo;
      for (std::size_t k = 1; k < N; ++k) lo = std::min(lo, states.at(k, j)), hi = std::max(hi, states.at(k, j));
      CHECK(al.s.value()[j] >= lo - 1e-12);
      CHECK(al.s.value()[j] <= hi + 1e-12);
    }
  }
}

TEST_CASE("shifting every score leaves alpha unchanged") {
  RngStream rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const RawAlign a = random_align(rng, 5, 4, 3);
    Tape tape;
    const LangEncoding enc = fixed_encoding(tape, random_tensor(rng, {6, 4}));
    const AlignContext ctx = prepare_alignment(enc, bind(tape, a));
    const Var scores = alignment_scores(tape.constant(random_tensor(rng, {3})), ctx, bind(tape, a));
    const Tensor base = ad::softmax(scores).value();
    const Tensor shifted = ad::softmax(ad::affine(scores, 1.0, rng.uniform_range(-50, 50))).value();
    for (std::size_t k = 0; k < base.size(); ++k) CHECK(std::abs(base[k] - shifted[k]) < 1e-12);
  }
}

TEST_CASE("alignment gradients match finite differences") {
  RngStream rng(9);
  const RawAlign a = random_align(rng, 4, 4, 3);
  const std::vector<Tensor> in = {a.v, a.u, a.w, a.b, random_tensor(rng, {3}), random_tensor(rng, {5, 4})};
  const Builder build = [](Tape& tape, std::span<const Var> v) {
    const LangEncoding enc{v[5], Var()};
    const AlignParams p{v[0], v[1], v[2], v[3]};
    const Alignment al = align(v[4], prepare_alignment(enc, p), p);
    (void)tape;
    return al.s;
  };
  for (int k = 0; k < 10; ++k) CHECK(adjoint_error(build, in, rng) < 1e-5);
}

TEST_CASE("alignment rejects mismatched sizes") {
  RngStream rng(10);
  const RawAlign a = random_align(rng, 4, 4, 3);
  Tape tape;
  const LangEncoding enc = fixed_encoding(tape, random_tensor(rng, {5, 4}));
  CHECK_THROWS_AS(alignment_probabilities(tape.constant(Tensor(Shape{2})), enc, bind(tape, a)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dynamic_representation(tape.constant(Tensor(Shape{4}, 0.25)), enc),
                  std::invalid_argument);
  const LangEncoding wide = fixed_encoding(tape, random_tensor(rng, {5, 6}));
  CHECK_THROWS_AS(alignment_probabilities(tape.constant(Tensor(Shape{3})), wide, bind(tape, a)),
                  std::invalid_argument);
}

}  // TEST_SUITE
