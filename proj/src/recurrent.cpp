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

#include "aligndraw/recurrent.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace aligndraw {

void LstmWeights::validate() const {
  const Shape& sx = wx.shape();
  const Shape& sh = wh.shape();
  const Shape& sb = b.shape();
  if (sx.size() != 2 || sh.size() != 2 || sb.size() != 1 ||
      sh[0] != 4 * sh[1] || sx[0] != sh[0] || sb[0] != sh[0]) {
    throw std::invalid_argument("lstm weights have inconsistent shapes wx=" +
                                shape_string(sx) + " wh=" + shape_string(sh) +
                                " b=" + shape_string(sb));
  }
}

LstmState zero_state(Tape& tape, std::size_t hidden) {
  return {tape.constant(Tensor(Shape{hidden})),
          tape.constant(Tensor(Shape{hidden}))};
}

LstmState lstm_step(const LstmState& prev, Var input, const LstmWeights& w) {
  const std::size_t hidden = w.hidden_size();
  if (input.shape() != Shape{w.input_size()} ||
      prev.h.shape() != Shape{hidden} || prev.c.shape() != Shape{hidden}) {
    throw std::invalid_argument(
        "lstm_step: input " + shape_string(input.shape()) + " / state " +
        shape_string(prev.h.shape()) + " do not fit weights " +
        shape_string(w.wx.shape()));
  }
  Var gates = ad::matmul(w.wx, input) + ad::matmul(w.wh, prev.h) + w.b;
  Var i = ad::sigmoid(ad::slice(gates, 0, hidden));
  Var f = ad::sigmoid(ad::slice(gates, hidden, 2 * hidden));
  Var g = ad::tanh(ad::slice(gates, 2 * hidden, 3 * hidden));
  Var o = ad::sigmoid(ad::slice(gates, 3 * hidden, 4 * hidden));
  Var c = f * prev.c + i * g;
  Var h = o * ad::tanh(c);
  return {h, c};
}

LangEncoding encode_caption(std::span<const std::size_t> codes, Var embedding,
                            const LstmWeights& fwd, const LstmWeights& bwd) {
  if (codes.empty()) throw std::invalid_argument("encode_caption: empty caption");
  fwd.validate();
  bwd.validate();
  const std::size_t vocab = embedding.shape()[0];
  for (std::size_t c : codes) {
    if (c >= vocab) {
      throw std::out_of_range("encode_caption: word index " +
                              std::to_string(c) + " outside vocabulary of " +
                              std::to_string(vocab));
    }
  }
  Tape& tape = embedding.tape();
  const std::size_t n = codes.size();
  Var embedded = ad::gather_rows(embedding, codes);
  std::vector<Var> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) words.push_back(ad::row(embedded, i));

  std::vector<Var> forward(n), backward(n);
  LstmState s = zero_state(tape, fwd.hidden_size());
  for (std::size_t i = 0; i < n; ++i) {
    s = lstm_step(s, words[i], fwd);
    forward[i] = s.h;
  }
  s = zero_state(tape, bwd.hidden_size());
  for (std::size_t i = n; i-- > 0;) {
    s = lstm_step(s, words[i], bwd);
    backward[i] = s.h;
  }
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    rows.push_back(ad::concat({forward[i], backward[i]}));
  return {ad::stack_rows(rows), ad::concat({forward[n - 1], backward[0]})};
}

LangEncoding fixed_encoding(Tape& tape, const Tensor& states) {
  if (states.rank() != 2 || states.shape()[0] == 0) {
    throw std::invalid_argument("fixed_encoding: needs a nonempty N x 2m matrix");
  }
  Var s = tape.constant(states);
  const std::size_t n = states.shape()[0];
  const std::size_t width = states.shape()[1];
  // Forward half of the last row and backward half of the first.
  Var last = ad::row(s, n - 1);
  Var first = ad::row(s, 0);
  return {s, ad::concat({ad::slice(last, 0, width / 2),
                         ad::slice(first, width / 2, width)})};
}

}  // namespace aligndraw
