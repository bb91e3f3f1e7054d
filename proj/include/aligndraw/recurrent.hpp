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

#ifndef ALIGNDRAW_RECURRENT_HPP_
#define ALIGNDRAW_RECURRENT_HPP_

#include <cstddef>
#include <span>

#include "aligndraw/tape.hpp"

namespace aligndraw {

/// Forget-gate LSTM weights with the four gates stacked in the order input,
/// forget, cell, output: wx is (4H x I), wh is (4H x H), b is (4H).
struct LstmWeights {
  Var wx;
  Var wh;
  Var b;

  std::size_t hidden_size() const { return wh.shape()[1]; }
  std::size_t input_size() const { return wx.shape()[1]; }
  void validate() const;
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(const LstmState& prev, Var input, const LstmWeights& w);

/// Zero hidden and cell vectors on `tape`.
LstmState zero_state(Tape& tape, std::size_t hidden);

/// Per-word caption representation: row i is the forward state after word i
/// followed by the backward state after word i.
struct LangEncoding {
  Var states;       // N x 2m
  Var final_state;  // [forward state N, backward state 1]

  std::size_t length() const { return states.shape()[0]; }
  std::size_t width() const { return states.shape()[1]; }
};

/// Bidirectional encoding of a caption given as vocabulary codes. Both
/// directions start from zero states.
LangEncoding encode_caption(std::span<const std::size_t> codes, Var embedding,
                            const LstmWeights& fwd, const LstmWeights& bwd);

/// Wraps a fixed N x 2m representation (for example the mean training
/// sentence) so it can stand in for an encoded caption.
LangEncoding fixed_encoding(Tape& tape, const Tensor& states);

}  // namespace aligndraw

#endif  // ALIGNDRAW_RECURRENT_HPP_
