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

#include "aligndraw/attention.hpp"

#include <stdexcept>

namespace aligndraw {

AlignContext prepare_alignment(const LangEncoding& enc, const AlignParams& p) {
  if (enc.length() == 0) {
    throw std::invalid_argument("alignment over an empty caption");
  }
  const Shape& u = p.u.shape();
  if (u.size() != 2 || u[1] != enc.width()) {
    throw std::invalid_argument("align: U " + shape_string(u) +
                                " does not fit encoding " +
                                shape_string(enc.states.shape()));
  }
  return {&enc, ad::matmul(enc.states, ad::transpose(p.u))};
}

Var alignment_scores(Var h_gen_prev, const AlignContext& ctx,
                     const AlignParams& p) {
  Var state_term = ad::matmul(p.w, h_gen_prev) + p.b;  // l
  Var hidden = ad::tanh(ctx.projected + state_term);   // N x l
  return ad::matmul(hidden, p.v);                      // N
}

Var alignment_probabilities(Var h_gen_prev, const AlignContext& ctx,
                            const AlignParams& p) {
  return ad::softmax(alignment_scores(h_gen_prev, ctx, p));
}

Var alignment_probabilities(Var h_gen_prev, const LangEncoding& enc,
                            const AlignParams& p) {
  return alignment_probabilities(h_gen_prev, prepare_alignment(enc, p), p);
}

Var dynamic_representation(Var alpha, const LangEncoding& enc) {
  if (alpha.shape() != Shape{enc.length()}) {
    throw std::invalid_argument(
        "dynamic_representation: alpha " + shape_string(alpha.shape()) +
        " vs encoding " + shape_string(enc.states.shape()));
  }
  return ad::matmul(alpha, enc.states);
}

Alignment align(Var h_gen_prev, const AlignContext& ctx, const AlignParams& p) {
  Var alpha = alignment_probabilities(h_gen_prev, ctx, p);
  return {alpha, dynamic_representation(alpha, *ctx.encoding)};
}

}  // namespace aligndraw
