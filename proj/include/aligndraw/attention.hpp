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

#ifndef ALIGNDRAW_ATTENTION_HPP_
#define ALIGNDRAW_ATTENTION_HPP_

#include "aligndraw/recurrent.hpp"
#include "aligndraw/tape.hpp"

namespace aligndraw {

/// Word-alignment parameters: v (l), U (l x 2m), W (l x n), b (l).
struct AlignParams {
  Var v;
  Var u;
  Var w;
  Var b;
};

/// Caption-side half of the alignment scores, U h_k for every word. It does
/// not depend on the step, so a rollout computes it once.
struct AlignContext {
  const LangEncoding* encoding = nullptr;
  Var projected;  // N x l
};

AlignContext prepare_alignment(const LangEncoding& enc, const AlignParams& p);

/// Pre-softmax scores v^T tanh(U h_k + W h_gen + b), one per word.
Var alignment_scores(Var h_gen_prev, const AlignContext& ctx,
                     const AlignParams& p);

/// Softmax of the alignment scores over the caption's words.
Var alignment_probabilities(Var h_gen_prev, const AlignContext& ctx,
                            const AlignParams& p);
Var alignment_probabilities(Var h_gen_prev, const LangEncoding& enc,
                            const AlignParams& p);

/// s = sum_k alpha_k h_k.
Var dynamic_representation(Var alpha, const LangEncoding& enc);

struct Alignment {
  Var alpha;
  Var s;
};

Alignment align(Var h_gen_prev, const AlignContext& ctx, const AlignParams& p);

}  // namespace aligndraw

#endif  // ALIGNDRAW_ATTENTION_HPP_
