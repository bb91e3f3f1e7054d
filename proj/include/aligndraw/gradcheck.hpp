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

#ifndef ALIGNDRAW_GRADCHECK_HPP_
#define ALIGNDRAW_GRADCHECK_HPP_

#include <functional>
#include <span>
#include <vector>

#include "aligndraw/tape.hpp"
#include "aligndraw/tensor.hpp"

namespace aligndraw {

using ScalarFunction = std::function<double(std::span<const Tensor>)>;

/// Central differences (f(p + eps e) - f(p - eps e)) / (2 eps) for every
/// coordinate of every parameter tensor. Keys are parameter positions.
Gradients finite_difference_gradient(const ScalarFunction& f,
                                     std::vector<Tensor> params, double eps);

/// ||a - b|| / max(||a||, ||b||), and 0 when both are zero.
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace aligndraw

#endif  // ALIGNDRAW_GRADCHECK_HPP_
