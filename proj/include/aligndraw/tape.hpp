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

#ifndef ALIGNDRAW_TAPE_HPP_
#define ALIGNDRAW_TAPE_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "aligndraw/tensor.hpp"

namespace aligndraw {

using NodeId = std::size_t;
using ParamId = std::size_t;
using Gradients = std::map<ParamId, Tensor>;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives and has not been cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

class BackwardContext {
 public:
  const Tensor& output() const { return *output_; }
  /// Adjoint of the loss with respect to this node's output.
  const Tensor& grad() const { return *grad_; }
  const Tensor& input(std::size_t k) const;
  /// Accumulator for input k's adjoint, or nullptr when input k does not
  /// lead to any parameter.
  Tensor* input_grad(std::size_t k);

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  const Tensor* output_ = nullptr;
  const Tensor* grad_ = nullptr;
  std::span<const NodeId> inputs_;
  std::vector<Tensor>* grads_ = nullptr;
  std::vector<char>* has_grad_ = nullptr;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Records primitive applications in evaluation order and replays them in
/// reverse for the adjoint pass. One tape per sample rollout; not thread
/// safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that receives a gradient entry keyed by `id`. The tensor is
  /// referenced, not copied, and must outlive the tape's use.
  Var parameter(ParamId id, const Tensor& value);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs,
             BackwardFn backward);

  /// Reverse sweep from a scalar loss. Returns d loss / d p for every
  /// parameter leaf reachable from the loss; the tape itself is unchanged.
  Gradients backward(Var loss) const;

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::string_view op(NodeId id) const { return nodes_[id].op; }

 private:
  struct Node {
    std::string_view op;
    std::vector<NodeId> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    bool is_param = false;
    ParamId param = 0;
    BackwardFn backward;
  };
  friend class BackwardContext;

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

/// Differentiable primitives. Elementwise binary operations accept equal
/// shapes, a rank-0 scalar against anything, or a vector broadcast across
/// the rows of a matrix whose column count matches.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var tanh(Var a);
Var exp(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var softplus(Var a);
/// scale * a + shift with constant coefficients.
Var affine(Var a, double scale, double shift = 0.0);
/// Softmax of a vector, or of each row of a matrix.
Var softmax(Var a);
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var stack_rows(std::span<const Var> rows);
Var slice(Var a, std::size_t begin, std::size_t end, std::size_t axis = 0);
Var row(Var a, std::size_t index);
Var element(Var a, std::size_t index);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var gather_rows(Var table, std::span<const std::size_t> indices);

inline Var concat(std::initializer_list<Var> parts, std::size_t axis = 0) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

}  // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }

}  // namespace aligndraw

#endif  // ALIGNDRAW_TAPE_HPP_
