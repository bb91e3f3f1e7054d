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

#include "aligndraw/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "aligndraw/kernels.hpp"

namespace aligndraw {

const Tensor& BackwardContext::input(std::size_t k) const {
  return tape_->value(inputs_[k]);
}

Tensor* BackwardContext::input_grad(std::size_t k) {
  const NodeId id = inputs_[k];
  if (!tape_->requires_grad(id)) return nullptr;
  if (!(*has_grad_)[id]) {
    (*grads_)[id] = Tensor::zeros_like(tape_->value(id));
    (*has_grad_)[id] = 1;
  }
  return &(*grads_)[id];
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParamId id, const Tensor& value) {
  Node node;
  node.op = "parameter";
  node.external = &value;
  node.requires_grad = true;
  node.is_param = true;
  node.param = id;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  Node node;
  node.op = op;
  node.owned = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.tape() != this) {
      throw std::invalid_argument(std::string(op) +
                                  ": operand recorded on another tape");
    }
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(NodeId id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) {
    throw std::invalid_argument("backward: loss recorded on another tape");
  }
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1 || lv.rank() != 0) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(lv.shape()));
  }
  Gradients result;
  std::vector<Tensor> grads(loss.id() + 1);
  std::vector<char> has_grad(loss.id() + 1, 0);
  grads[loss.id()] = Tensor::scalar(1.0);
  has_grad[loss.id()] = 1;

  BackwardContext ctx;
  ctx.tape_ = this;
  ctx.grads_ = &grads;
  ctx.has_grad_ = &has_grad;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!has_grad[i] || !n.requires_grad) continue;
    if (n.is_param) {
      auto it = result.find(n.param);
      if (it == result.end()) {
        result.emplace(n.param, std::move(grads[i]));
      } else {
        auto dst = it->second.data();
        auto src = grads[i].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
      continue;
    }
    if (!n.backward) continue;
    ctx.output_ = &value(i);
    ctx.grad_ = &grads[i];
    ctx.inputs_ = n.inputs;
    n.backward(ctx);
    grads[i] = Tensor();  // release early
  }
  return result;
}

namespace ad {
namespace {

[[noreturn]] void shape_error(std::string_view op, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_string(a) + " vs " + shape_string(b));
}

enum class Bcast { kFull, kScalar, kRow };

struct BinaryLayout {
  Shape out;
  Bcast a = Bcast::kFull;
  Bcast b = Bcast::kFull;
  std::size_t cols = 1;
};

BinaryLayout binary_layout(std::string_view op, const Shape& a,
                           const Shape& b) {
  BinaryLayout l;
  if (a == b) {
    l.out = a;
  } else if (a.empty()) {
    l.out = b;
    l.a = Bcast::kScalar;
  } else if (b.empty()) {
    l.out = a;
    l.b = Bcast::kScalar;
  } else if (a.size() == 2 && b.size() == 1 && b[0] == a[1]) {
    l.out = a;
    l.b = Bcast::kRow;
    l.cols = a[1];
  } else if (a.size() == 1 && b.size() == 2 && a[0] == b[1]) {
    l.out = b;
    l.a = Bcast::kRow;
    l.cols = b[1];
  } else {
    shape_error(op, a, b);
  }
  return l;
}

inline std::size_t bidx(Bcast mode, std::size_t o, std::size_t cols) {
  switch (mode) {
    case Bcast::kFull:
      return o;
    case Bcast::kScalar:
      return 0;
    case Bcast::kRow:
      return o % cols;
  }
  return o;
}

// Elementwise binary op; `fwd(a, b)` gives the value, `da(a, b)` and
// `db(a, b)` the partial derivatives.
template <typename F, typename DA, typename DB>
Var binary(std::string_view op, Var a, Var b, F fwd, DA da, DB db) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const BinaryLayout l = binary_layout(op, av.shape(), bv.shape());
  Tensor out(l.out);
  for (std::size_t o = 0; o < out.size(); ++o) {
    out[o] = fwd(av[bidx(l.a, o, l.cols)], bv[bidx(l.b, o, l.cols)]);
  }
  const Var inputs[] = {a, b};
  return a.tape().record(op, std::move(out), inputs,
                         [l, da, db](BackwardContext& ctx) {
                           const Tensor& x = ctx.input(0);
                           const Tensor& y = ctx.input(1);
                           const Tensor& g = ctx.grad();
                           Tensor* gx = ctx.input_grad(0);
                           Tensor* gy = ctx.input_grad(1);
                           for (std::size_t o = 0; o < g.size(); ++o) {
                             const std::size_t ia = bidx(l.a, o, l.cols);
                             const std::size_t ib = bidx(l.b, o, l.cols);
                             if (gx) (*gx)[ia] += g[o] * da(x[ia], y[ib]);
                             if (gy) (*gy)[ib] += g[o] * db(x[ia], y[ib]);
                           }
                         });
}

// Elementwise unary op; `dy(x, y)` is the derivative given input and output.
template <typename F, typename D>
Var unary(std::string_view op, Var a, F fwd, D dy) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  const Var inputs[] = {a};
  return a.tape().record(op, std::move(out), inputs,
                         [dy](BackwardContext& ctx) {
                           Tensor* gx = ctx.input_grad(0);
                           if (!gx) return;
                           const Tensor& x = ctx.input(0);
                           const Tensor& y = ctx.output();
                           const Tensor& g = ctx.grad();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             (*gx)[i] += g[i] * dy(x[i], y[i]);
                           }
                         });
}

inline double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// (m, k, n) of a product with rank-1 operands read as a row (left) or a
// column (right).
struct MatmulDims {
  std::size_t m, k, n;
  Shape out;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b) {
  if (a.size() == 2 && b.size() == 2 && a[1] == b[0]) {
    return {a[0], a[1], b[1], Shape{a[0], b[1]}};
  }
  if (a.size() == 2 && b.size() == 1 && a[1] == b[0]) {
    return {a[0], a[1], 1, Shape{a[0]}};
  }
  if (a.size() == 1 && b.size() == 2 && a[0] == b[0]) {
    return {1, a[0], b[1], Shape{b[1]}};
  }
  shape_error("matmul", a, b);
}

}  // namespace

Var matmul(Var a, Var b) {
  using kernels::Transpose;
  const MatmulDims d = matmul_dims(a.shape(), b.shape());
  Tensor out(d.out);
  kernels::gemm(Transpose::kNo, Transpose::kNo, d.m, d.n, d.k, a.value().data(),
                b.value().data(), out.data(), false);
  const Var inputs[] = {a, b};
  return a.tape().record("matmul", std::move(out), inputs,
                         [d](BackwardContext& ctx) {
                           const Tensor& g = ctx.grad();
                           if (Tensor* ga = ctx.input_grad(0)) {
                             // dA += dC * B^T
                             kernels::gemm(Transpose::kNo, Transpose::kYes, d.m,
                                           d.k, d.n, g.data(),
                                           ctx.input(1).data(), ga->data(),
                                           true);
                           }
                           if (Tensor* gb = ctx.input_grad(1)) {
                             // dB += A^T * dC
                             kernels::gemm(Transpose::kYes, Transpose::kNo, d.k,
                                           d.n, d.m, ctx.input(0).data(),
                                           g.data(), gb->data(), true);
                           }
                         });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) {
    throw std::invalid_argument("transpose: needs a matrix, got " +
                                shape_string(av.shape()));
  }
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const Var inputs[] = {a};
  return a.tape().record("transpose", std::move(out), inputs,
                         [r, c](BackwardContext& ctx) {
                           Tensor* ga = ctx.input_grad(0);
                           if (!ga) return;
                           const Tensor& g = ctx.grad();
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               (*ga)[i * c + j] += g[j * r + i];
                         });
}

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw std::domain_error("div: zero divisor");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: non-positive argument " +
                              std::to_string(v));
    }
  }
  return unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary("softplus", a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Var affine(Var a, double scale, double shift) {
  return unary(
      "affine", a, [scale, shift](double x) { return scale * x + shift; },
      [scale](double, double) { return scale; });
}

Var softmax(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 1 && av.rank() != 2) {
    throw std::invalid_argument("softmax: needs a vector or matrix, got " +
                                shape_string(av.shape()));
  }
  const std::size_t rows = av.rows(), cols = av.cols();
  if (cols == 0) throw std::invalid_argument("softmax: empty rows");
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data().data() + r * cols;
    double* y = out.data().data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
  const Var inputs[] = {a};
  return a.tape().record("softmax", std::move(out), inputs,
                         [rows, cols](BackwardContext& ctx) {
                           Tensor* ga = ctx.input_grad(0);
                           if (!ga) return;
                           const Tensor& y = ctx.output();
                           const Tensor& g = ctx.grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             const std::size_t o = r * cols;
                             double s = 0.0;
                             for (std::size_t j = 0; j < cols; ++j)
                               s += g[o + j] * y[o + j];
                             for (std::size_t j = 0; j < cols; ++j)
                               (*ga)[o + j] += y[o + j] * (g[o + j] - s);
                           }
                         });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const Shape& first = parts[0].shape();
  const std::size_t rank = first.size();
  if (rank == 0 || rank > 2 || axis >= rank) {
    throw std::invalid_argument("concat: unsupported axis " +
                                std::to_string(axis) + " for shape " +
                                shape_string(first));
  }
  // View every operand as (outer x inner) with the concatenated axis inside
  // `inner`.
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != rank) shape_error("concat", first, s);
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && s[d] != first[d]) shape_error("concat", first, s);
    }
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const std::size_t outer = axis == 0 ? 1 : first[0];
  Tensor out(out_shape);
  const std::size_t out_inner = out.size() / outer;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& v = p.value();
    const std::size_t inner = v.size() / outer;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data().data() + o * inner, inner,
                  out.data().data() + o * out_inner + off);
    off += inner;
  }
  return parts[0].tape().record(
      "concat", std::move(out), parts,
      [outer, out_inner, offsets](BackwardContext& ctx) {
        const Tensor& g = ctx.grad();
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          Tensor* gk = ctx.input_grad(k);
          if (!gk) continue;
          const std::size_t inner = gk->size() / outer;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < inner; ++j)
              (*gk)[o * inner + j] += g[o * out_inner + offsets[k] + j];
        }
      });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no operands");
  const Shape& first = rows[0].shape();
  if (first.size() != 1) {
    throw std::invalid_argument("stack_rows: operands must be vectors, got " +
                                shape_string(first));
  }
  for (const Var& r : rows) {
    if (r.shape() != first) shape_error("stack_rows", first, r.shape());
  }
  const std::size_t cols = first[0];
  Tensor out(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(rows[i].value().data().data(), cols,
                out.data().data() + i * cols);
  return rows[0].tape().record("stack_rows", std::move(out), rows,
                               [cols](BackwardContext& ctx) {
                                 const Tensor& g = ctx.grad();
                                 const std::size_t n = g.size() / cols;
                                 for (std::size_t i = 0; i < n; ++i) {
                                   Tensor* gi = ctx.input_grad(i);
                                   if (!gi) continue;
                                   for (std::size_t j = 0; j < cols; ++j)
                                     (*gi)[j] += g[i * cols + j];
                                 }
                               });
}

Var slice(Var a, std::size_t begin, std::size_t end, std::size_t axis) {
  const Tensor& av = a.value();
  const std::size_t rank = av.rank();
  if (rank == 0 || rank > 2 || axis >= rank || begin > end ||
      end > av.shape()[axis]) {
    throw std::invalid_argument(
        "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
        ") on axis " + std::to_string(axis) + " invalid for shape " +
        shape_string(av.shape()));
  }
  Shape out_shape = av.shape();
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const std::size_t outer = axis == 0 ? 1 : av.shape()[0];
  const std::size_t in_inner = av.size() / outer;
  const std::size_t stride = rank == 2 && axis == 0 ? av.shape()[1] : 1;
  const std::size_t offset = begin * stride;
  const std::size_t inner = out.size() / outer;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(av.data().data() + o * in_inner + offset, inner,
                out.data().data() + o * inner);
  const Var inputs[] = {a};
  return a.tape().record(
      "slice", std::move(out), inputs,
      [outer, in_inner, offset, inner](BackwardContext& ctx) {
        Tensor* ga = ctx.input_grad(0);
        if (!ga) return;
        const Tensor& g = ctx.grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < inner; ++j)
            (*ga)[o * in_inner + offset + j] += g[o * inner + j];
      });
}

Var row(Var a, std::size_t index) {
  if (a.shape().size() != 2) {
    throw std::invalid_argument("row: needs a matrix, got " +
                                shape_string(a.shape()));
  }
  const std::size_t cols = a.shape()[1];
  return reshape(slice(a, index, index + 1, 0), Shape{cols});
}

Var element(Var a, std::size_t index) {
  if (a.shape().size() != 1) {
    throw std::invalid_argument("element: needs a vector, got " +
                                shape_string(a.shape()));
  }
  return reshape(slice(a, index, index + 1, 0), Shape{});
}

Var reshape(Var a, Shape shape) {
  const Tensor& av = a.value();
  if (shape_size(shape) != av.size()) shape_error("reshape", av.shape(), shape);
  Tensor out = av.reshaped(std::move(shape));
  const Var inputs[] = {a};
  return a.tape().record("reshape", std::move(out), inputs,
                         [](BackwardContext& ctx) {
                           Tensor* ga = ctx.input_grad(0);
                           if (!ga) return;
                           const Tensor& g = ctx.grad();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             (*ga)[i] += g[i];
                         });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Var inputs[] = {a};
  return a.tape().record("sum", Tensor::scalar(s), inputs,
                         [](BackwardContext& ctx) {
                           Tensor* ga = ctx.input_grad(0);
                           if (!ga) return;
                           const double g = ctx.grad()[0];
                           for (auto& v : ga->data()) v += g;
                         });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) {
    throw std::invalid_argument("gather_rows: needs a matrix, got " +
                                shape_string(tv.shape()));
  }
  const std::size_t rows = tv.shape()[0], cols = tv.shape()[1];
  for (std::size_t idx : indices) {
    if (idx >= rows) {
      throw std::out_of_range("gather_rows: index " + std::to_string(idx) +
                              " outside table of " + std::to_string(rows) +
                              " rows");
    }
  }
  Tensor out(Shape{indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(tv.data().data() + indices[i] * cols, cols,
                out.data().data() + i * cols);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const Var inputs[] = {table};
  return table.tape().record(
      "gather_rows", std::move(out), inputs,
      [idx = std::move(idx), cols](BackwardContext& ctx) {
        Tensor* gt = ctx.input_grad(0);
        if (!gt) return;
        const Tensor& g = ctx.grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j)
            (*gt)[idx[i] * cols + j] += g[i * cols + j];
      });
}

}  // namespace ad
}  // namespace aligndraw
