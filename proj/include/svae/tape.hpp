/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Reverse-mode automatic differentiation over a linear tape.
//
// Every primitive appends its output node and, when any input needs a
// gradient, a backward closure. Inputs always precede outputs on the tape,
// so Tape::backward() can run the closures once each in reverse order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svae/errors.hpp"
#include "svae/tensor.hpp"

namespace svae {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::span<const double> value() const;
  std::size_t size() const { return value().size(); }
  double item() const;  // value of a one-element node

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> adjoint;
    Tensor* parameter = nullptr;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var constant(const Tensor& t) { return push(t.shape(), {t.data().begin(), t.data().end()}, false); }
  Var constant(Shape shape, std::vector<double> value) {
    Tensor checked(std::move(shape), std::move(value));
    return constant(checked);
  }
  Var scalar(double v) { return push({1}, {v}, false); }

  // Leaf whose adjoint is added into `param.grad()` by backward(). The value
  // is copied, so later edits to `param` do not affect this tape.
  Var parameter(Tensor& param) {
    Var v = push(param.shape(), {param.data().begin(), param.data().end()}, true);
    nodes_[v.id()].parameter = &param;
    return v;
  }

  // Reverse sweep from a one-element root. Adjoints are recomputed from
  // scratch on every call; parameter gradients accumulate.
  void backward(Var root) {
    if (root.size() != 1) {
      throw DimensionError("backward root must be a scalar, got " + shape_string(root.shape()));
    }
    for (Node& n : nodes_) {
      if (n.requires_grad) {
        n.adjoint.assign(n.value.size(), 0.0);
      } else {
        n.adjoint.clear();
      }
    }
    Node& r = nodes_[root.id()];
    if (!r.requires_grad) return;
    r.adjoint[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      if (nodes_[it->output].requires_grad) it->backward(*this);
    }
    for (Node& n : nodes_) {
      if (n.parameter == nullptr) continue;
      std::span<double> g = n.parameter->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.adjoint[i];
    }
  }

  Node& node(Var v) { return nodes_[v.id()]; }
  const Node& node(Var v) const { return nodes_[v.id()]; }
  Node& node(std::size_t id) { return nodes_[id]; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t op_count() const { return ops_.size(); }

  // Primitive construction hooks.
  Var push(Shape shape, std::vector<double> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(shape), std::move(value), {}, nullptr, requires_grad});
    return Var(this, nodes_.size() - 1);
  }
  void record(std::size_t output, std::function<void(Tape&)> backward) {
    ops_.push_back(Op{output, std::move(backward)});
  }

 private:
  struct Op {
    std::size_t output;
    std::function<void(Tape&)> backward;
  };

  std::vector<Node> nodes_;
  std::vector<Op> ops_;
};

inline const Shape& Var::shape() const { return tape_->node(*this).shape; }
inline std::span<const double> Var::value() const { return tape_->node(*this).value; }
inline double Var::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape()));
  return value()[0];
}

namespace detail {

inline void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands live on different tapes");
}

inline void require_same_shape(const char* op, Var a, Var b) {
  require_same_tape(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Unary elementwise op whose derivative is expressed through input x and output y.
template <typename Forward, typename Derivative>
Var unary(Var a, Forward f, Derivative df) {
  Tape& t = a.tape();
  const auto in = a.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const bool rg = t.node(a).requires_grad;
  Var y = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(y.id(), [ai = a.id(), yi = y.id(), df](Tape& tp) {
      auto& x = tp.node(ai);
      auto& o = tp.node(yi);
      for (std::size_t i = 0; i < o.value.size(); ++i) {
        x.adjoint[i] += o.adjoint[i] * df(x.value[i], o.value[i]);
      }
    });
  }
  return y;
}

}  // namespace detail

// C = A·B for A [m×k] and B [k×n]; B may also be a vector [k], giving [m].
inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || (sb.size() != 1 && sb.size() != 2) || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(sa) + " and " + shape_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb.size() == 2 ? sb[1] : 1;
  Tape& t = a.tape();
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  Shape so = sb.size() == 2 ? Shape{m, n} : Shape{m};
  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var c = t.push(std::move(so), std::move(out), rg);
  if (rg) {
    t.record(c.id(), [ai = a.id(), bi = b.id(), ci = c.id(), m, k, n](Tape& tp) {
      auto& A = tp.node(ai);
      auto& B = tp.node(bi);
      const auto& dC = tp.node(ci).adjoint;
      if (A.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += dC[i * n + j] * B.value[p * n + j];
            A.adjoint[i * k + p] += s;
          }
      }
      if (B.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.value[i * k + p];
            for (std::size_t j = 0; j < n; ++j) B.adjoint[p * n + j] += aip * dC[i * n + j];
          }
      }
    });
  }
  return c;
}

inline Var add(Var a, Var b) {
  detail::require_same_shape("add", a, b);
  Tape& t = a.tape();
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var c = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(c.id(), [ai = a.id(), bi = b.id(), ci = c.id()](Tape& tp) {
      const auto& dC = tp.node(ci).adjoint;
      for (std::size_t id : {ai, bi}) {
        auto& n = tp.node(id);
        if (!n.requires_grad) continue;
        for (std::size_t i = 0; i < dC.size(); ++i) n.adjoint[i] += dC[i];
      }
    });
  }
  return c;
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape("sub", a, b);
  Tape& t = a.tape();
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var c = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(c.id(), [ai = a.id(), bi = b.id(), ci = c.id()](Tape& tp) {
      const auto& dC = tp.node(ci).adjoint;
      auto& A = tp.node(ai);
      auto& B = tp.node(bi);
      if (A.requires_grad)
        for (std::size_t i = 0; i < dC.size(); ++i) A.adjoint[i] += dC[i];
      if (B.requires_grad)
        for (std::size_t i = 0; i < dC.size(); ++i) B.adjoint[i] -= dC[i];
    });
  }
  return c;
}

// Hadamard product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape("mul", a, b);
  Tape& t = a.tape();
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool rg = t.node(a).requires_grad || t.node(b).requires_grad;
  Var c = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(c.id(), [ai = a.id(), bi = b.id(), ci = c.id()](Tape& tp) {
      const auto& dC = tp.node(ci).adjoint;
      auto& A = tp.node(ai);
      auto& B = tp.node(bi);
      if (A.requires_grad)
        for (std::size_t i = 0; i < dC.size(); ++i) A.adjoint[i] += dC[i] * B.value[i];
      if (B.requires_grad)
        for (std::size_t i = 0; i < dC.size(); ++i) B.adjoint[i] += dC[i] * A.value[i];
    });
  }
  return c;
}

// Scalar-tensor ops: the only broadcasting the tape supports.
inline Var scale(Var a, double s) {
  return detail::unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(Var a, double s) {
  return detail::unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  return detail::unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var exp(Var a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  for (double x : a.value()) {
    if (!(x > 0.0)) throw DomainError("log of nonpositive value " + std::to_string(x));
  }
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace detail {

inline std::pair<std::size_t, std::size_t> row_layout(const char* op, Var a) {
  const Shape& s = a.shape();
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " + shape_string(s));
}

inline void require_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError(std::string(op) + ": non-finite input");
  }
}

}  // namespace detail

// Softmax over the last axis, max-subtracted.
inline Var softmax(Var a) {
  auto [rows, cols] = detail::row_layout("softmax", a);
  const auto in = a.value();
  detail::require_finite("softmax", in);
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
  Tape& t = a.tape();
  const bool rg = t.node(a).requires_grad;
  Var s = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(s.id(), [ai = a.id(), si = s.id(), rows = rows, cols = cols](Tape& tp) {
      auto& A = tp.node(ai);
      const auto& S = tp.node(si);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += S.adjoint[o + j] * S.value[o + j];
        for (std::size_t j = 0; j < cols; ++j) A.adjoint[o + j] += S.value[o + j] * (S.adjoint[o + j] - dot);
      }
    });
  }
  return s;
}

// log(softmax(a)) over the last axis via log-sum-exp.
inline Var log_softmax(Var a) {
  auto [rows, cols] = detail::row_layout("log_softmax", a);
  const auto in = a.value();
  detail::require_finite("log_softmax", in);
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
  }
  Tape& t = a.tape();
  const bool rg = t.node(a).requires_grad;
  Var s = t.push(a.shape(), std::move(out), rg);
  if (rg) {
    t.record(s.id(), [ai = a.id(), si = s.id(), rows = rows, cols = cols](Tape& tp) {
      auto& A = tp.node(ai);
      const auto& S = tp.node(si);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t o = r * cols;
        double total = 0.0;
        for (std::size_t j = 0; j < cols; ++j) total += S.adjoint[o + j];
        for (std::size_t j = 0; j < cols; ++j) A.adjoint[o + j] += S.adjoint[o + j] - std::exp(S.value[o + j]) * total;
      }
    });
  }
  return s;
}

inline Var sum(Var a) {
  Tape& t = a.tape();
  double s = 0.0;
  for (double x : a.value()) s += x;
  const bool rg = t.node(a).requires_grad;
  Var y = t.push({1}, {s}, rg);
  if (rg) {
    t.record(y.id(), [ai = a.id(), yi = y.id()](Tape& tp) {
      auto& A = tp.node(ai);
      const double g = tp.node(yi).adjoint[0];
      for (double& d : A.adjoint) d += g;
    });
  }
  return y;
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

// Picks flat entries of `a`, producing a vector of indices.size() values.
inline Var gather(Var a, std::vector<std::size_t> indices) {
  if (indices.empty()) throw DimensionError("gather: no indices");
  const auto in = a.value();
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= in.size()) {
      throw DimensionError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                           shape_string(a.shape()));
    }
    out[i] = in[indices[i]];
  }
  Tape& t = a.tape();
  const bool rg = t.node(a).requires_grad;
  Var y = t.push({indices.size()}, std::move(out), rg);
  if (rg) {
    t.record(y.id(), [ai = a.id(), yi = y.id(), idx = std::move(indices)](Tape& tp) {
      auto& A = tp.node(ai);
      const auto& dY = tp.node(yi).adjoint;
      for (std::size_t i = 0; i < idx.size(); ++i) A.adjoint[idx[i]] += dY[i];
    });
  }
  return y;
}

// Stacks equal-length vectors into a [rows.size() × n] matrix.
inline Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  Tape& t = rows.front().tape();
  const Shape& s0 = rows.front().shape();
  if (s0.size() != 1) throw DimensionError("stack_rows: rows must be vectors, got " + shape_string(s0));
  const std::size_t n = s0[0];
  std::vector<double> out;
  out.reserve(rows.size() * n);
  bool rg = false;
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (Var r : rows) {
    detail::require_same_shape("stack_rows", rows.front(), r);
    out.insert(out.end(), r.value().begin(), r.value().end());
    rg = rg || t.node(r).requires_grad;
    ids.push_back(r.id());
  }
  Var y = t.push({rows.size(), n}, std::move(out), rg);
  if (rg) {
    t.record(y.id(), [ids = std::move(ids), yi = y.id(), n](Tape& tp) {
      const auto& dY = tp.node(yi).adjoint;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        auto& R = tp.node(ids[r]);
        if (!R.requires_grad) continue;
        for (std::size_t j = 0; j < n; ++j) R.adjoint[j] += dY[r * n + j];
      }
    });
  }
  return y;
}

// Snapshot of a node's current value as a standalone tensor (no gradient).
inline Tensor to_tensor(Var v) { return Tensor(v.shape(), {v.value().begin(), v.value().end()}); }

}  // namespace svae
