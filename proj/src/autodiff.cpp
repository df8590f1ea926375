// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include "veridex/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "veridex/errors.hpp"

namespace veridex::ad {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void dimension_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a) +
                       " and " + shape_to_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_to_string(t.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : shape_(std::move(shape)), values_(std::move(values)), requires_grad_(requires_grad) {
  if (shape_.empty() || shape_.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got " + shape_to_string(shape_));
  }
  for (std::size_t extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_to_string(shape_));
  }
  if (shape_product(shape_) != values_.size()) {
    throw DimensionError("tensor of shape " + shape_to_string(shape_) + " given " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<Real> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<Real> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
  Tensor t = zeros({n, n}, requires_grad);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  require_rank("rows", *this, 2);
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_rank("cols", *this, 2);
  return shape_[1];
}

std::span<const Real> Tensor::grad() const noexcept {
  if (!grad_) return {};
  return *grad_;
}

void Tensor::zero_grad() const { grad_.emplace(values_.size(), 0.0); }

void Tensor::accumulate_grad(std::span<const Real> delta) const {
  if (delta.size() != values_.size()) {
    throw DimensionError("gradient of size " + std::to_string(delta.size()) +
                         " for tensor of shape " + shape_to_string(shape_));
  }
  if (!grad_) grad_.emplace(values_.size(), 0.0);
  for (std::size_t i = 0; i < delta.size(); ++i) (*grad_)[i] += delta[i];
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(id); }

Tape::Tape(bool check_finite) : check_finite_(check_finite) { nodes_.reserve(256); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(const Tensor& param) {
  Node node;
  node.external = &param;
  node.needs_grad = param.requires_grad();
  node.is_parameter = true;
  return push(std::move(node));
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<std::uint32_t> inputs,
                 BackwardFn fn) {
  return record(op, std::move(value), std::span<const std::uint32_t>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(const char* op, Tensor value, std::span<const std::uint32_t> inputs,
                 BackwardFn fn) {
  if (check_finite_) {
    for (Real x : value.values()) {
      if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
  Node node;
  node.owned = std::move(value);
  for (std::uint32_t id : inputs) node.needs_grad = node.needs_grad || nodes_.at(id).needs_grad;
  if (node.needs_grad) node.backward = std::move(fn);
  return push(std::move(node));
}

const Tensor& Tape::value(std::uint32_t id) const {
  const Node& node = nodes_[id];
  return node.external ? *node.external : node.owned;
}

std::span<Real> Tape::grad_of(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(value(id).size(), 0.0);
  return node.grad;
}

std::span<const Real> Tape::grad(Var v) const { return nodes_[v.id].grad; }

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: loss recorded on a different tape");
  if (value(loss.id).size() != 1) {
    throw DimensionError("backward: loss must be scalar, got shape " +
                         shape_to_string(value(loss.id).shape()));
  }
  for (Node& node : nodes_) node.grad.clear();
  grad_of(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty() || !node.backward) continue;
    // The callback may touch other nodes' buffers but never this one's, so
    // a copy keeps the span valid.
    const std::vector<Real> out_grad = node.grad;
    node.backward(*this, out_grad);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (!node.is_parameter || !node.external->requires_grad()) continue;
    if (node.grad.empty()) node.grad.assign(node.external->size(), 0.0);
    node.external->accumulate_grad(node.grad);
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

struct MatDims {
  std::size_t rows;
  std::size_t cols;
};

MatDims as_matrix(const Tensor& t, bool vector_is_row) {
  if (t.rank() == 2) return {t.shape()[0], t.shape()[1]};
  return vector_is_row ? MatDims{1, t.size()} : MatDims{t.size(), 1};
}

// out(m x n) += a(m x k) * b(k x n), optional transposes on the operands.
void gemm_acc(std::span<const Real> a, std::span<const Real> b, std::span<Real> out,
              std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      Real* orow = out.data() + i * n;
      if (!trans_b) {
        const Real* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * b[j * k + p];
      }
    }
  }
}

Var unary_map(const char* op, Var x, const std::function<Real(Real)>& f,
              const std::function<Real(Real, Real)>& df /* (x, y) -> dy/dx */) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  std::vector<Real> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tensor result(xv.shape(), std::move(out));
  const std::uint32_t xid = x.id;
  const std::uint32_t self = tape.next_id();
  Var y = tape.record(op, std::move(result), {xid},
                      [xid, self, df](Tape& t, std::span<const Real> g) {
                        const Tensor& in = t.value(xid);
                        const Tensor& outv = t.value(self);
                        auto gx = t.grad_of(xid);
                        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], outv[i]);
                      });
  return y;
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.rank() == 1 && bv.rank() == 1) dimension_error("matmul", av.shape(), bv.shape());
  const MatDims da = as_matrix(av, /*vector_is_row=*/true);
  const MatDims db = as_matrix(bv, /*vector_is_row=*/false);
  if (da.cols != db.rows) dimension_error("matmul", av.shape(), bv.shape());
  const std::size_t m = da.rows, k = da.cols, n = db.cols;
  std::vector<Real> out(m * n, 0.0);
  gemm_acc(av.values(), bv.values(), out, m, k, n, false, false);
  Shape shape;
  if (av.rank() == 2 && bv.rank() == 2) shape = {m, n};
  else if (av.rank() == 2) shape = {m};
  else shape = {n};
  const std::uint32_t aid = a.id, bid = b.id;
  return tape.record("matmul", Tensor(std::move(shape), std::move(out)), {aid, bid},
                     [aid, bid, m, k, n](Tape& t, std::span<const Real> g) {
                       if (t.needs_grad(aid)) {
                         // dA = dC * B^T
                         gemm_acc(g, t.value(bid).values(), t.grad_of(aid), m, n, k, false, true);
                       }
                       if (t.needs_grad(bid)) {
                         // dB = A^T * dC
                         gemm_acc(t.value(aid).values(), g, t.grad_of(bid), k, m, n, true, false);
                       }
                     });
}

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Var binary_same_shape(const char* op, Var a, Var b, Fwd fwd, BwdA da, BwdB db) {
  require_same_tape(op, a, b);
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.shape() != bv.shape()) dimension_error(op, av.shape(), bv.shape());
  std::vector<Real> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  const std::uint32_t aid = a.id, bid = b.id;
  return tape.record(op, Tensor(av.shape(), std::move(out)), {aid, bid},
                     [aid, bid, da, db](Tape& t, std::span<const Real> g) {
                       const Tensor& x = t.value(aid);
                       const Tensor& y = t.value(bid);
                       if (t.needs_grad(aid)) {
                         auto ga = t.grad_of(aid);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i]);
                       }
                       if (t.needs_grad(bid)) {
                         auto gb = t.grad_of(bid);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(x[i], y[i]);
                       }
                     });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(
      "add", a, b, [](Real x, Real y) { return x + y; }, [](Real, Real) { return 1.0; },
      [](Real, Real) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_same_shape(
      "sub", a, b, [](Real x, Real y) { return x - y; }, [](Real, Real) { return 1.0; },
      [](Real, Real) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_same_shape(
      "mul", a, b, [](Real x, Real y) { return x * y; }, [](Real, Real y) { return y; },
      [](Real x, Real) { return x; });
}

Var scale(Var a, Real factor) {
  return unary_map(
      "scale", a, [factor](Real x) { return x * factor; }, [factor](Real, Real) { return factor; });
}

Var elementwise(Var x, Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      // Subgradient at exactly 0 is 0.
      return unary_map(
          "relu", x, [](Real v) { return v > 0.0 ? v : 0.0; },
          [](Real v, Real) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kTanh:
      return unary_map(
          "tanh", x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return 1.0 - y * y; });
    case Activation::kSigmoid:
      return unary_map(
          "sigmoid", x,
          [](Real v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const Real e = std::exp(v);
            return e / (1.0 + e);
          },
          [](Real, Real y) { return y * (1.0 - y); });
  }
  throw Error("unknown activation");
}

Var relu(Var x) { return elementwise(x, Activation::kRelu); }
Var tanh(Var x) { return elementwise(x, Activation::kTanh); }
Var sigmoid(Var x) { return elementwise(x, Activation::kSigmoid); }

namespace {

// Visits each softmax slice as (offset, stride, length).
template <typename F>
void for_each_slice(const Shape& shape, std::size_t axis, F&& f) {
  if (shape.size() == 1) {
    if (axis != 0) throw DimensionError("softmax: axis out of range for " + shape_to_string(shape));
    f(std::size_t{0}, std::size_t{1}, shape[0]);
    return;
  }
  const std::size_t rows = shape[0], cols = shape[1];
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) f(r * cols, std::size_t{1}, cols);
  } else if (axis == 0) {
    for (std::size_t c = 0; c < cols; ++c) f(c, cols, rows);
  } else {
    throw DimensionError("softmax: axis out of range for " + shape_to_string(shape));
  }
}

void softmax_backward(std::span<const Real> y, std::span<const Real> g, std::span<Real> gx,
                      const Shape& shape, std::size_t axis) {
  for_each_slice(shape, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    Real dot = 0.0;
    for (std::size_t i = 0; i < len; ++i) dot += g[off + i * stride] * y[off + i * stride];
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = off + i * stride;
      gx[idx] += y[idx] * (g[idx] - dot);
    }
  });
}

}  // namespace

std::vector<Real> softmax_values(std::span<const Real> x) {
  if (x.empty()) throw DimensionError("softmax: empty axis");
  const Real mx = *std::max_element(x.begin(), x.end());
  std::vector<Real> out(x.size());
  Real total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    total += out[i];
  }
  for (Real& v : out) v /= total;
  return out;
}

Var softmax(Var x, std::size_t axis) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  std::vector<Real> out(xv.size());
  for_each_slice(xv.shape(), axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, xv[off + i * stride]);
    Real total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const Real e = std::exp(xv[off + i * stride] - mx);
      out[off + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[off + i * stride] /= total;
  });
  const std::uint32_t xid = x.id;
  const std::uint32_t self = tape.next_id();
  Var y = tape.record("softmax", Tensor(xv.shape(), std::move(out)), {xid},
                      [xid, self, axis](Tape& t, std::span<const Real> g) {
                        const Tensor& yv = t.value(self);
                        softmax_backward(yv.values(), g, t.grad_of(xid), yv.shape(), axis);
                      });
  return y;
}

Var masked_softmax_rows(Var x, const Tensor& mask) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank("masked_softmax_rows", xv, 2);
  if (mask.shape() != xv.shape()) dimension_error("masked_softmax_rows", xv.shape(), mask.shape());
  const std::size_t rows = xv.shape()[0], cols = xv.shape()[1];
  std::vector<Real> out(xv.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    Real mx = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c) != 0.0) {
        mx = std::max(mx, xv.at(r, c));
        any = true;
      }
    }
    if (!any) throw DimensionError("masked_softmax_rows: row " + std::to_string(r) + " fully masked");
    Real total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c) == 0.0) continue;
      const Real e = std::exp(xv.at(r, c) - mx);
      out[r * cols + c] = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= total;
  }
  const std::uint32_t xid = x.id;
  const std::uint32_t self = tape.next_id();
  // Masked entries have y == 0, so the plain softmax rule leaves them untouched.
  Var y = tape.record("masked_softmax_rows", Tensor(xv.shape(), std::move(out)), {xid},
                      [xid, self](Tape& t, std::span<const Real> g) {
                        const Tensor& yv = t.value(self);
                        softmax_backward(yv.values(), g, t.grad_of(xid), yv.shape(), 1);
                      });
  return y;
}

Var concat(Var a, Var b, std::size_t axis) {
  require_same_tape("concat", a, b);
  Tape& tape = *a.tape;
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.rank() != bv.rank() || axis >= av.rank()) dimension_error("concat", av.shape(), bv.shape());
  const std::uint32_t aid = a.id, bid = b.id;
  if (av.rank() == 1 || axis == 0) {
    if (av.rank() == 2 && av.shape()[1] != bv.shape()[1]) dimension_error("concat", av.shape(), bv.shape());
    std::vector<Real> out(av.values().begin(), av.values().end());
    out.insert(out.end(), bv.values().begin(), bv.values().end());
    Shape shape = av.shape();
    shape[0] += bv.shape()[0];
    const std::size_t na = av.size();
    return tape.record("concat", Tensor(std::move(shape), std::move(out)), {aid, bid},
                       [aid, bid, na](Tape& t, std::span<const Real> g) {
                         if (t.needs_grad(aid)) {
                           auto ga = t.grad_of(aid);
                           for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                         }
                         if (t.needs_grad(bid)) {
                           auto gb = t.grad_of(bid);
                           for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                         }
                       });
  }
  // Column concatenation of matrices.
  if (av.shape()[0] != bv.shape()[0]) dimension_error("concat", av.shape(), bv.shape());
  const std::size_t rows = av.shape()[0], ca = av.shape()[1], cb = bv.shape()[1];
  std::vector<Real> out(rows * (ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.values().begin() + r * ca, ca, out.begin() + r * (ca + cb));
    std::copy_n(bv.values().begin() + r * cb, cb, out.begin() + r * (ca + cb) + ca);
  }
  return tape.record("concat", Tensor({rows, ca + cb}, std::move(out)), {aid, bid},
                     [aid, bid, rows, ca, cb](Tape& t, std::span<const Real> g) {
                       const std::size_t w = ca + cb;
                       if (t.needs_grad(aid)) {
                         auto ga = t.grad_of(aid);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * w + c];
                       }
                       if (t.needs_grad(bid)) {
                         auto gb = t.grad_of(bid);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * w + ca + c];
                       }
                     });
}

Var transpose(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank("transpose", xv, 2);
  const std::size_t rows = xv.shape()[0], cols = xv.shape()[1];
  std::vector<Real> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = xv.at(r, c);
  const std::uint32_t xid = x.id;
  return tape.record("transpose", Tensor({cols, rows}, std::move(out)), {xid},
                     [xid, rows, cols](Tape& t, std::span<const Real> g) {
                       auto gx = t.grad_of(xid);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c * rows + r];
                     });
}

Var row(Var x, std::size_t index) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank("row", xv, 2);
  const std::size_t cols = xv.shape()[1];
  if (index >= xv.shape()[0]) throw DimensionError("row: index out of range");
  std::vector<Real> out(xv.values().begin() + index * cols, xv.values().begin() + (index + 1) * cols);
  const std::uint32_t xid = x.id;
  return tape.record("row", Tensor::vector(std::move(out)), {xid},
                     [xid, index, cols](Tape& t, std::span<const Real> g) {
                       auto gx = t.grad_of(xid);
                       for (std::size_t c = 0; c < cols; ++c) gx[index * cols + c] += g[c];
                     });
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank("slice", xv, 1);
  if (length == 0 || offset + length > xv.size()) throw DimensionError("slice: range out of bounds");
  std::vector<Real> out(xv.values().begin() + offset, xv.values().begin() + offset + length);
  const std::uint32_t xid = x.id;
  return tape.record("slice", Tensor::vector(std::move(out)), {xid},
                     [xid, offset](Tape& t, std::span<const Real> g) {
                       auto gx = t.grad_of(xid);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
                     });
}

Var gather(Var x, std::span<const std::size_t> indices) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank("gather", xv, 1);
  if (indices.empty()) throw DimensionError("gather: no indices");
  std::vector<Real> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= xv.size()) throw DimensionError("gather: index out of range");
    out.push_back(xv[i]);
  }
  const std::uint32_t xid = x.id;
  return tape.record("gather", Tensor::vector(std::move(out)), {xid},
                     [xid, idx = std::vector<std::size_t>(indices.begin(), indices.end())](
                         Tape& t, std::span<const Real> g) {
                       auto gx = t.grad_of(xid);
                       for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
                     });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  Tape& tape = *rows.front().tape;
  const std::size_t cols = tape.value(rows.front()).size();
  std::vector<Real> out;
  out.reserve(rows.size() * cols);
  std::vector<std::uint32_t> ids;
  for (Var r : rows) {
    if (r.tape != &tape) throw Error("stack_rows: rows on different tapes");
    const Tensor& rv = tape.value(r);
    if (rv.rank() != 1 || rv.size() != cols) dimension_error("stack_rows", tape.value(rows.front()).shape(), rv.shape());
    out.insert(out.end(), rv.values().begin(), rv.values().end());
    ids.push_back(r.id);
  }
  Tensor value({rows.size(), cols}, std::move(out));
  return tape.record("stack_rows", std::move(value), ids,
                     [ids, cols](Tape& t, std::span<const Real> g) {
                       for (std::size_t r = 0; r < ids.size(); ++r) {
                         if (!t.needs_grad(ids[r])) continue;
                         auto gr = t.grad_of(ids[r]);
                         for (std::size_t c = 0; c < cols; ++c) gr[c] += g[r * cols + c];
                       }
                     });
}

Var sum(Var x) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  Real total = 0.0;
  for (Real v : xv.values()) total += v;
  const std::uint32_t xid = x.id;
  return tape.record("sum", Tensor::scalar(total), {xid}, [xid](Tape& t, std::span<const Real> g) {
    for (Real& v : t.grad_of(xid)) v += g[0];
  });
}

namespace {

Var reduce_rows(const char* op, Var x, bool mean) {
  Tape& tape = *x.tape;
  const Tensor& xv = tape.value(x);
  require_rank(op, xv, 2);
  const std::size_t rows = xv.shape()[0], cols = xv.shape()[1];
  const Real f = mean ? 1.0 / static_cast<Real>(rows) : 1.0;
  std::vector<Real> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += xv.at(r, c);
  for (Real& v : out) v *= f;
  const std::uint32_t xid = x.id;
  return tape.record(op, Tensor::vector(std::move(out)), {xid},
                     [xid, rows, cols, f](Tape& t, std::span<const Real> g) {
                       auto gx = t.grad_of(xid);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c] * f;
                     });
}

}  // namespace

Var mean_rows(Var x) { return reduce_rows("mean_rows", x, true); }
Var sum_rows(Var x) { return reduce_rows("sum_rows", x, false); }

std::vector<std::size_t> topk_indices(std::span<const Real> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw DimensionError("topk: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(values.size()) + "]");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(k);
  return order;
}

Var topk_renormalize(Var p, std::size_t k) {
  Tape& tape = *p.tape;
  const Tensor& pv = tape.value(p);
  require_rank("topk_renormalize", pv, 1);
  std::vector<std::size_t> keep = topk_indices(pv.values(), k);
  Real mass = 0.0;
  for (std::size_t i : keep) mass += pv[i];
  if (!(mass > 0.0)) throw NumericError("topk_renormalize: non-positive top-k mass");
  std::vector<Real> out(pv.size(), 0.0);
  for (std::size_t i : keep) out[i] = pv[i] / mass;
  const std::uint32_t pid = p.id;
  return tape.record("topk_renormalize", Tensor::vector(std::move(out)), {pid},
                     [pid, keep = std::move(keep), mass](Tape& t, std::span<const Real> g) {
                       const Tensor& in = t.value(pid);
                       Real weighted = 0.0;
                       for (std::size_t i : keep) weighted += g[i] * in[i];
                       auto gp = t.grad_of(pid);
                       for (std::size_t j : keep) gp[j] += g[j] / mass - weighted / (mass * mass);
                     });
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& tape = *logits.tape;
  const Tensor& z = tape.value(logits);
  require_rank("cross_entropy", z, 1);
  if (label >= z.size()) throw DimensionError("cross_entropy: label out of range");
  std::vector<Real> probs = softmax_values(z.values());
  const Real mx = *std::max_element(z.values().begin(), z.values().end());
  Real total = 0.0;
  for (Real v : z.values()) total += std::exp(v - mx);
  const Real loss = mx + std::log(total) - z[label];
  const std::uint32_t zid = logits.id;
  return tape.record("cross_entropy", Tensor::scalar(loss), {zid},
                     [zid, label, probs = std::move(probs)](Tape& t, std::span<const Real> g) {
                       auto gz = t.grad_of(zid);
                       for (std::size_t i = 0; i < probs.size(); ++i) {
                         gz[i] += g[0] * (probs[i] - (i == label ? 1.0 : 0.0));
                       }
                     });
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<Tensor* const> params, AdamState& state) {
  if (state.m_.empty()) {
    for (Tensor* p : params) {
      state.m_.emplace_back(p->size(), 0.0);
      state.v_.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m_.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.m_.size()) +
                         " parameters, given " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != state.m_[i].size()) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has shape " +
                           shape_to_string(params[i]->shape()) + " but state has " +
                           std::to_string(state.m_[i].size()) + " entries");
    }
    if (!params[i]->has_grad()) {
      throw Error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
  }
  const AdamOptions& o = state.options_;
  state.steps_ += 1;
  const Real t = static_cast<Real>(state.steps_);
  const Real bias1 = 1.0 - std::pow(o.beta1, t);
  const Real bias2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    std::span<const Real> g = p.grad();
    std::vector<Real>& m = state.m_[i];
    std::vector<Real>& v = state.v_[i];
    std::span<Real> w = p.values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const Real m_hat = m[j] / bias1;
      const Real v_hat = v[j] / bias2;
      w[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

}  // namespace veridex::ad
