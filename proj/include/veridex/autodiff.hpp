// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense tensors, a reverse-mode tape and the Adam optimizer.
//
// Tensors are rank 1 (vectors) or rank 2 (row-major matrices); scalars are
// rank-1 tensors of extent 1. Broadcasting is limited to matrix x vector
// products; everything else requires equal shapes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace veridex::ad {

using Real = double;
using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor vector(std::vector<Real> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> values,
                       bool requires_grad = false);
  static Tensor identity(std::size_t n, bool requires_grad = false);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> values() const noexcept { return values_; }
  std::span<Real> values() noexcept { return values_; }
  Real operator[](std::size_t i) const { return values_[i]; }
  Real& operator[](std::size_t i) { return values_[i]; }
  Real at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
  Real& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool flag) noexcept { requires_grad_ = flag; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Empty span when no gradient has been populated.
  std::span<const Real> grad() const noexcept;
  void zero_grad() const;
  void clear_grad() const { grad_.reset(); }
  void accumulate_grad(std::span<const Real> delta) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<Real> values_;
  bool requires_grad_ = false;
  // Gradient accumulator, written only by Tape::backward and zero_grad. Kept
  // mutable so frozen parameter sets can be passed by const reference.
  mutable std::optional<std::vector<Real>> grad_;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
};

// Records operations in execution order; backward() walks them in reverse.
// A tape is a single-threaded unit of work.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape& tape, std::span<const Real> out_grad)>;

  explicit Tape(bool check_finite = kCheckFiniteByDefault);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant leaf; never receives a gradient.
  Var input(Tensor value);
  // Leaf referencing an externally owned parameter. When the parameter has
  // requires_grad set, backward() accumulates into its gradient. The
  // parameter must outlive the tape.
  Var parameter(const Tensor& param);

  // Records an op result. `inputs` lists the ids the op reads; `fn` receives
  // the gradient of this node and must push gradients to its inputs via
  // grad_of(). Checks finiteness when enabled.
  Var record(const char* op, Tensor value, std::initializer_list<std::uint32_t> inputs,
             BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const std::uint32_t> inputs,
             BackwardFn fn);

  const Tensor& value(std::uint32_t id) const;
  const Tensor& value(Var v) const { return value(v.id); }

  // Gradient buffer for node `id`, zero-filled on first access.
  std::span<Real> grad_of(std::uint32_t id);
  // Gradient of a node after backward(); empty if the node was unreachable.
  std::span<const Real> grad(Var v) const;
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  // Reverse sweep from a scalar loss. Parameters registered with
  // requires_grad always end up with a populated (possibly zero) gradient.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Id the next recorded node will receive.
  std::uint32_t next_id() const noexcept { return static_cast<std::uint32_t>(nodes_.size()); }
  bool check_finite() const noexcept { return check_finite_; }

#ifdef NDEBUG
  static constexpr bool kCheckFiniteByDefault = false;
#else
  static constexpr bool kCheckFiniteByDefault = true;
#endif

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<Real> grad;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_parameter = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool check_finite_;
};

enum class Activation { kRelu, kTanh, kSigmoid };

// Products: (m x k)(k x n), (m x k)(k), (k)(k x n).
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Real factor);
Var elementwise(Var x, Activation kind);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

// Softmax along `axis` (0 for vectors; 0 or 1 for matrices), stabilized by
// subtracting the slice maximum.
Var softmax(Var x, std::size_t axis = 0);
// Row softmax over a matrix where entries with mask == 0 are excluded and
// produce probability 0. Every row needs at least one unmasked entry.
Var masked_softmax_rows(Var x, const Tensor& mask);

Var concat(Var a, Var b, std::size_t axis = 0);
Var transpose(Var x);
// Row `index` of a matrix, as a vector.
Var row(Var x, std::size_t index);
// Contiguous sub-vector.
Var slice(Var x, std::size_t offset, std::size_t length);
// Vector of the entries at `indices`, in that order.
Var gather(Var x, std::span<const std::size_t> indices);
// Stacks equal-length vectors into a matrix.
Var stack_rows(std::span<const Var> rows);
Var sum(Var x);
// Column means of a matrix.
Var mean_rows(Var x);
Var sum_rows(Var x);

// Keeps the k largest entries (ties toward the lower index), zeroes the rest
// and renormalizes the survivors to sum 1. Input must be non-negative with a
// positive top-k mass.
Var topk_renormalize(Var p, std::size_t k);
// Indices of the k largest entries in descending order, ties to lower index.
std::vector<std::size_t> topk_indices(std::span<const Real> values, std::size_t k);

// -log softmax(logits)[label], computed via log-sum-exp.
Var cross_entropy(Var logits, std::size_t label);

// Plain-value softmax used outside the tape.
std::vector<Real> softmax_values(std::span<const Real> x);

struct AdamOptions {
  Real learning_rate = 1e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

// First/second moment accumulators for an ordered parameter list.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {}) : options_(options) {}

  const AdamOptions& options() const noexcept { return options_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::span<const std::vector<Real>> first_moments() const noexcept { return m_; }
  std::span<const std::vector<Real>> second_moments() const noexcept { return v_; }

 private:
  friend void adam_step(std::span<Tensor* const> params, AdamState& state);

  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
};

// One bias-corrected Adam update of every parameter, in place. Parameters
// must have populated gradients; the list must keep the same order and
// shapes across calls with the same state.
void adam_step(std::span<Tensor* const> params, AdamState& state);

}  // namespace veridex::ad
