#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "mona/tensor.hpp"

namespace mona {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, which is a topological order of
/// the computation graph, so backward() is a single reverse sweep that
/// visits every node once.
class Tape {
 public:
  /// Accumulates into `input_grads` (null entries are inputs that do not
  /// need gradients) given the gradient of the node's output.
  using BackwardFn = std::function<void(const Tensor& output, const Tensor& grad_output,
                                        std::span<const Tensor* const> inputs,
                                        std::span<Tensor* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records a custom operation. `backward` may be empty when no input
  /// requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Seeds d(output)/d(output) = 1 and propagates. Output must be scalar.
  void backward(Var output);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  /// Gradient of the last backward() output w.r.t. `v` (zeros if unreached).
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
};

// Elementwise binary ops broadcast over the 2-D view: each operand dimension
// must match the other or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var tanh(Var a);
Var square(Var a);
/// Gaussian-error linear unit, tanh approximation.
Var gelu(Var a);

Var matmul(Var a, Var b);
Var transpose(Var a);

/// Sum of all elements, rank-0 result.
Var sum(Var a);
Var mean(Var a);
/// axis 0 reduces rows (result 1xC); axis 1 reduces columns (result Rx1).
Var sum_axis(Var a, int axis);
Var mean_axis(Var a, int axis);

Var select_cols(Var a, std::span<const std::size_t> cols);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
/// out[:, t] = a[:, t + offset], zero outside the valid range.
Var shift_cols(Var a, int offset);

/// Entries a(r, c) for each (r, c) as a rank-1 tensor.
Var gather(Var a, std::span<const std::pair<std::size_t, std::size_t>> cells);

/// Row-wise log-sum-exp over the entries where `include` (same 2-D shape as
/// `a`, nonzero = include) is set. Rows with no included entries yield 0.
/// Result is a rank-1 tensor of length rows(a).
Var logsumexp_rows(Var a, const Tensor& include);

/// Pairwise cosine similarity of the columns of a (F x La) and b (F x Lb):
/// a_i . b_j / max(|a_i| |b_j|, kCosineEps). Result La x Lb.
Var cosine_matrix(Var a, Var b);
/// Cosine similarity of two equal-length vectors, rank-0 result.
Var cosine_similarity(Var a, Var b);

inline constexpr double kCosineEps = 1e-8;

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

/// Scalar function of tensors, built on a tape from leaf variables.
using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Analytic gradient of f at `inputs` by reverse-mode accumulation.
/// Throws ContractError when f does not return a one-element value.
std::vector<Tensor> grad(const ScalarFunction& f, std::span<const Tensor> inputs);

/// Evaluates f without recording gradients.
double evaluate(const ScalarFunction& f, std::span<const Tensor> inputs);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate of every input.
std::vector<Tensor> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const Tensor> inputs, double h);

/// Single-input convenience overloads.
Tensor grad(const std::function<Var(Var)>& f, const Tensor& x);
Tensor finite_difference_gradient(const std::function<Var(Var)>& f, const Tensor& x, double h);

/// Largest |a_i - b_i| / max(1, |a_i|, |b_i|) over all entries.
double max_relative_error(const Tensor& a, const Tensor& b);

/// Scalar GeLU (tanh approximation) and its derivative.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace mona
