#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tsnmt {

// Dense row-major matrix of doubles. Scalars are 1x1 and vectors are 1xn.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::initializer_list<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void fill(double v);
  bool all_finite() const;
  std::string shape_string() const;

  bool operator==(const Tensor& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const;
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Ordered record of operations. Nodes are appended in evaluation order, so
// the record is always topologically sorted; backward walks it in reverse.
//
// A tape built with grad_enabled=false only stores values, which is what the
// decoders use. backward() may run once per tape; a second call throws.
class Tape {
 public:
  // Propagates the gradient of one node into its inputs.
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  Var constant(double v) { return constant(Tensor::scalar(v)); }

  // Binds an externally owned tensor as a leaf. The tensor must outlive the
  // tape and must not be modified while the tape is in use.
  Var leaf(const Tensor& param, bool requires_grad = true);

  // Reverse accumulation from a 1x1 loss.
  void backward(const Var& loss);
  bool backward_done() const { return backward_done_; }

  // Gradient of the loss w.r.t. a node; zeros if the node was not reached.
  Tensor grad(const Var& v) const;
  bool has_grad(const Var& v) const;

  // Used by operation implementations.
  Var record(Tensor value, bool requires_grad, BackwardFn fn);
  const Tensor& value_of(std::uint32_t id) const;
  const Tensor& grad_of(std::uint32_t id) const { return nodes_[id].grad; }
  // Returns the gradient buffer of `id`, allocating zeros on first access.
  Tensor& grad_buffer(std::uint32_t id);
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
    Tensor grad;
  };

  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Operations. Binary elementwise ops accept equal shapes or a 1x1 operand on
// either side; nothing else broadcasts implicitly.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add(const Var& a, double s);
Var sub(double s, const Var& a);
Var scale(const Var& a, double s);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);

enum class ElementwiseOp { Add, Sub, Mul, Tanh, Sigmoid, Exp, Log };
// Dispatching form; unary ops take exactly one argument, binary exactly two.
Var elementwise(ElementwiseOp op, std::span<const Var> args);

// Row-wise (last axis) softmax with max subtraction.
Var softmax(const Var& logits);
// Fused log(softmax(x)), row-wise.
Var log_softmax(const Var& logits);

// Row i of the result is row ids[i] of the table.
Var gather_rows(const Var& table, std::span<const std::int32_t> ids);

Var sum(const Var& a);
// Column sums: n x d -> 1 x d.
Var sum_rows(const Var& a);
Var transpose(const Var& a);
// Replicates a 1 x d row n times.
Var broadcast_rows(const Var& row, std::size_t n);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// Sum of a constant-weighted tensor: sum_i w_i * a_i. `weights` carries no gradient.
Var weighted_sum(const Var& a, const Tensor& weights);

// |analytic - central| / max(|analytic| + |central|, 1e-5). The floor keeps
// coordinates with near-zero gradients, where central differences are
// dominated by rounding, from counting as relative failures.
double gradient_relative_error(double analytic, double numeric);

// Max over coordinates of gradient_relative_error.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// `f` builds a scalar loss on the given tape from leaves bound to `params`
// (same order). It must be deterministic. Parameters are perturbed in place
// and restored.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
GradCheckResult finite_difference_check(const ScalarFn& f, std::vector<Tensor>& params,
                                        double eps = 1e-5);

}  // namespace tsnmt
