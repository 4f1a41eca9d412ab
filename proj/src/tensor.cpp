#include "tsnmt/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tsnmt/errors.hpp"

namespace tsnmt {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "tensor of shape [" << rows << "x" << cols << "] given " << values_.size()
        << " values";
    throw DimensionError(msg.str());
  }
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t d = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(n * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError("ragged rows in Tensor::from_rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor(n, d, std::move(values));
}

void Tensor::fill(double v) {
  for (double& x : values_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : values_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream s;
  s << "[" << rows_ << "x" << cols_ << "]";
  return s.str();
}

// ---------------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value_of(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("item() on non-scalar tensor " + v.shape_string());
  return v[0];
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::leaf(const Tensor& param, bool requires_grad) {
  Node n;
  n.ref = &param;
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by operation with output shape " +
                       value.shape_string());
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Tape::value_of(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ref != nullptr ? *n.ref : n.value;
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor& v = value_of(id);
    n.grad = Tensor(v.rows(), v.cols(), 0.0);
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.value().shape_string());
  }
  if (backward_done_) throw ContractError("backward: tape already differentiated");
  backward_done_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  grad_buffer(loss.id_)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, static_cast<std::uint32_t>(i));
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (!n.grad.empty()) return n.grad;
  const Tensor& val = value_of(v.id_);
  return Tensor(val.rows(), val.cols(), 0.0);
}

bool Tape::has_grad(const Var& v) const { return !nodes_[v.id_].grad.empty(); }

}  // namespace tsnmt
