#include "mammil/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "mammil/error.hpp"

namespace mammil {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0, requires_grad); }

Tensor Tensor::filled(Shape shape, real value, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<detail::TensorNode>();
  node->value.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<real> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(node->value.size(), 0);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

std::size_t Tensor::rows() const { return ndim() == 1 ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const { return node_->shape.back(); }

real Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  if (flag) node_->grad_span();
}

void Tensor::zero_grad() {
  if (!node_) return;
  std::fill(node_->grad.begin(), node_->grad.end(), real(0));
}

Tensor Tensor::clone(bool requires_grad) const {
  return from(shape(), node_->value, requires_grad);
}

Tensor Tensor::reshaped(Shape shape) const { return from(std::move(shape), node_->value); }

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::function<void()> adjoint) {
  if (replayed_) throw StateError("tape already replayed; call reset() before recording again");
  entries_.push_back(std::move(adjoint));
}

void Tape::backward(Tensor& loss) {
  if (replayed_) throw StateError("backward called twice on the same tape without reset()");
  if (!loss.defined() || loss.numel() != 1) {
    throw ValidationError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) throw ValidationError("loss is not connected to any parameter");
  replayed_ = true;
  loss.grad()[0] += real(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

void Tape::reset() {
  entries_.clear();
  replayed_ = false;
}

}  // namespace mammil
