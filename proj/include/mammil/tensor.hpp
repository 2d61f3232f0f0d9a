#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mammil {

#ifdef MAMMIL_FLOAT32
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<real> value;
  std::vector<real> grad;  // empty until first needed, then same length as value
  bool requires_grad = false;

  std::span<real> grad_span() {
    if (grad.size() != value.size()) grad.assign(value.size(), real(0));
    return grad;
  }
};
}  // namespace detail

/// Dense row-major array with an optional gradient slot.
///
/// Tensors are reference handles: copying a Tensor shares the storage. Use
/// clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<real> values, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<real> data() { return node_->value; }
  std::span<const real> data() const { return node_->value; }
  real& operator[](std::size_t i) { return node_->value[i]; }
  real operator[](std::size_t i) const { return node_->value[i]; }
  real& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
  real at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  real item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);

  /// Gradient slot; zero-filled on first access.
  std::span<real> grad() { return node_->grad_span(); }
  std::span<const real> grad() const { return node_->grad_span(); }
  bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
  void zero_grad();

  Tensor clone(bool requires_grad = false) const;
  /// Copy of the values with a new shape of equal element count; not recorded.
  Tensor reshaped(Shape shape) const;

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered log of executed differentiable operations.
///
/// Each recorded entry is an adjoint closure; backward() replays them in
/// reverse. A tape is single-use: after backward() it must be reset() before
/// it records or replays again. One tape per bag forward.
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return mode_ == Mode::record; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// True if the op should be recorded: tape is recording and an input needs grad.
  bool wants(std::initializer_list<const Tensor*> inputs) const;

  void record(std::function<void()> adjoint);
  void backward(Tensor& loss);
  void reset();

 private:
  Mode mode_;
  bool replayed_ = false;
  std::vector<std::function<void()>> entries_;
};

}  // namespace mammil
