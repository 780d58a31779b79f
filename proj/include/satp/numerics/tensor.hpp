#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap reference-counted handle onto a node of the recorded
// computation. Every op that receives at least one requires_grad input (and
// runs while gradient recording is enabled) stores a backward closure plus
// references to its inputs; Tensor::backward() replays those closures in
// reverse topological order. Leaves created with requires_grad=true always
// carry a zero-initialised gradient buffer of the same shape.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace satp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until needed (always sized for leaves)
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  bool defined() const { return static_cast<bool>(node_); }

  std::span<const double> data() const { return node_->value; }
  // Direct write access; only meaningful for leaves (optimizer updates,
  // checkpoint loading, test perturbations).
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  // Leaves only: toggles gradient tracking (used for parameter freezing).
  void set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  // New leaf sharing no history with this tensor.
  Tensor detach() const;
  // Deep copy of value (and requires_grad flag) as a fresh leaf.
  Tensor clone() const;

  // Reverse pass from a scalar. Gradients accumulate into every
  // requires_grad node reachable from this one.
  void backward() const;

  // Internal: used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// True while ops record backward closures (thread-local; default on).
bool grad_enabled();

// RAII scope that disables recording on the current thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace satp
