#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace quip {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the differentiation graph. Leaves are parameters or
// constants; interior nodes remember their inputs and how to push the
// upstream gradient into them.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  // Adds `delta` into grad, allocating it on first use.
  void accumulate(std::size_t index, double delta);
  std::span<double> grad_buffer();
};

}  // namespace detail

// Handle to a shaped, row-major array of doubles that may take part in
// reverse-mode differentiation. Copies share the underlying node.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape);
  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf that receives gradients during backward().
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const;
  // Direct write access, meant for optimizers and finite differencing.
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t flat_index) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Gradient buffer; all zeros if nothing has accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  bool all_finite() const;
  bool grad_all_finite() const;

  // Fresh constant leaf with the same values, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Reverse sweep from a scalar root. Interior gradients are recomputed from
// scratch on every call while leaf gradients accumulate, so calling this
// twice without zeroing doubles every parameter gradient.
void backward(const Tensor& root);

// While alive on the current thread, newly created ops record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

}  // namespace quip
