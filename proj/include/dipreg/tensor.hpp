#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dipreg {

using Eigen::Index;
using ArrayXd = Eigen::ArrayXd;

/// Tensor extents, outermost first (e.g. {channels, height, width}).
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);
bool shapes_equal(const Shape& a, const Shape& b);

struct TensorNode;

/// Dense n-d array of doubles acting as a node in a reverse-mode gradient
/// graph. Copying a Tensor copies the handle, not the buffer; all free
/// functions below build new graph nodes that keep their parents alive.
///
/// Leaves are created by the factory functions and carry no provenance.
/// Non-leaf tensors remember the producing operation and their parents so
/// that backward() can run the chain rule over the whole graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, ArrayXd values, bool requires_grad = true);
  static Tensor leaf(Shape shape, std::initializer_list<double> values,
                     bool requires_grad = true);
  static Tensor zeros(Shape shape, bool requires_grad = true);
  static Tensor full(Shape shape, double value, bool requires_grad = true);
  /// Non-differentiable leaf (images, noise inputs, grids).
  static Tensor constant(Shape shape, ArrayXd values);
  static Tensor scalar(double value, bool requires_grad = true);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index size() const;
  Index dim(int axis) const;

  const ArrayXd& values() const;
  /// Mutable access to a leaf's buffer (parameter updates). Throws on
  /// non-leaf tensors: interior nodes are owned by the graph.
  ArrayXd& mutable_values();
  /// Value of a size-1 tensor.
  double item() const;
  /// Element of a rank-3 tensor at (channel, row, column).
  double at(Index c, Index y, Index x) const;

  bool is_leaf() const;
  bool requires_grad() const;
  const char* op_name() const;

  bool has_grad() const;
  const ArrayXd& grad() const;
  void zero_grad();

  /// Runs reverse-mode accumulation from a scalar root. Gradients sum into
  /// every reachable leaf with requires_grad set; repeated calls keep
  /// accumulating until zero_grad()/adam_step clears them.
  void backward() const;

  /// Detached copy of the values as a fresh constant leaf.
  Tensor detached() const;

  TensorNode* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_op(const char* name, Shape shape, ArrayXd value,
                        std::vector<Tensor> parents,
                        std::function<void(TensorNode&)> backward_fn);
};

struct TensorNode {
  Shape shape;
  ArrayXd value;
  ArrayXd grad;  // empty until first touched
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backward_fn;

  ArrayXd& ensure_grad();
};

/// Internal factory for operation results; exposed so op kernels in other
/// translation units (warp, penalties) can join the same graph.
Tensor make_op(const char* name, Shape shape, ArrayXd value,
               std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn);

// Elementwise arithmetic on identically shaped tensors.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double scale, const Tensor& a);
Tensor operator-(const Tensor& a);

/// Elementwise |x|; subgradient at 0 is 0.
Tensor abs(const Tensor& a);
/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& a);
/// Mean of all elements, as a scalar tensor.
Tensor mean(const Tensor& a);

}  // namespace dipreg
