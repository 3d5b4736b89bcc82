#include "dipreg/tensor.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace dipreg {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  out += "]";
  return out;
}

bool shapes_equal(const Shape& a, const Shape& b) { return a == b; }

namespace {

std::shared_ptr<TensorNode> make_leaf_node(Shape shape, ArrayXd values,
                                           bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(values.size()) +
                                " does not match shape " +
                                shape_to_string(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->leaf = true;
  return node;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!shapes_equal(a.shape(), b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

}  // namespace

ArrayXd& TensorNode::ensure_grad() {
  if (grad.size() == 0) grad = ArrayXd::Zero(value.size());
  return grad;
}

Tensor Tensor::leaf(Shape shape, ArrayXd values, bool requires_grad) {
  return Tensor(make_leaf_node(std::move(shape), std::move(values),
                               requires_grad));
}

Tensor Tensor::leaf(Shape shape, std::initializer_list<double> values,
                    bool requires_grad) {
  ArrayXd data(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) data[i++] = v;
  return leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  ArrayXd data = ArrayXd::Zero(shape_size(shape));
  return leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  ArrayXd data = ArrayXd::Constant(shape_size(shape), value);
  return leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::constant(Shape shape, ArrayXd values) {
  return leaf(std::move(shape), std::move(values), /*requires_grad=*/false);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  ArrayXd data(1);
  data[0] = value;
  return leaf({1}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

Index Tensor::size() const { return node_->value.size(); }

Index Tensor::dim(int axis) const { return node_->shape.at(axis); }

const ArrayXd& Tensor::values() const { return node_->value; }

ArrayXd& Tensor::mutable_values() {
  if (!node_->leaf) {
    throw std::invalid_argument(
        "mutable_values: only leaf tensors may be written");
  }
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item: tensor of shape " +
                                shape_to_string(shape()) + " is not scalar");
  }
  return node_->value[0];
}

double Tensor::at(Index c, Index y, Index x) const {
  const Shape& s = node_->shape;
  if (s.size() != 3) {
    throw std::invalid_argument("at(c,y,x): tensor of shape " +
                                shape_to_string(s) + " is not rank 3");
  }
  return node_->value[(c * s[1] + y) * s[2] + x];
}

bool Tensor::is_leaf() const { return node_->leaf; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

const char* Tensor::op_name() const { return node_->op; }

bool Tensor::has_grad() const { return node_->grad.size() != 0; }

const ArrayXd& Tensor::grad() const {
  if (!has_grad()) {
    throw std::invalid_argument("grad: no gradient has been accumulated");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

Tensor Tensor::detached() const {
  return Tensor::constant(node_->shape, node_->value);
}

Tensor make_op(const char* name, Shape shape, ArrayXd value,
               std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  node->op = name;
  bool needs_grad = false;
  for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  node->requires_grad = needs_grad;
  node->parents = std::move(parents);
  if (needs_grad) node->backward_fn = std::move(backward_fn);
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) {
    throw std::invalid_argument("backward: root of shape " +
                                shape_to_string(shape()) +
                                " is not scalar");
  }
  if (!node_->requires_grad) return;

  // Reverse post-order over the requires_grad subgraph: every consumer is
  // processed before its producers, so gradients are fully accumulated
  // before a node's backward function runs.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& frame = stack.back();
    if (frame.next_parent < frame.node->parents.size()) {
      TensorNode* parent = frame.node->parents[frame.next_parent].node();
      ++frame.next_parent;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(frame.node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  return make_op("add", a.shape(), a.values() + b.values(), {a, b},
                 [](TensorNode& self) {
                   if (self.parents[0].requires_grad())
                     self.parents[0].node()->ensure_grad() += self.grad;
                   if (self.parents[1].requires_grad())
                     self.parents[1].node()->ensure_grad() += self.grad;
                 });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  return make_op("sub", a.shape(), a.values() - b.values(), {a, b},
                 [](TensorNode& self) {
                   if (self.parents[0].requires_grad())
                     self.parents[0].node()->ensure_grad() += self.grad;
                   if (self.parents[1].requires_grad())
                     self.parents[1].node()->ensure_grad() -= self.grad;
                 });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  return make_op("mul", a.shape(), a.values() * b.values(), {a, b},
                 [](TensorNode& self) {
                   const ArrayXd& av = self.parents[0].values();
                   const ArrayXd& bv = self.parents[1].values();
                   if (self.parents[0].requires_grad())
                     self.parents[0].node()->ensure_grad() += self.grad * bv;
                   if (self.parents[1].requires_grad())
                     self.parents[1].node()->ensure_grad() += self.grad * av;
                 });
}

Tensor operator*(double scale, const Tensor& a) {
  return make_op("scale", a.shape(), scale * a.values(), {a},
                 [scale](TensorNode& self) {
                   self.parents[0].node()->ensure_grad() += scale * self.grad;
                 });
}

Tensor operator-(const Tensor& a) { return -1.0 * a; }

Tensor abs(const Tensor& a) {
  return make_op("abs", a.shape(), a.values().abs(), {a},
                 [](TensorNode& self) {
                   const ArrayXd& x = self.parents[0].values();
                   self.parents[0].node()->ensure_grad() +=
                       self.grad * x.sign();
                 });
}

Tensor sum(const Tensor& a) {
  ArrayXd value(1);
  value[0] = a.values().sum();
  return make_op("sum", {1}, std::move(value), {a}, [](TensorNode& self) {
    self.parents[0].node()->ensure_grad() += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  ArrayXd value(1);
  value[0] = a.values().mean();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  return make_op("mean", {1}, std::move(value), {a},
                 [inv_n](TensorNode& self) {
                   self.parents[0].node()->ensure_grad() +=
                       inv_n * self.grad[0];
                 });
}

}  // namespace dipreg
