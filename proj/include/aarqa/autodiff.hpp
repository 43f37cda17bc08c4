// Copyright 2026 The AARQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Variable is a shared handle to a graph node holding a value, an optional
// gradient, and (for recorded operations) its parents plus a backward rule.
// Parameters are leaf variables that require gradients; every operation whose
// inputs require gradients records itself while gradient recording is
// enabled on the calling thread. backward() orders the nodes reachable from a
// scalar root topologically and runs each backward rule exactly once.
//
// Vectors are 1 x n or n x 1 matrices. The only broadcast is adding a
// 1 x cols bias row to every row of a matrix.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aarqa/error.hpp"

namespace aarqa::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {
inline thread_local bool grad_flag = true;
}  // namespace detail

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_flag) { detail::grad_flag = false; }
  ~NoGradGuard() { detail::grad_flag = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_flag; }

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until something flows into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // grad += delta, allocating on first use.
  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& delta) {
    if (grad.size() == 0) {
      grad = delta;
    } else {
      grad += delta;
    }
  }

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  }
};

template <typename Scalar>
class Variable {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;
  using MatrixType = Matrix<Scalar>;

  Variable() = default;
  explicit Variable(NodePtr node) : node_(std::move(node)) {}

  static Variable constant(MatrixType value) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(value);
    return Variable(std::move(n));
  }

  static Variable parameter(MatrixType value) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->op = "parameter";
    return Variable(std::move(n));
  }

  static Variable scalar(Scalar x) {
    MatrixType m(1, 1);
    m(0, 0) = x;
    return constant(std::move(m));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const MatrixType& value() const { return node_->value; }
  MatrixType& mutable_value() { return node_->value; }
  const MatrixType& grad() const { return node_->grad; }
  MatrixType& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  const char* op() const { return node_->op; }
  Scalar item() const { return node_->value(0, 0); }
  const NodePtr& node() const { return node_; }

  void zero_grad() { node_->grad.resize(0, 0); }

  // Seeds d(this)/d(this) = 1 and propagates. The root must be 1 x 1.
  void backward() const;

 private:
  NodePtr node_;
};

// Reverse topological traversal of everything reachable from a root.
template <typename Scalar>
class Graph {
 public:
  using NodePtr = std::shared_ptr<Node<Scalar>>;

  explicit Graph(const Variable<Scalar>& root) {
    std::unordered_set<const Node<Scalar>*> visited;
    // Iterative post-order DFS; order_ ends up parents-before-children.
    std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node<Scalar>* parent = node->parents[next++].get();
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order_.push_back(node);
        stack.pop_back();
      }
    }
  }

  // Topological order: every node after all of its inputs.
  const std::vector<Node<Scalar>*>& order() const { return order_; }

  void backward() {
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      Node<Scalar>* n = *it;
      if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
  }

 private:
  std::vector<Node<Scalar>*> order_;
};

template <typename Scalar>
void Variable<Scalar>::backward() const {
  if (node_->value.rows() != 1 || node_->value.cols() != 1) {
    std::ostringstream msg;
    msg << "backward: root must be 1x1, got " << node_->value.rows() << "x"
        << node_->value.cols();
    throw ShapeError(msg.str());
  }
  if (!node_->requires_grad) return;
  node_->accumulate(MatrixType::Ones(1, 1));
  Graph<Scalar> graph(*this);
  graph.backward();
}

namespace detail {

template <typename Scalar>
std::string shape_of(const Variable<Scalar>& v) {
  return "[" + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + "]";
}

[[noreturn]] inline void shape_error(const char* op, const std::string& a,
                                     const std::string& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a + " and " + b);
}

// Creates the output node. The backward rule is attached only when some
// input requires gradients and recording is on.
template <typename Scalar, typename Backward>
Variable<Scalar> make_op(const char* op, Matrix<Scalar> value,
                         std::initializer_list<Variable<Scalar>> inputs,
                         Backward&& backward) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->op = op;
  if (ad::grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) n->requires_grad = true;
    }
    if (n->requires_grad) {
      for (const auto& in : inputs) n->parents.push_back(in.node());
      n->backward = std::forward<Backward>(backward);
    }
  }
  return Variable<Scalar>(std::move(n));
}

template <typename Scalar, typename Derived>
void push(Node<Scalar>& parent, const Eigen::MatrixBase<Derived>& delta) {
  if (parent.requires_grad) parent.accumulate(delta);
}

}  // namespace detail

template <typename Scalar>
Variable<Scalar> matmul(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  if (a.cols() != b.rows()) {
    detail::shape_error("matmul", detail::shape_of(a), detail::shape_of(b));
  }
  Matrix<Scalar> out = a.value() * b.value();
  return detail::make_op<Scalar>("matmul", std::move(out), {a, b}, [](Node<Scalar>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

// Elementwise sum of equal shapes, or a (rows x cols) + b (1 x cols) with b
// added to every row.
template <typename Scalar>
Variable<Scalar> add(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Matrix<Scalar> out = a.value() + b.value();
    return detail::make_op<Scalar>("add", std::move(out), {a, b}, [](Node<Scalar>& n) {
      detail::push(*n.parents[0], n.grad);
      detail::push(*n.parents[1], n.grad);
    });
  }
  if (b.rows() == 1 && a.cols() == b.cols()) {
    Matrix<Scalar> out = a.value().rowwise() + b.value().row(0);
    return detail::make_op<Scalar>("add_row", std::move(out), {a, b}, [](Node<Scalar>& n) {
      detail::push(*n.parents[0], n.grad);
      if (n.parents[1]->requires_grad) {
        n.parents[1]->accumulate(n.grad.colwise().sum());
      }
    });
  }
  detail::shape_error("add", detail::shape_of(a), detail::shape_of(b));
}

template <typename Scalar>
Variable<Scalar> scale(const Variable<Scalar>& x, Scalar c) {
  Matrix<Scalar> out = x.value() * c;
  return detail::make_op<Scalar>("scale", std::move(out), {x}, [c](Node<Scalar>& n) {
    detail::push(*n.parents[0], n.grad * c);
  });
}

template <typename Scalar>
Variable<Scalar> tanh(const Variable<Scalar>& x) {
  Matrix<Scalar> out = x.value().array().tanh().matrix();
  return detail::make_op<Scalar>("tanh", std::move(out), {x}, [](Node<Scalar>& n) {
    detail::push(*n.parents[0],
                 (n.grad.array() * (1 - n.value.array().square())).matrix());
  });
}

template <typename Scalar>
Variable<Scalar> sigmoid(const Variable<Scalar>& x) {
  Matrix<Scalar> out = (1 / (1 + (-x.value().array()).exp())).matrix();
  return detail::make_op<Scalar>("sigmoid", std::move(out), {x}, [](Node<Scalar>& n) {
    detail::push(*n.parents[0],
                 (n.grad.array() * n.value.array() * (1 - n.value.array())).matrix());
  });
}

template <typename Scalar>
Variable<Scalar> mul(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    detail::shape_error("mul", detail::shape_of(a), detail::shape_of(b));
  }
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return detail::make_op<Scalar>("mul", std::move(out), {a, b}, [](Node<Scalar>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

// Softmax over all entries of a row or column vector.
template <typename Scalar>
Variable<Scalar> softmax(const Variable<Scalar>& x) {
  if (x.rows() != 1 && x.cols() != 1) {
    throw ShapeError("softmax: expected a vector, got " + detail::shape_of(x));
  }
  if (x.size() == 0) throw ShapeError("softmax: empty input");
  const Scalar m = x.value().maxCoeff();
  Matrix<Scalar> out = (x.value().array() - m).exp().matrix();
  out /= out.sum();
  return detail::make_op<Scalar>("softmax", std::move(out), {x}, [](Node<Scalar>& n) {
    const Scalar inner = n.grad.cwiseProduct(n.value).sum();
    detail::push(*n.parents[0],
                 (n.value.array() * (n.grad.array() - inner)).matrix());
  });
}

// axis 0 averages rows into a 1 x cols row; axis 1 averages columns into a
// rows x 1 column.
template <typename Scalar>
Variable<Scalar> mean(const Variable<Scalar>& x, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("mean: axis must be 0 or 1");
  const Eigen::Index count = axis == 0 ? x.rows() : x.cols();
  if (count == 0) throw ShapeError("mean: empty axis on " + detail::shape_of(x));
  Matrix<Scalar> out = axis == 0 ? Matrix<Scalar>(x.value().colwise().mean())
                                 : Matrix<Scalar>(x.value().rowwise().mean());
  return detail::make_op<Scalar>("mean", std::move(out), {x}, [axis](Node<Scalar>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    if (axis == 0) {
      const Scalar inv = Scalar(1) / static_cast<Scalar>(p.value.rows());
      Matrix<Scalar> g = n.grad.replicate(p.value.rows(), 1) * inv;
      p.accumulate(g);
    } else {
      const Scalar inv = Scalar(1) / static_cast<Scalar>(p.value.cols());
      Matrix<Scalar> g = n.grad.replicate(1, p.value.cols()) * inv;
      p.accumulate(g);
    }
  });
}

// Inner product of two same-shaped tensors, as a 1 x 1 result.
template <typename Scalar>
Variable<Scalar> dot(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    detail::shape_error("dot", detail::shape_of(a), detail::shape_of(b));
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().cwiseProduct(b.value()).sum();
  return detail::make_op<Scalar>("dot", std::move(out), {a, b}, [](Node<Scalar>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    const Scalar g = n.grad(0, 0);
    if (pa.requires_grad) pa.accumulate(pb.value * g);
    if (pb.requires_grad) pb.accumulate(pa.value * g);
  });
}

// max(0, x) elementwise; the subgradient at exactly 0 is 0.
template <typename Scalar>
Variable<Scalar> hinge(const Variable<Scalar>& x) {
  Matrix<Scalar> out = x.value().cwiseMax(Scalar(0));
  return detail::make_op<Scalar>("hinge", std::move(out), {x}, [](Node<Scalar>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    Matrix<Scalar> g =
        (p.value.array() > Scalar(0)).select(n.grad, Matrix<Scalar>::Zero(n.grad.rows(), n.grad.cols()));
    p.accumulate(g);
  });
}

template <typename Scalar>
Variable<Scalar> transpose(const Variable<Scalar>& x) {
  Matrix<Scalar> out = x.value().transpose();
  return detail::make_op<Scalar>("transpose", std::move(out), {x}, [](Node<Scalar>& n) {
    detail::push(*n.parents[0], n.grad.transpose());
  });
}

// Sub-block [row, row + rows) x [col, col + cols).
template <typename Scalar>
Variable<Scalar> slice(const Variable<Scalar>& x, Eigen::Index row,
                       Eigen::Index rows, Eigen::Index col, Eigen::Index cols) {
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > x.rows() ||
      col + cols > x.cols()) {
    throw ShapeError("slice: block (" + std::to_string(row) + "," +
                     std::to_string(col) + ")+" + std::to_string(rows) + "x" +
                     std::to_string(cols) + " outside " + detail::shape_of(x));
  }
  Matrix<Scalar> out = x.value().block(row, col, rows, cols);
  return detail::make_op<Scalar>("slice", std::move(out), {x},
                                 [row, col, rows, cols](Node<Scalar>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    p.grad.block(row, col, rows, cols) += n.grad;
  });
}

// Stacks tensors along axis 0 (rows) or axis 1 (columns).
template <typename Scalar>
Variable<Scalar> concat(const std::vector<Variable<Scalar>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) {
        detail::shape_error("concat", detail::shape_of(parts[0]), detail::shape_of(p));
      }
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts[0].rows()) {
        detail::shape_error("concat", detail::shape_of(parts[0]), detail::shape_of(p));
      }
      cols += p.cols();
      rows = p.rows();
    }
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      out.block(offset, 0, p.rows(), cols) = p.value();
      offset += p.rows();
    } else {
      out.block(0, offset, rows, p.cols()) = p.value();
      offset += p.cols();
    }
  }
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(out);
  n->op = "concat";
  if (grad_enabled()) {
    for (const auto& p : parts) n->requires_grad |= p.requires_grad();
    if (n->requires_grad) {
      for (const auto& p : parts) n->parents.push_back(p.node());
      n->backward = [axis](Node<Scalar>& self) {
        Eigen::Index off = 0;
        for (auto& parent : self.parents) {
          const Eigen::Index r = parent->value.rows(), c = parent->value.cols();
          if (parent->requires_grad) {
            if (axis == 0) {
              parent->accumulate(self.grad.block(off, 0, r, c));
            } else {
              parent->accumulate(self.grad.block(0, off, r, c));
            }
          }
          off += axis == 0 ? r : c;
        }
      };
    }
  }
  return Variable<Scalar>(std::move(n));
}

// Row gather: result row k is table row ids[k]. Gradients scatter back into
// the table rows.
template <typename Scalar>
Variable<Scalar> gather_rows(const Variable<Scalar>& table, std::vector<Eigen::Index> ids) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= table.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(ids[k]) +
                       " outside " + detail::shape_of(table));
    }
    out.row(static_cast<Eigen::Index>(k)) = table.value().row(ids[k]);
  }
  return detail::make_op<Scalar>("gather_rows", std::move(out), {table},
                                 [ids = std::move(ids)](Node<Scalar>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      p.grad.row(ids[k]) += n.grad.row(static_cast<Eigen::Index>(k));
    }
  });
}

template <typename Scalar>
Variable<Scalar> operator+(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  return add(a, b);
}

template <typename Scalar>
Variable<Scalar> operator-(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  return add(a, scale(b, Scalar(-1)));
}

template <typename Scalar>
Variable<Scalar> operator*(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  return mul(a, b);
}

using Var = Variable<double>;
using Mat = Matrix<double>;

}  // namespace aarqa::ad
