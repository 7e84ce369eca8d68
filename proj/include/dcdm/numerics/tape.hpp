#pragma once

// Reverse-mode automatic differentiation over a dynamic tape.
//
// Every value produced during a forward pass is appended to a Tape as a node
// holding its value and a closure that pushes the node's adjoint into its
// parents. Parents are always recorded before their children, so a single
// reverse sweep over the node list visits each node exactly once in a valid
// topological order.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dcdm/numerics/tensor.hpp"

namespace dcdm::ad {

template <typename Scalar>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
/// References returned by value() stay valid as more nodes are recorded.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const MatrixX<Scalar>& value() const { return tape_->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }
  bool is_vector() const { return value().cols() == 1; }

  /// The single entry of a 1x1 node.
  Scalar scalar() const {
    if (rows() != 1 || cols() != 1) {
      throw DimensionError("scalar(): node has shape " + shape_string(value()));
    }
    return value()(0, 0);
  }

  std::size_t id() const { return id_; }
  Tape<Scalar>& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;
  /// Receives the adjoint of the node it belongs to.
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

  /// Leaf whose gradient is collected by backward().
  Var<Scalar> variable(Matrix value) { return push(std::move(value), true, {}); }

  /// Records an interior node. The closure is dropped when no parent needs a
  /// gradient, which keeps constant-only subgraphs free.
  Var<Scalar> record(Matrix value, const std::vector<Var<Scalar>>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  bool requires_grad(const Var<Scalar>& v) const { return nodes_[v.id()].requires_grad; }

  const Matrix& value(const Var<Scalar>& v) const { return nodes_[v.id()].value; }

  /// Adds `g` into the adjoint of `v`; a no-op for constants.
  template <typename Derived>
  void accumulate(const Var<Scalar>& v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  /// Adds the outer product a * b^T of two column vectors into the adjoint
  /// of `v`, column by column (avoids a general matrix product for rank one).
  void accumulate_outer(const Var<Scalar>& v, const Matrix& a, const Matrix& b) {
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad.resize(a.rows(), b.rows());
      for (Index j = 0; j < b.rows(); ++j) node.grad.col(j) = a.col(0) * b(j, 0);
    } else {
      for (Index j = 0; j < b.rows(); ++j) node.grad.col(j) += a.col(0) * b(j, 0);
    }
  }

  /// Runs the reverse sweep from a 1x1 root. Previous adjoints are discarded.
  void backward(const Var<Scalar>& root) {
    check_owner(root);
    const Matrix& rv = nodes_[root.id()].value;
    if (rv.rows() != 1 || rv.cols() != 1) {
      throw DimensionError("backward(): root must be scalar, got " + shape_string(rv));
    }
    if (!std::isfinite(static_cast<double>(rv(0, 0)))) {
      throw NumericError("backward(): non-finite loss");
    }
    for (auto& node : nodes_) node.grad.resize(0, 0);
    nodes_[root.id()].grad = Matrix::Ones(1, 1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (node.grad.size() == 0 || !node.backward) continue;
      node.backward(*this, node.grad);
    }
  }

  /// Adjoint of `v` after backward(); zeros when nothing reached it.
  Matrix grad(const Var<Scalar>& v) const {
    const Node& node = nodes_[v.id()];
    if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var<Scalar> push(Matrix value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), requires_grad});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  void check_owner(const Var<Scalar>& v) const {
    if (&v.tape() != this || v.id() >= nodes_.size()) {
      throw Error("tape: variable belongs to a different tape");
    }
  }

  // deque keeps value() references stable while the tape grows
  std::deque<Node> nodes_;
};

}  // namespace dcdm::ad
