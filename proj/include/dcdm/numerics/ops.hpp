#pragma once

// Differentiable primitives recorded on a Tape. All functions are free
// functions over Var handles; operands must live on the same tape.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dcdm/numerics/tape.hpp"

namespace dcdm::ad {

enum class Activation { sigmoid, tanh, exp, relu };

namespace detail {

template <typename Scalar>
void require_vector(const Var<Scalar>& x, const char* what) {
  if (x.cols() != 1) {
    throw DimensionError(std::string(what) + ": expected a column vector, got " +
                         shape_string(x.value()));
  }
}

template <typename Scalar>
MatrixX<Scalar> stable_sigmoid(const MatrixX<Scalar>& x) {
  return x.unaryExpr([](Scalar a) {
    if (a >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-a));
    const Scalar e = std::exp(a);
    return e / (Scalar(1) + e);
  });
}

}  // namespace detail

/// y = W x + b, with b added to every column of x.
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b) {
  if (x.cols() < 1 || w.cols() != x.rows() || b.rows() != w.rows() || b.cols() != 1) {
    throw DimensionError("affine: W " + shape_string(w.value()) + " x " +
                         shape_string(x.value()) + " + b " + shape_string(b.value()));
  }
  MatrixX<Scalar> y = w.value() * x.value();
  y.colwise() += b.value().col(0);
  return x.tape().record(std::move(y), {x, w, b}, [x, w, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
    if (g.cols() == 1) {
      t.accumulate_outer(w, g, t.value(x));
      t.accumulate(b, g);
    } else {
      if (t.requires_grad(w)) t.accumulate(w, g * t.value(x).transpose());
      t.accumulate(b, g.rowwise().sum());
    }
    if (t.requires_grad(x)) t.accumulate(x, t.value(w).transpose() * g);
  });
}

/// Column j of a matrix node.
template <typename Scalar>
Var<Scalar> column(const Var<Scalar>& x, Index j) {
  if (j < 0 || j >= x.cols()) {
    throw DimensionError("column: index " + std::to_string(j) + " outside " + shape_string(x.value()));
  }
  MatrixX<Scalar> y = x.value().col(j);
  return x.tape().record(std::move(y), {x}, [x, j](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
    MatrixX<Scalar> full = MatrixX<Scalar>::Zero(t.value(x).rows(), t.value(x).cols());
    full.col(j) = g;
    t.accumulate(x, full);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "add");
  return a.tape().record(a.value() + b.value(), {a, b},
                         [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, g);
                         });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "sub");
  return a.tape().record(a.value() - b.value(), {a, b},
                         [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(a, g);
                           t.accumulate(b, -g);
                         });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> cwise_product(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "cwise_product");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [a, b](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                           if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
                         });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  return a.tape().record(a.value() * factor, {a},
                         [a, factor](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(a, g * factor);
                         });
}

/// 1 - x, elementwise.
template <typename Scalar>
Var<Scalar> one_minus(const Var<Scalar>& a) {
  MatrixX<Scalar> y = (Scalar(1) - a.value().array()).matrix();
  return a.tape().record(std::move(y), {a}, [a](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(a, -g);
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  MatrixX<Scalar> y = detail::stable_sigmoid(x.value());
  MatrixX<Scalar> dy = y.cwiseProduct((Scalar(1) - y.array()).matrix());
  return x.tape().record(std::move(y), {x},
                         [x, dy = std::move(dy)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(x, g.cwiseProduct(dy));
                         });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  MatrixX<Scalar> y = x.value().array().tanh().matrix();
  MatrixX<Scalar> dy = (Scalar(1) - y.array().square()).matrix();
  return x.tape().record(std::move(y), {x},
                         [x, dy = std::move(dy)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(x, g.cwiseProduct(dy));
                         });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& x) {
  MatrixX<Scalar> y = x.value().array().exp().matrix();
  if (!y.allFinite()) throw NumericError("exp: overflow");
  MatrixX<Scalar> dy = y;
  return x.tape().record(std::move(y), {x},
                         [x, dy = std::move(dy)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(x, g.cwiseProduct(dy));
                         });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  MatrixX<Scalar> y = x.value().cwiseMax(Scalar(0));
  MatrixX<Scalar> mask = (x.value().array() > Scalar(0)).template cast<Scalar>().matrix();
  return x.tape().record(std::move(y), {x},
                         [x, mask = std::move(mask)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(x, g.cwiseProduct(mask));
                         });
}

template <typename Scalar>
Var<Scalar> activate(Activation kind, const Var<Scalar>& x) {
  if (!x.value().allFinite()) throw NumericError("activate: non-finite input");
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::exp:
      return exp(x);
    case Activation::relu:
      return relu(x);
  }
  throw Error("activate: unknown activation");
}

/// Clamps entries to [lo, hi]; the gradient is zero outside the open interval.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& x, Scalar lo, Scalar hi) {
  MatrixX<Scalar> y = x.value().cwiseMax(lo).cwiseMin(hi);
  MatrixX<Scalar> mask =
      ((x.value().array() > lo) && (x.value().array() < hi)).template cast<Scalar>().matrix();
  return x.tape().record(std::move(y), {x},
                         [x, mask = std::move(mask)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(x, g.cwiseProduct(mask));
                         });
}

/// Stacks column vectors end to end.
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat: empty part list");
  Index total = 0;
  for (const auto& p : parts) {
    detail::require_vector(p, "concat");
    if (p.rows() == 0) throw DimensionError("concat: empty part");
    total += p.rows();
  }
  MatrixX<Scalar> y(total, 1);
  Index offset = 0;
  for (const auto& p : parts) {
    y.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return parts.front().tape().record(std::move(y), parts,
                                     [parts](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                                       Index off = 0;
                                       for (const auto& p : parts) {
                                         const Index n = t.value(p).rows();
                                         t.accumulate(p, g.middleRows(off, n));
                                         off += n;
                                       }
                                     });
}

/// Rows [offset, offset + length) of a column vector.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index offset, Index length) {
  detail::require_vector(x, "slice");
  if (offset < 0 || length < 0 || offset + length > x.rows()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") outside " + shape_string(x.value()));
  }
  MatrixX<Scalar> y = x.value().middleRows(offset, length);
  return x.tape().record(std::move(y), {x},
                         [x, offset, length](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           MatrixX<Scalar> full = MatrixX<Scalar>::Zero(t.value(x).rows(), 1);
                           full.middleRows(offset, length) = g;
                           t.accumulate(x, full);
                         });
}

/// Sum of all entries as a 1x1 node.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  MatrixX<Scalar> y(1, 1);
  y(0, 0) = x.value().sum();
  return x.tape().record(std::move(y), {x}, [x](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
    t.accumulate(x, MatrixX<Scalar>::Constant(t.value(x).rows(), t.value(x).cols(), g(0, 0)));
  });
}

/// 0.5 * ||a - b||^2 as a 1x1 node.
template <typename Scalar>
Var<Scalar> half_squared_distance(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_shape(a.value(), b.value(), "half_squared_distance");
  MatrixX<Scalar> diff = a.value() - b.value();
  MatrixX<Scalar> y(1, 1);
  y(0, 0) = Scalar(0.5) * diff.squaredNorm();
  return a.tape().record(std::move(y), {a, b},
                         [a, b, diff = std::move(diff)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                           t.accumulate(a, diff * g(0, 0));
                           t.accumulate(b, -diff * g(0, 0));
                         });
}

/// Numerically stable softmax of a column vector (plain values).
template <typename Scalar>
VectorX<Scalar> softmax(const MatrixX<Scalar>& logits) {
  const Scalar m = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

/// -log softmax(logits)[label] with max subtraction.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, Index label) {
  detail::require_vector(logits, "softmax_cross_entropy");
  if (label < 0 || label >= logits.rows()) {
    throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(logits.rows()) + ")");
  }
  const MatrixX<Scalar>& z = logits.value();
  const Scalar m = z.maxCoeff();
  const Scalar lse = m + std::log((z.array() - m).exp().sum());
  MatrixX<Scalar> y(1, 1);
  y(0, 0) = lse - z(label, 0);
  MatrixX<Scalar> dz = softmax<Scalar>(z);
  dz(label, 0) -= Scalar(1);
  return logits.tape().record(std::move(y), {logits},
                              [logits, dz = std::move(dz)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
                                t.accumulate(logits, dz * g(0, 0));
                              });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  return add(a, b);
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  return sub(a, b);
}

}  // namespace dcdm::ad
