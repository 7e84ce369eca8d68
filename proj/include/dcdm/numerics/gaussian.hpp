#pragma once

#include <cmath>
#include <type_traits>

#include "dcdm/numerics/ops.hpp"

namespace dcdm::ad {

inline constexpr double kLogvarMin = -8.0;
inline constexpr double kLogvarMax = 8.0;

/// Diagonal Gaussian N(mean, diag(exp(logvar))) whose parameters live on a tape.
template <typename Scalar>
struct GaussianDiag {
  Var<Scalar> mean;
  Var<Scalar> logvar;

  Index dim() const { return mean.rows(); }
};

/// mean + exp(0.5 * logvar) * eps. The noise is an explicit input so callers
/// can freeze it.
template <typename Scalar>
Var<Scalar> reparam_sample(const GaussianDiag<Scalar>& g,
                           const std::type_identity_t<VectorX<Scalar>>& eps) {
  require_same_shape(g.mean.value(), g.logvar.value(), "reparam_sample");
  if (eps.rows() != g.mean.rows()) {
    throw DimensionError("reparam_sample: eps length " + std::to_string(eps.rows()) +
                         " vs mean length " + std::to_string(g.mean.rows()));
  }
  MatrixX<Scalar> sd = (Scalar(0.5) * g.logvar.value().array()).exp().matrix();
  MatrixX<Scalar> noise = sd.cwiseProduct(eps);
  MatrixX<Scalar> y = g.mean.value() + noise;
  const auto mean = g.mean;
  const auto logvar = g.logvar;
  return mean.tape().record(std::move(y), {mean, logvar},
                            [mean, logvar, noise = std::move(noise)](Tape<Scalar>& t,
                                                                     const MatrixX<Scalar>& grad) {
                              t.accumulate(mean, grad);
                              t.accumulate(logvar, Scalar(0.5) * grad.cwiseProduct(noise));
                            });
}

/// KL(q || p) for diagonal Gaussians, summed over dimensions, as a 1x1 node.
template <typename Scalar>
Var<Scalar> kl_diag(const GaussianDiag<Scalar>& q, const GaussianDiag<Scalar>& p) {
  require_same_shape(q.mean.value(), p.mean.value(), "kl_diag");
  require_same_shape(q.logvar.value(), p.logvar.value(), "kl_diag");
  require_same_shape(q.mean.value(), q.logvar.value(), "kl_diag");
  const auto inv_pv = (-p.logvar.value().array()).exp();
  const auto diff = (q.mean.value() - p.mean.value()).array();
  const auto var_ratio = (q.logvar.value() - p.logvar.value()).array().exp().eval();
  const auto ratio = (var_ratio + diff.square() * inv_pv).eval();
  MatrixX<Scalar> y(1, 1);
  y(0, 0) = Scalar(0.5) *
            (p.logvar.value().array() - q.logvar.value().array() + ratio - Scalar(1)).sum();

  MatrixX<Scalar> d_qmean = (diff * inv_pv).matrix();
  MatrixX<Scalar> d_qlogvar = (Scalar(0.5) * (var_ratio - Scalar(1))).matrix();
  MatrixX<Scalar> d_plogvar = (Scalar(0.5) * (Scalar(1) - ratio)).matrix();
  const std::vector<Var<Scalar>> parents{q.mean, q.logvar, p.mean, p.logvar};
  return q.mean.tape().record(
      std::move(y), parents,
      [parents, d_qmean = std::move(d_qmean), d_qlogvar = std::move(d_qlogvar),
       d_plogvar = std::move(d_plogvar)](Tape<Scalar>& t, const MatrixX<Scalar>& g) {
        const Scalar s = g(0, 0);
        t.accumulate(parents[0], d_qmean * s);
        t.accumulate(parents[1], d_qlogvar * s);
        t.accumulate(parents[2], -d_qmean * s);
        t.accumulate(parents[3], d_plogvar * s);
      });
}

}  // namespace dcdm::ad
