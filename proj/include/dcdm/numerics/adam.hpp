#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcdm/numerics/tensor.hpp"

namespace dcdm {

template <typename Scalar>
struct AdamOptions {
  Scalar lr = Scalar(0.001);
  Scalar weight_decay = Scalar(0.00005);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

/// First/second moment accumulators, one per parameter tensor.
template <typename Scalar>
struct AdamState {
  std::vector<MatrixX<Scalar>> m;
  std::vector<MatrixX<Scalar>> v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

/// One Adam update with bias correction. Weight decay enters as lambda * w
/// added to the gradient (Adam with L2), not as a decoupled shrink.
template <typename Scalar>
void adam_step(std::span<MatrixX<Scalar>> params, std::span<const MatrixX<Scalar>> grads,
               AdamState<Scalar>& state, const AdamOptions<Scalar>& opt) {
  if (!(opt.lr > Scalar(0))) throw ValidationError("adam_step: learning rate must be positive");
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto& p : params) {
      state.m.push_back(MatrixX<Scalar>::Zero(p.rows(), p.cols()));
      state.v.push_back(MatrixX<Scalar>::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                         " accumulators for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "adam_step");
    require_same_shape(params[i], state.m[i], "adam_step");
    if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient");
  }

  ++state.step;
  const Scalar t = static_cast<Scalar>(state.step);
  const Scalar bc1 = Scalar(1) - std::pow(opt.beta1, t);
  const Scalar bc2 = Scalar(1) - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const MatrixX<Scalar> g = grads[i] + opt.weight_decay * params[i];
    state.m[i] = opt.beta1 * state.m[i] + (Scalar(1) - opt.beta1) * g;
    state.v[i] = opt.beta2 * state.v[i] + (Scalar(1) - opt.beta2) * g.cwiseAbs2();
    const auto m_hat = (state.m[i] / bc1).array();
    const auto v_hat = (state.v[i] / bc2).array();
    params[i].array() -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
  }
}

}  // namespace dcdm
