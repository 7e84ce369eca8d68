#pragma once

// Shared helpers for the unit tests: random tensors and a finite-difference
// harness for functions recorded on a tape.

#include <functional>
#include <random>
#include <vector>

#include "dcdm/numerics/grad_check.hpp"
#include "dcdm/numerics/ops.hpp"

namespace dcdm::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Builds the scalar objective sum(weights .* f(inputs)) with the tape, and
/// runs grad_check over the inputs.
using TapeFn = std::function<ad::Var<double>(const std::vector<ad::Var<double>>&)>;

inline GradCheckReport check_tape_fn(const TapeFn& fn, std::vector<Matrix> inputs,
                                     std::uint64_t seed = 99, double tol = 1e-4) {
  std::mt19937_64 rng(seed);
  Matrix weights;
  GradObjective<double> objective = [&](const std::vector<Matrix>& xs, std::vector<Matrix>* grads) {
    ad::Tape<double> tape;
    std::vector<ad::Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.variable(x));
    const auto out = fn(vars);
    if (weights.size() == 0) weights = random_matrix(rng, out.rows(), out.cols());
    const auto w = tape.constant(weights);
    const auto loss = ad::sum(ad::cwise_product(out, w));
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return loss.scalar();
  };
  std::vector<std::string> names;
  for (std::size_t i = 0; i < inputs.size(); ++i) names.push_back("input" + std::to_string(i));
  GradCheckOptions opt;
  opt.tolerance = tol;
  return grad_check(objective, std::move(inputs), names, opt);
}

}  // namespace dcdm::testing
