#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dcdm/numerics/tensor.hpp"

namespace dcdm {

/// Evaluates the objective at `params`. When `grads` is non-null it must be
/// filled with one analytic gradient per parameter tensor.
template <typename Scalar>
using GradObjective = std::function<Scalar(const std::vector<MatrixX<Scalar>>& params,
                                       std::vector<MatrixX<Scalar>>* grads)>;

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Denominator floor: errors on tensors whose gradient magnitude is below
  // this are measured against the floor instead.
  double magnitude_floor = 1e-6;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  Index worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }

  std::string summary() const {
    std::ostringstream out;
    for (const auto& e : entries) {
      out << (e.passed ? "ok   " : "FAIL ") << e.name << " rel=" << e.max_rel_error
          << " abs=" << e.max_abs_error << " at " << e.worst_index << '\n';
    }
    return out.str();
  }
};

/// Compares analytic gradients against central differences for every entry of
/// every parameter tensor. The relative error of a tensor is
/// max_i |a_i - n_i| / max(|a|_inf, |n|_inf, floor).
template <typename Scalar>
GradCheckReport grad_check(const GradObjective<Scalar>& f, std::vector<MatrixX<Scalar>> params,
                           const std::vector<std::string>& names,
                           const GradCheckOptions& opt = {}) {
  std::vector<MatrixX<Scalar>> analytic;
  f(params, &analytic);
  if (analytic.size() != params.size()) {
    throw DimensionError("grad_check: objective returned " + std::to_string(analytic.size()) +
                         " gradients for " + std::to_string(params.size()) + " parameters");
  }
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  const Scalar h = static_cast<Scalar>(opt.step);
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(params[k], analytic[k], "grad_check");
    MatrixX<Scalar> numeric(params[k].rows(), params[k].cols());
    for (Index i = 0; i < params[k].size(); ++i) {
      const Scalar saved = params[k].data()[i];
      params[k].data()[i] = saved + h;
      const Scalar up = f(params, nullptr);
      params[k].data()[i] = saved - h;
      const Scalar down = f(params, nullptr);
      params[k].data()[i] = saved;
      numeric.data()[i] = (up - down) / (Scalar(2) * h);
    }
    GradCheckEntry entry;
    entry.name = k < names.size() ? names[k] : "param" + std::to_string(k);
    const double scale =
        std::max({static_cast<double>(analytic[k].cwiseAbs().maxCoeff()),
                  static_cast<double>(numeric.cwiseAbs().maxCoeff()), opt.magnitude_floor});
    for (Index i = 0; i < numeric.size(); ++i) {
      const double err = std::abs(static_cast<double>(analytic[k].data()[i] - numeric.data()[i]));
      if (i == 0 || err > entry.max_abs_error) {
        entry.worst_index = i;
        entry.max_abs_error = err;
      }
    }
    entry.max_rel_error = entry.max_abs_error / scale;
    entry.passed = std::isfinite(entry.max_rel_error) && entry.max_rel_error < opt.tolerance;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace dcdm
