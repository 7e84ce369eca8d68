#pragma once

// Recurrent cells and Gaussian parameter heads. Each cell is a bundle of
// parameter ids; the step functions are pure in (parameters, inputs).

#include <string>

#include "dcdm/numerics/gaussian.hpp"
#include "dcdm/parameters.hpp"

namespace dcdm {

using GaussianDiag = ad::GaussianDiag<double>;

/// Fully connected layer y = W x + b.
struct Dense {
  ParamId weight;
  ParamId bias;
  Index in = 0;
  Index out = 0;

  static Dense create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                      Index in, Index out);
};

/// Applies the layer to every column of x.
Var dense(const Dense& layer, ParamBinding& bind, const Var& x);

/// Gated recurrent unit over the concatenation [h, x].
///   r  = sigmoid(W_r [h, x] + b_r)
///   k  = sigmoid(W_k [h, x] + b_k)      (update gate)
///   h~ = tanh(W [r * h, x] + b)
///   h' = (1 - k) * h + k * h~
struct GruCell {
  Dense reset;
  Dense update;
  Dense candidate;
  Index hidden = 0;
  Index input = 0;

  static GruCell create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                        Index hidden, Index input);
};

Var gru_step(const GruCell& cell, ParamBinding& bind, const Var& h_prev, const Var& input);

/// Standard LSTM; the four gates share one stacked weight matrix in the order
/// input, forget, candidate, output.
struct LstmCell {
  ParamId weight;
  ParamId bias;
  Index hidden = 0;
  Index input = 0;

  static LstmCell create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                         Index hidden, Index input);
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_step(const LstmCell& cell, ParamBinding& bind, const LstmState& prev,
                    const Var& x);

/// Two independent dense layers producing a mean and a clamped log-variance.
struct GaussianHead {
  Dense mean;
  Dense logvar;

  static GaussianHead create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                             Index in, Index out);
};

GaussianDiag gaussian_head(const GaussianHead& head, ParamBinding& bind, const Var& h);

}  // namespace dcdm
