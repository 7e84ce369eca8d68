#include "dcdm/cells.hpp"

namespace dcdm {

namespace {

void require_rows(const Var& v, Index rows, const char* what) {
  if (v.cols() != 1 || v.rows() != rows) {
    throw DimensionError(std::string(what) + ": expected [" + std::to_string(rows) +
                         "x1], got " + shape_string(v.value()));
  }
}

}  // namespace

Dense Dense::create(ParameterSet& params, const std::string& prefix, ParamGroup group, Index in,
                    Index out) {
  Dense d;
  d.weight = params.add(prefix + ".W", group, out, in, ParamInit::uniform_fan_in);
  d.bias = params.add(prefix + ".b", group, out, 1, ParamInit::zero);
  d.in = in;
  d.out = out;
  return d;
}

Var dense(const Dense& layer, ParamBinding& bind, const Var& x) {
  if (x.rows() != layer.in) {
    throw DimensionError("dense: expected " + std::to_string(layer.in) + " rows, got " + shape_string(x.value()));
  }
  return ad::affine(x, bind(layer.weight), bind(layer.bias));
}

GruCell GruCell::create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                        Index hidden, Index input) {
  GruCell cell;
  cell.reset = Dense::create(params, prefix + ".reset", group, hidden + input, hidden);
  cell.update = Dense::create(params, prefix + ".update", group, hidden + input, hidden);
  cell.candidate = Dense::create(params, prefix + ".candidate", group, hidden + input, hidden);
  cell.hidden = hidden;
  cell.input = input;
  return cell;
}

Var gru_step(const GruCell& cell, ParamBinding& bind, const Var& h_prev, const Var& input) {
  require_rows(h_prev, cell.hidden, "gru_step h_prev");
  require_rows(input, cell.input, "gru_step input");
  const Var hx = ad::concat<double>({h_prev, input});
  const Var r = ad::sigmoid(dense(cell.reset, bind, hx));
  const Var k = ad::sigmoid(dense(cell.update, bind, hx));
  const Var gated = ad::concat<double>({ad::cwise_product(r, h_prev), input});
  const Var candidate = ad::tanh(dense(cell.candidate, bind, gated));
  return ad::cwise_product(ad::one_minus(k), h_prev) + ad::cwise_product(k, candidate);
}

LstmCell LstmCell::create(ParameterSet& params, const std::string& prefix, ParamGroup group,
                          Index hidden, Index input) {
  LstmCell cell;
  cell.weight = params.add(prefix + ".W", group, 4 * hidden, hidden + input,
                           ParamInit::uniform_fan_in);
  cell.bias = params.add(prefix + ".b", group, 4 * hidden, 1, ParamInit::lstm_bias);
  cell.hidden = hidden;
  cell.input = input;
  return cell;
}

LstmState lstm_step(const LstmCell& cell, ParamBinding& bind, const LstmState& prev,
                    const Var& x) {
  require_rows(prev.h, cell.hidden, "lstm_step h_prev");
  require_rows(prev.c, cell.hidden, "lstm_step c_prev");
  require_rows(x, cell.input, "lstm_step input");
  const Index n = cell.hidden;
  const Var pre = ad::affine(ad::concat<double>({prev.h, x}), bind(cell.weight), bind(cell.bias));
  const Var in_gate = ad::sigmoid(ad::slice(pre, 0, n));
  const Var forget = ad::sigmoid(ad::slice(pre, n, n));
  const Var candidate = ad::tanh(ad::slice(pre, 2 * n, n));
  const Var out_gate = ad::sigmoid(ad::slice(pre, 3 * n, n));
  const Var c = ad::cwise_product(forget, prev.c) + ad::cwise_product(in_gate, candidate);
  const Var h = ad::cwise_product(out_gate, ad::tanh(c));
  return {h, c};
}

GaussianHead GaussianHead::create(ParameterSet& params, const std::string& prefix,
                                  ParamGroup group, Index in, Index out) {
  return {Dense::create(params, prefix + ".mean", group, in, out),
          Dense::create(params, prefix + ".logvar", group, in, out)};
}

GaussianDiag gaussian_head(const GaussianHead& head, ParamBinding& bind, const Var& h) {
  const Var mean = dense(head.mean, bind, h);
  const Var logvar = ad::clamp(dense(head.logvar, bind, h), ad::kLogvarMin, ad::kLogvarMax);
  return {mean, logvar};
}

}  // namespace dcdm
