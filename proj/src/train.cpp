#include "dcdm/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "dcdm/errors.hpp"
#include "dcdm/eval.hpp"

namespace dcdm {

void TrainOptions::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (!(adam.lr > 0.0)) throw ValidationError("train: lr must be > 0");
  if (adam.weight_decay < 0.0) throw ValidationError("train: weight_decay must be >= 0");
  weights.validate();
}

namespace {

void append_number(std::string& out, double x) {
  if (std::isnan(x)) {
    out += "null";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

}  // namespace

std::string EpochRecord::to_json() const {
  std::string out = "{\"epoch\":" + std::to_string(epoch);
  auto field = [&](const char* name, double x) {
    out += ",\"";
    out += name;
    out += "\":";
    append_number(out, x);
  };
  field("total", total);
  field("cls", cls);
  field("recon_u", recon_u);
  field("recon_f", recon_f);
  out += ",\"kl\":[";
  for (std::size_t i = 0; i < kl.size(); ++i) {
    if (i) out += ",";
    append_number(out, kl[i]);
  }
  out += "]";
  field("val_accuracy", val_accuracy);
  field("val_weighted_f1", val_weighted_f1);
  out += "}";
  return out;
}

std::vector<Matrix> batch_gradient(const Model& model, const std::vector<const Dialogue*>& batch,
                                   const std::vector<std::uint64_t>& noise_seeds,
                                   const LossWeights& weights, std::vector<LossBreakdown>* losses) {
  if (batch.empty()) throw ValidationError("batch_gradient: empty batch");
  if (noise_seeds.size() != batch.size()) throw DimensionError("batch_gradient: one noise seed per dialogue");
  std::vector<Matrix> sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    ParamBinding bind(tape, model.parameters());
    GaussianNoise noise(noise_seeds[i]);
    const DialogueTrace trace = forward_dialogue(model, bind, *batch[i], noise);
    Objective obj = total_loss(model, trace, *batch[i], weights);
    tape.backward(obj.total);
    std::vector<Matrix> grads = bind.gradients();
    if (sum.empty()) {
      sum = std::move(grads);
    } else {
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += grads[k];
    }
    if (losses) losses->push_back(std::move(obj.breakdown));
  }
  const double scale = 1.0 / double(batch.size());
  for (auto& g : sum) g *= scale;
  return sum;
}

Trainer::Trainer(const ModelConfig& config, const TrainOptions& options)
    : model_(config), options_(options), rng_(options.seed) {
  options_.validate();
  model_.parameters().initialize(rng_());
  best_parameters_ = model_.parameters().values();
}

Trainer::Trainer(const ModelConfig& config, const TrainOptions& options, const TrainState& state)
    : model_(config), options_(options) {
  options_.validate();
  auto& values = model_.parameters().values();
  if (state.parameters.size() != values.size()) {
    throw DimensionError("resume: state holds " + std::to_string(state.parameters.size()) +
                         " tensors, model expects " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string what = "resume " + model_.parameters().name(i);
    require_same_shape(values[i], state.parameters[i], what.c_str());
  }
  values = state.parameters;
  adam_ = state.adam;
  std::istringstream in(state.rng);
  in >> rng_;
  if (!in) throw ValidationError("resume: unreadable rng state");
  epoch_ = state.epoch;
  best_val_ = state.best_val;
  best_epoch_ = state.best_epoch;
  best_parameters_ = state.best_parameters.empty() ? state.parameters : state.best_parameters;
}

EpochRecord Trainer::run_epoch(const std::vector<Dialogue>& train, const std::vector<Dialogue>& val) {
  if (train.empty()) throw ValidationError("train: no training dialogues");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng_)]);
  }
  std::vector<std::uint64_t> seeds(order.size());
  for (auto& s : seeds) s = rng_();

  EpochRecord rec;
  rec.epoch = epoch_ + 1;
  rec.kl.assign(model_.chains().size(), 0.0);
  std::vector<LossBreakdown> losses;
  const std::size_t b = static_cast<std::size_t>(options_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    std::vector<const Dialogue*> batch;
    std::vector<std::uint64_t> batch_seeds;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(&train[order[i]]);
      batch_seeds.push_back(seeds[i]);
    }
    const std::vector<Matrix> grads = batch_gradient(model_, batch, batch_seeds, options_.weights, &losses);
    adam_step<double>(model_.parameters().values(), grads, adam_, options_.adam);
  }
  for (const auto& l : losses) {
    rec.total += l.total;
    rec.cls += l.cls;
    rec.recon_u += l.recon_u;
    rec.recon_f += l.recon_f;
    for (std::size_t a = 0; a < rec.kl.size(); ++a) rec.kl[a] += l.kl[a];
  }
  const double n = double(losses.size());
  rec.total /= n;
  rec.cls /= n;
  rec.recon_u /= n;
  rec.recon_f /= n;
  for (auto& k : rec.kl) k /= n;

  if (val.empty()) {
    rec.val_accuracy = rec.val_weighted_f1 = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Metrics m = metrics(confusion(predict(model_, val), val, int(model_.config().n_classes)));
    rec.val_accuracy = m.accuracy;
    rec.val_weighted_f1 = m.weighted_f1;
  }
  ++epoch_;
  // without a validation split the latest epoch is kept
  if (val.empty() || rec.val_weighted_f1 > best_val_) {
    best_val_ = val.empty() ? best_val_ : rec.val_weighted_f1;
    best_epoch_ = epoch_;
    best_parameters_ = model_.parameters().values();
  }
  return rec;
}

std::vector<EpochRecord> Trainer::fit(const std::vector<Dialogue>& train, const std::vector<Dialogue>& val,
                                      const EpochCallback& on_epoch) {
  for (const auto& d : train) validate_dialogue(model_, d);
  for (const auto& d : val) validate_dialogue(model_, d);
  std::vector<EpochRecord> log;
  while (epoch_ < options_.epochs) {
    log.push_back(run_epoch(train, val));
    if (on_epoch) on_epoch(log.back(), *this);
  }
  return log;
}

Model Trainer::best_model() const {
  Model m = model_;
  m.parameters().values() = best_parameters_;
  return m;
}

TrainState Trainer::state() const {
  TrainState s;
  s.parameters = model_.parameters().values();
  s.adam = adam_;
  s.epoch = epoch_;
  std::ostringstream out;
  out << rng_;
  s.rng = out.str();
  s.best_val = best_val_;
  s.best_epoch = best_epoch_;
  s.best_parameters = best_parameters_;
  return s;
}

}  // namespace dcdm
