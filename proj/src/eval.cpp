#include "dcdm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "dcdm/errors.hpp"

namespace dcdm {

ConfusionMatrix::ConfusionMatrix(int n_classes) : k_(n_classes) {
  if (n_classes < 1) throw ValidationError("confusion matrix: need at least one class");
  counts_.assign(std::size_t(k_) * k_, 0);
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) {
    throw ValidationError("confusion matrix: class index out of range");
  }
  ++counts_[std::size_t(truth) * k_ + predicted];
}

std::int64_t ConfusionMatrix::operator()(int truth, int predicted) const {
  return counts_.at(std::size_t(truth) * k_ + predicted);
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::int64_t ConfusionMatrix::support(int truth) const {
  std::int64_t n = 0;
  for (int j = 0; j < k_; ++j) n += (*this)(truth, j);
  return n;
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw DimensionError("confusion matrix: rows must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[i][j] < 0) throw ValidationError("confusion matrix: negative count");
      cm.counts_[i * rows.size() + j] = rows[i][j];
    }
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw ValidationError("metrics: empty confusion matrix");
  const int k = cm.classes();
  Metrics m;
  std::int64_t correct = 0;
  for (int i = 0; i < k; ++i) {
    const std::int64_t tp = cm(i, i);
    std::int64_t predicted = 0;
    for (int r = 0; r < k; ++r) predicted += cm(r, i);
    const std::int64_t support = cm.support(i);
    correct += tp;
    const double precision = predicted > 0 ? double(tp) / predicted : 0.0;
    const double recall = support > 0 ? double(tp) / support : 0.0;
    const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.f1.push_back(f1);
    m.recall.push_back(recall);
    m.weighted_f1 += double(support) * f1;
  }
  m.accuracy = double(correct) / double(total);
  m.weighted_f1 /= double(total);
  return m;
}

std::vector<std::vector<int>> predict(const Model& model, const std::vector<Dialogue>& dialogues) {
  std::vector<std::vector<int>> out;
  out.reserve(dialogues.size());
  for (const auto& d : dialogues) {
    Tape tape;
    ParamBinding bind(tape, model.parameters(), false);
    ZeroNoise zero;
    const DialogueTrace trace = forward_dialogue(model, bind, d, zero);
    std::vector<int> labels;
    for (const auto& step : trace.steps) {
      const Matrix& z = step.logits.value();
      Index best = 0;
      for (Index i = 1; i < z.rows(); ++i) {
        if (z(i, 0) > z(best, 0)) best = i;
      }
      labels.push_back(static_cast<int>(best));
    }
    out.push_back(std::move(labels));
  }
  return out;
}

namespace {

void require_aligned(const std::vector<std::vector<int>>& predictions, const std::vector<Dialogue>& dialogues) {
  if (predictions.size() != dialogues.size()) throw DimensionError("predictions and dialogues differ in count");
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    if (predictions[i].size() != dialogues[i].turns.size()) {
      throw DimensionError("predictions for dialogue '" + dialogues[i].id + "' do not match its turn count");
    }
  }
}

}  // namespace

ConfusionMatrix confusion(const std::vector<std::vector<int>>& predictions,
                          const std::vector<Dialogue>& dialogues, int n_classes) {
  require_aligned(predictions, dialogues);
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    for (std::size_t t = 0; t < dialogues[i].turns.size(); ++t) {
      cm.add(dialogues[i].turns[t].label, predictions[i][t]);
    }
  }
  return cm;
}

std::vector<double> time_batch_accuracy(const std::vector<std::vector<int>>& predictions,
                                        const std::vector<Dialogue>& dialogues, int batch_size,
                                        int max_t) {
  if (batch_size < 1) throw ValidationError("time_batch_accuracy: batch_size must be >= 1");
  if (max_t < 1) throw ValidationError("time_batch_accuracy: max_t must be >= 1");
  require_aligned(predictions, dialogues);
  const int points = (max_t + batch_size - 1) / batch_size;
  std::vector<std::int64_t> hits(points, 0), seen(points, 0);
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const int n = std::min<int>(max_t, int(dialogues[i].turns.size()));
    for (int t = 0; t < n; ++t) {
      const int b = t / batch_size;
      ++seen[b];
      if (predictions[i][t] == dialogues[i].turns[t].label) ++hits[b];
    }
  }
  std::vector<double> out(points);
  for (int b = 0; b < points; ++b) {
    out[b] = seen[b] > 0 ? double(hits[b]) / double(seen[b]) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void export_latents(const Model& model, const std::vector<Dialogue>& dialogues, std::ostream& out) {
  std::string header;
  for (const auto& chain : model.chains()) {
    for (Index i = 0; i < chain.dim; ++i) header += chain.name + std::to_string(i) + ",";
  }
  out << header << "label\n";
  char buf[32];
  for (const auto& d : dialogues) {
    Tape tape;
    ParamBinding bind(tape, model.parameters(), false);
    ZeroNoise zero;
    const DialogueTrace trace = forward_dialogue(model, bind, d, zero);
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      for (const auto& latent : trace.steps[t].latents) {
        const Matrix& m = latent.posterior.mean.value();
        for (Index i = 0; i < m.rows(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g", m(i, 0));
          out << buf << ',';
        }
      }
      out << d.turns[t].label << '\n';
    }
  }
}

void export_latents(const Model& model, const std::vector<Dialogue>& dialogues, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  export_latents(model, dialogues, file);
  if (!file) throw IoError("write failed for '" + path + "'");
}

}  // namespace dcdm
