#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcdm/model.hpp"

namespace dcdm {

/// k x k counts; rows are the true class, columns the prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int n_classes);

  void add(int truth, int predicted);
  std::int64_t operator()(int truth, int predicted) const;
  int classes() const { return k_; }
  std::int64_t total() const;
  std::int64_t support(int truth) const;

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> f1;       // per class
  std::vector<double> recall;   // per class
  double weighted_f1 = 0.0;
};

/// Undefined precision or recall gives F1 = 0 for that class.
Metrics metrics(const ConfusionMatrix& cm);

/// Argmax class per turn, from a forward pass with zero reparameterization
/// noise (the posterior means drive the recursion).
std::vector<std::vector<int>> predict(const Model& model, const std::vector<Dialogue>& dialogues);

ConfusionMatrix confusion(const std::vector<std::vector<int>>& predictions,
                          const std::vector<Dialogue>& dialogues, int n_classes);

/// Accuracy over turn positions [b*batch + 1, (b+1)*batch], b = 0 .. ceil(max_t/batch) - 1.
/// Positions past max_t are ignored; a window with no turns yields NaN.
std::vector<double> time_batch_accuracy(const std::vector<std::vector<int>>& predictions,
                                        const std::vector<Dialogue>& dialogues, int batch_size,
                                        int max_t);

struct TimeBatchProtocol {
  int batch_size;
  int max_t;
};
inline constexpr TimeBatchProtocol kIemocapProtocol{5, 40};
inline constexpr TimeBatchProtocol kMeldProtocol{1, 8};

/// One row per utterance: posterior means of every chain, then the label.
/// Values are written with 17 significant digits.
void export_latents(const Model& model, const std::vector<Dialogue>& dialogues, std::ostream& out);
void export_latents(const Model& model, const std::vector<Dialogue>& dialogues, const std::string& path);

}  // namespace dcdm
