#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dcdm/elbo.hpp"
#include "dcdm/numerics/adam.hpp"

namespace dcdm {

struct TrainOptions {
  int epochs = 80;
  int batch_size = 8;  // dialogues per optimizer step
  AdamOptions<double> adam;
  LossWeights weights;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  // means over the epoch's training dialogues of the per-dialogue sums
  double total = 0.0;
  double cls = 0.0;
  double recon_u = 0.0;
  double recon_f = 0.0;
  std::vector<double> kl;
  // NaN when there is no validation split
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;

  /// One JSON object on a single line.
  std::string to_json() const;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  std::vector<Matrix> parameters;
  AdamState<double> adam;
  int epoch = 0;          // completed epochs
  std::string rng;        // textual engine state
  double best_val = 0.0;  // weighted F1 of the best epoch so far
  int best_epoch = 0;
  std::vector<Matrix> best_parameters;

  bool operator==(const TrainState&) const = default;
};

/// Gradient of the mean loss over `batch`, each dialogue with its own noise
/// seed. Dialogues are processed in order so the sum is reproducible.
std::vector<Matrix> batch_gradient(const Model& model, const std::vector<const Dialogue*>& batch,
                                   const std::vector<std::uint64_t>& noise_seeds,
                                   const LossWeights& weights, std::vector<LossBreakdown>* losses = nullptr);

class Trainer {
 public:
  /// Fresh run: parameters initialised from the seed.
  Trainer(const ModelConfig& config, const TrainOptions& options);
  /// Continues from a saved state.
  Trainer(const ModelConfig& config, const TrainOptions& options, const TrainState& state);

  /// One pass over `train` followed by validation on `val`.
  EpochRecord run_epoch(const std::vector<Dialogue>& train, const std::vector<Dialogue>& val);

  using EpochCallback = std::function<void(const EpochRecord&, const Trainer&)>;
  /// Runs the remaining epochs up to options().epochs.
  std::vector<EpochRecord> fit(const std::vector<Dialogue>& train, const std::vector<Dialogue>& val,
                               const EpochCallback& on_epoch = {});

  const Model& model() const { return model_; }
  Model best_model() const;
  TrainState state() const;
  const TrainOptions& options() const { return options_; }
  int epoch() const { return epoch_; }

 private:
  Model model_;
  TrainOptions options_;
  AdamState<double> adam_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  double best_val_ = -1.0;
  int best_epoch_ = 0;
  std::vector<Matrix> best_parameters_;
};

}  // namespace dcdm
