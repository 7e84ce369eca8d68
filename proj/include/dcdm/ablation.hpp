#pragma once

#include <string>
#include <vector>

#include "dcdm/train.hpp"

namespace dcdm {

struct AblationSwitches {
  TopicSource topic = TopicSource::external;
  bool attributes = true;
  bool disentangle = true;

  void apply(ModelConfig& config) const;
  bool operator==(const AblationSwitches&) const = default;
};

/// The six rows of the ablation table, in order:
///   llm topic + attributes, no disentanglement
///   no topic, no attributes          recurrent topic, no attributes
///   no topic + attributes            recurrent topic + attributes
///   llm topic + attributes + disentanglement (full model)
const std::vector<AblationSwitches>& ablation_grid();

struct AblationRow {
  AblationSwitches switches;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracy;      // per seed, on the test dialogues
  std::vector<double> weighted_f1;   // per seed
  double median_accuracy = 0.0;
  double median_weighted_f1 = 0.0;
};

double median(std::vector<double> values);

/// Trains one model per seed under `switches` and scores the best-validation
/// parameters on `test`.
AblationRow ablation_run(const AblationSwitches& switches, const ModelConfig& base, const TrainOptions& options,
                         const std::vector<Dialogue>& train, const std::vector<Dialogue>& val,
                         const std::vector<Dialogue>& test, const std::vector<std::uint64_t>& seeds);

/// Tab-separated table with a header line; switches are echoed in every row.
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace dcdm
