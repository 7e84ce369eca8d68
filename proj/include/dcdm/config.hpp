#pragma once

// Flat "key = value" run configuration. Lines starting with '#' and blank
// lines are ignored. Later assignments win, so precedence is simply the order
// in which sources are applied: defaults, then the file, then flags.

#include <cstdint>
#include <string>
#include <vector>

#include "dcdm/model.hpp"
#include "dcdm/synthetic.hpp"
#include "dcdm/train.hpp"

namespace dcdm {

struct RunConfig {
  std::string train_path;
  std::string test_path;
  std::string manifest_path;
  std::string out = "run";
  std::string checkpoint;

  std::uint64_t seed = 1;
  int epochs = 80;
  int batch_size = 8;
  double lr = 0.001;
  double weight_decay = 0.00005;
  LossWeights weights;
  double val_fraction = 0.1;

  // 0 means taken from the manifest or the data
  Index u_dim = 0;
  Index f_raw_dim = 0;
  Index n_classes = 0;

  Index s_dim = 64;
  Index v_dim = 64;
  Index z_dim = 64;
  Index p_dim = 64;
  Index f_dim = 64;
  Index topic_hidden = 128;
  Index gen_hidden = 64;
  Index cls_hidden = 64;
  TopicSource topic = TopicSource::external;
  bool attributes = true;
  bool disentangle = true;
  bool literal_z_unit = false;

  // 0 picks the protocol from the dataset name (meld: 1 / 8, otherwise 5 / 40)
  int time_batch_size = 0;
  int time_batch_max = 0;
  int ablation_seeds = 3;

  SyntheticConfig synth;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Applies one assignment; throws ValidationError for unknown keys or values
/// that do not parse.
void set_option(RunConfig& config, const std::string& key, const std::string& value);

/// Applies every "key = value" line of `text`; errors carry the line number.
void apply_config_text(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const std::string& path);

/// "key=value" as given on a command line.
void apply_assignment(RunConfig& config, const std::string& assignment);

/// Every key in a fixed order; applying the echo to defaults reproduces the config.
std::string echo(const RunConfig& config);

std::vector<std::string> config_keys();

/// Requires u_dim, f_raw_dim and n_classes to be resolved (non-zero).
ModelConfig model_config(const RunConfig& config);
TrainOptions train_options(const RunConfig& config);

}  // namespace dcdm
