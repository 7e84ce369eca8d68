#include "dcdm/ablation.hpp"

#include <algorithm>
#include <cstdio>

#include "dcdm/errors.hpp"
#include "dcdm/eval.hpp"

namespace dcdm {

void AblationSwitches::apply(ModelConfig& config) const {
  config.topic = topic;
  config.attributes = attributes;
  config.disentangle = disentangle;
  config.validate();
}

const std::vector<AblationSwitches>& ablation_grid() {
  using enum TopicSource;
  static const std::vector<AblationSwitches> grid{
      {external, true, false}, {none, false, true},      {recurrent, false, true},
      {none, true, true},      {recurrent, true, true}, {external, true, true},
  };
  return grid;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AblationRow ablation_run(const AblationSwitches& switches, const ModelConfig& base, const TrainOptions& options,
                         const std::vector<Dialogue>& train, const std::vector<Dialogue>& val,
                         const std::vector<Dialogue>& test, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ValidationError("ablation_run: no seeds");
  if (test.empty()) throw ValidationError("ablation_run: no test dialogues");
  ModelConfig config = base;
  switches.apply(config);
  AblationRow row;
  row.switches = switches;
  row.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    TrainOptions opt = options;
    opt.seed = seed;
    Trainer trainer(config, opt);
    trainer.fit(train, val);
    const Model model = trainer.best_model();
    const Metrics m = metrics(confusion(predict(model, test), test, int(config.n_classes)));
    row.accuracy.push_back(m.accuracy);
    row.weighted_f1.push_back(m.weighted_f1);
  }
  row.median_accuracy = median(row.accuracy);
  row.median_weighted_f1 = median(row.weighted_f1);
  return row;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "topic\tattributes\tdisentangle\tseeds\taccuracy\tweighted_f1\n";
  char buf[64];
  for (const auto& r : rows) {
    out += std::string(to_string(r.switches.topic)) + "\t" + (r.switches.attributes ? "on" : "off") + "\t" +
           (r.switches.disentangle ? "on" : "off") + "\t";
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(r.seeds[i]);
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\n", r.median_accuracy, r.median_weighted_f1);
    out += buf;
  }
  return out;
}

}  // namespace dcdm
