// dcdm: train, evaluate and probe the dynamic causal disentanglement model.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "dcdm/ablation.hpp"
#include "dcdm/checkpoint.hpp"
#include "dcdm/config.hpp"
#include "dcdm/data_io.hpp"
#include "dcdm/errors.hpp"
#include "dcdm/eval.hpp"
#include "dcdm/gradcheck.hpp"
#include "dcdm/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dcdm;

namespace {

constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> assignments;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value configuration file");
  cmd->add_option("--seed", flags.seed, "random seed (overrides the config)");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--set", flags.assignments, "key=value override, repeatable")->take_all();
}

RunConfig resolve(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_path.empty()) apply_config_file(config, flags.config_path);
  for (const auto& a : flags.assignments) apply_assignment(config, a);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out) config.out = *flags.out;
  config.validate();
  return config;
}

fs::path output_dir(const RunConfig& config) {
  fs::path dir(config.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string commented(const std::string& echo_text) {
  std::string out;
  std::istringstream in(echo_text);
  for (std::string line; std::getline(in, line);) out += "# " + line + "\n";
  return out;
}

std::vector<Dialogue> load(const std::string& path, const DatasetManifest* manifest) {
  LoadResult r = load_dialogues(path, manifest);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return std::move(r.dialogues);
}

Index max_label(const std::vector<Dialogue>& ds) {
  int k = -1;
  for (const auto& d : ds) {
    for (const auto& t : d.turns) k = std::max(k, t.label);
  }
  return k + 1;
}

struct Data {
  std::optional<DatasetManifest> manifest;
  Splits splits;
};

// Fills u_dim / f_raw_dim / n_classes from the manifest or data when unset.
void resolve_dims(RunConfig& config, const Data& data) {
  const std::vector<Dialogue>* any = nullptr;
  for (const auto* part : {&data.splits.train, &data.splits.val, &data.splits.test}) {
    if (!part->empty()) {
      any = part;
      break;
    }
  }
  if (data.manifest) {
    if (config.u_dim == 0) config.u_dim = data.manifest->u_dim;
    if (config.f_raw_dim == 0) config.f_raw_dim = data.manifest->f_raw_dim;
    if (config.n_classes == 0) config.n_classes = data.manifest->n_classes;
  }
  if (any) {
    const Turn& t = any->front().turns.front();
    if (config.u_dim == 0) config.u_dim = t.u.size();
    if (config.f_raw_dim == 0) config.f_raw_dim = t.f_raw.size();
    if (config.n_classes == 0) {
      Index k = 0;
      for (const auto* part : {&data.splits.train, &data.splits.val, &data.splits.test}) {
        k = std::max(k, max_label(*part));
      }
      config.n_classes = std::max<Index>(k, 2);
    }
  }
}

Data load_data(const RunConfig& config) {
  Data data;
  if (!config.manifest_path.empty()) data.manifest = load_manifest(config.manifest_path);
  const DatasetManifest* m = data.manifest ? &*data.manifest : nullptr;
  if (config.train_path.empty()) throw ValidationError("no training data: set train = <path>");
  std::vector<Dialogue> train = load(config.train_path, m);
  if (!config.test_path.empty()) {
    // a separate test file: the whole train file is train&val
    for (auto& d : train) {
      if (d.split != "val") d.split = "train";
    }
    data.splits = split(train, DatasetManifest{}, config.val_fraction, config.seed);
    data.splits.test = load(config.test_path, m);
  } else {
    if (!m) throw ValidationError("without a test file the manifest must give split counts");
    data.splits = split(train, *m, config.val_fraction, config.seed);
  }
  return data;
}

std::vector<Dialogue> load_eval_data(const RunConfig& config, const std::string& data_path) {
  std::optional<DatasetManifest> manifest;
  if (!config.manifest_path.empty()) manifest = load_manifest(config.manifest_path);
  const std::string path = !data_path.empty() ? data_path : config.test_path;
  if (path.empty()) throw ValidationError("no data to evaluate: pass --data or set test = <path>");
  return load(path, manifest ? &*manifest : nullptr);
}

// Recovers the run configuration and model stored in a checkpoint.
std::pair<RunConfig, Model> model_from_checkpoint(const std::string& path, bool best) {
  const Checkpoint ckpt = load_checkpoint(path);
  RunConfig stored;
  apply_config_text(stored, ckpt.config);
  Model model(model_config(stored));
  restore_parameters(model.parameters(), ckpt, best);
  return {stored, model};
}

nlohmann::ordered_json config_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  std::istringstream in(echo(config));
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

std::string json_number(double x) {
  if (std::isnan(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------- commands

int cmd_train(const CommonFlags& flags, bool resume) {
  RunConfig config = resolve(flags);
  const Data data = load_data(config);
  resolve_dims(config, data);
  const ModelConfig mc = model_config(config);
  const TrainOptions opt = train_options(config);
  for (const auto* part : {&data.splits.train, &data.splits.val, &data.splits.test}) {
    Model probe_model(mc);
    for (const auto& d : *part) validate_dialogue(probe_model, d);
  }

  const fs::path dir = output_dir(config);
  const fs::path last = dir / "last.ckpt", log_path = dir / "train_log.jsonl";
  std::unique_ptr<Trainer> trainer;
  if (resume && fs::exists(last)) {
    const Checkpoint ckpt = load_checkpoint(last.string());
    Model reference(mc);
    if (ckpt.names != reference.parameters().names()) {
      throw ValidationError("resume: checkpoint tensors do not match the configured model");
    }
    trainer = std::make_unique<Trainer>(mc, opt, ckpt.state);
    std::cerr << "resuming after epoch " << ckpt.state.epoch << "\n";
  } else {
    trainer = std::make_unique<Trainer>(mc, opt);
    nlohmann::ordered_json header;
    header["config"] = config_json(config);
    write_text(log_path, header.dump() + "\n");
  }
  write_text(dir / "config.txt", echo(config));

  const std::string config_text = echo(config);
  const auto names = trainer->model().parameters().names();
  trainer->fit(data.splits.train, data.splits.val, [&](const EpochRecord& rec, const Trainer& t) {
    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    log << rec.to_json() << "\n";
    if (!log) throw IoError("cannot append to '" + log_path.string() + "'");
    save_checkpoint({config_text, names, t.state()}, last.string());
    std::fprintf(stderr, "epoch %3d  loss %.4f  val wF1 %s\n", rec.epoch, rec.total,
                 json_number(rec.val_weighted_f1).c_str());
  });
  // the best-validation parameters are stored in last.ckpt and copied out here
  TrainState best = trainer->state();
  best.parameters = best.best_parameters;
  save_checkpoint({config_text, names, best}, (dir / "best.ckpt").string());
  if (!data.splits.test.empty()) {
    const Metrics m = metrics(confusion(predict(trainer->best_model(), data.splits.test), data.splits.test,
                                        int(mc.n_classes)));
    std::printf("test accuracy %.6f  weighted F1 %.6f\n", m.accuracy, m.weighted_f1);
  }
  return 0;
}

TimeBatchProtocol protocol_for(const RunConfig& config, const std::string& dataset_name) {
  TimeBatchProtocol p = dataset_name == "meld" ? kMeldProtocol : kIemocapProtocol;
  if (config.time_batch_size > 0) p.batch_size = config.time_batch_size;
  if (config.time_batch_max > 0) p.max_t = config.time_batch_max;
  return p;
}

int cmd_eval(const CommonFlags& flags, const std::string& data_path, bool probes) {
  RunConfig config = resolve(flags);
  if (config.checkpoint.empty()) throw ValidationError("eval needs --set checkpoint=<path>");
  auto [stored, model] = model_from_checkpoint(config.checkpoint, false);
  const std::vector<Dialogue> data = load_eval_data(config, data_path);
  for (const auto& d : data) validate_dialogue(model, d);
  const int k = int(model.config().n_classes);
  const auto predictions = predict(model, data);
  const ConfusionMatrix cm = confusion(predictions, data, k);
  const Metrics m = metrics(cm);

  std::string dataset_name;
  std::vector<std::string> class_names;
  if (!config.manifest_path.empty()) {
    const DatasetManifest manifest = load_manifest(config.manifest_path);
    dataset_name = manifest.name;
    class_names = manifest.class_names;
  }
  if (class_names.size() != std::size_t(k)) {
    class_names.clear();
    for (int i = 0; i < k; ++i) class_names.push_back("class" + std::to_string(i));
  }
  const TimeBatchProtocol protocol = protocol_for(config, dataset_name);
  const std::vector<double> curve = time_batch_accuracy(predictions, data, protocol.batch_size, protocol.max_t);

  nlohmann::ordered_json report;
  report["config"] = config_json(stored);
  report["checkpoint"] = config.checkpoint;
  report["utterances"] = cm.total();
  report["accuracy"] = m.accuracy;
  report["weighted_f1"] = m.weighted_f1;
  for (int i = 0; i < k; ++i) {
    report["classes"].push_back({{"name", class_names[i]},
                                 {"support", cm.support(i)},
                                 {"f1", m.f1[i]},
                                 {"recall", m.recall[i]}});
    std::vector<std::int64_t> row;
    for (int j = 0; j < k; ++j) row.push_back(cm(i, j));
    report["confusion"].push_back(row);
  }
  report["time_batch"]["batch_size"] = protocol.batch_size;
  report["time_batch"]["max_t"] = protocol.max_t;
  for (double a : curve) report["time_batch"]["accuracy"].push_back(std::isnan(a) ? nlohmann::ordered_json() : nlohmann::ordered_json(a));

  std::printf("utterances %lld  accuracy %.6f  weighted F1 %.6f\n", static_cast<long long>(cm.total()), m.accuracy,
              m.weighted_f1);
  for (int i = 0; i < k; ++i) {
    std::printf("  %-12s support %6lld  F1 %.6f  recall %.6f\n", class_names[i].c_str(),
                static_cast<long long>(cm.support(i)), m.f1[i], m.recall[i]);
  }
  std::printf("time-batch accuracy (batch %d, first %d):", protocol.batch_size, protocol.max_t);
  for (double a : curve) std::printf(" %s", json_number(a).c_str());
  std::printf("\n");

  if (probes) {
    if (config.train_path.empty()) throw ValidationError("--probes needs train = <path> to fit the probes");
    std::optional<DatasetManifest> manifest;
    if (!config.manifest_path.empty()) manifest = load_manifest(config.manifest_path);
    const std::vector<Dialogue> train = load(config.train_path, manifest ? &*manifest : nullptr);
    const auto rows = learned_probe_rows(model, train, data);
    report["probes"]["chance"] = chance_rate(labels_of(data), k);
    for (const auto& row : rows) {
      report["probes"]["rows"].push_back({{"subset", row.subset}, {"accuracy", row.learned}});
      std::printf("probe {%s} %.6f\n", row.subset.c_str(), row.learned);
    }
  }
  const fs::path dir = output_dir(config);
  write_text(dir / "eval.json", report.dump(2) + "\n");
  return 0;
}

void write_truth(const fs::path& path, const std::vector<LabeledLatents>& items) {
  std::string out;
  if (!items.empty()) {
    const auto& f = items.front();
    for (const char* name : {"s", "v", "z"}) {
      const Index n = name[0] == 's' ? f.s.front().size() : name[0] == 'v' ? f.v.front().size() : f.z.front().size();
      for (Index i = 0; i < n; ++i) out += std::string(name) + "_true" + std::to_string(i) + ",";
    }
    out += "label\n";
  }
  char buf[32];
  for (const auto& item : items) {
    for (std::size_t t = 0; t < item.s.size(); ++t) {
      for (const auto* part : {&item.s[t], &item.v[t], &item.z[t]}) {
        for (Index i = 0; i < part->size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g,", (*part)(i));
          out += buf;
        }
      }
      out += std::to_string(item.dialogue.turns[t].label) + "\n";
    }
  }
  write_text(path, out);
}

int cmd_synth(const CommonFlags& flags) {
  const RunConfig config = resolve(flags);
  const SyntheticCorpus corpus = make_corpus(config.synth, config.seed);
  const fs::path dir = output_dir(config);
  save_dialogues(dialogues_of(corpus.train), (dir / "train.jsonl").string());
  save_dialogues(dialogues_of(corpus.test), (dir / "test.jsonl").string());
  DatasetManifest manifest;
  manifest.name = "synthetic";
  manifest.u_dim = config.synth.u_dim;
  manifest.f_raw_dim = config.synth.f_raw_dim;
  manifest.n_classes = int(config.synth.n_classes);
  auto count = [](const std::vector<LabeledLatents>& items) {
    SplitCount c{int(items.size()), 0};
    for (const auto& i : items) c.utterances += int(i.dialogue.turns.size());
    return c;
  };
  manifest.train_val = count(corpus.train);
  manifest.test = count(corpus.test);
  save_manifest(manifest, (dir / "manifest.json").string());
  write_truth(dir / "truth_train.csv", corpus.train);
  write_truth(dir / "truth_test.csv", corpus.test);
  write_text(dir / "config.txt", echo(config));
  std::printf("wrote %zu train and %zu test dialogues to %s\n", corpus.train.size(), corpus.test.size(),
              dir.string().c_str());
  return 0;
}

int cmd_ablate(const CommonFlags& flags) {
  RunConfig config = resolve(flags);
  Data data;
  if (config.train_path.empty()) {
    // no data given: ablate on a synthetic corpus drawn from the seed
    const SyntheticCorpus corpus = make_corpus(config.synth, config.seed);
    std::vector<Dialogue> train = dialogues_of(corpus.train);
    data.splits = split(train, DatasetManifest{}, config.val_fraction, config.seed);
    data.splits.test = dialogues_of(corpus.test);
  } else {
    data = load_data(config);
  }
  resolve_dims(config, data);
  const ModelConfig base = model_config(config);
  const TrainOptions opt = train_options(config);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < config.ablation_seeds; ++i) seeds.push_back(config.seed + std::uint64_t(i));
  std::vector<AblationRow> rows;
  for (const auto& sw : ablation_grid()) {
    rows.push_back(ablation_run(sw, base, opt, data.splits.train, data.splits.val, data.splits.test, seeds));
    std::fprintf(stderr, "%s", ablation_table({rows.back()}).c_str());
  }
  const std::string table = ablation_table(rows);
  std::printf("%s", table.c_str());
  write_text(output_dir(config) / "ablation.tsv", commented(echo(config)) + table);
  return 0;
}

int cmd_gradcheck(const CommonFlags& flags) {
  const RunConfig config = resolve(flags);
  // toy widths keep the finite-difference sweep fast; the switches follow the config
  ModelConfig mc = toy_model_config();
  mc.topic = config.topic;
  mc.attributes = config.attributes;
  mc.disentangle = config.disentangle;
  mc.literal_z_unit = config.literal_z_unit;
  if (mc.literal_z_unit) mc.z_dim = mc.s_dim;
  const GradCheckReport report = gradcheck_elbo(mc, config.weights, config.seed);
  std::printf("%s", report.summary().c_str());
  std::printf("%s: max relative error %.3e over %zu tensors\n", report.passed() ? "PASS" : "FAIL",
              report.max_rel_error(), report.entries.size());
  return report.passed() ? 0 : kRuntimeExit;
}

int cmd_export(const CommonFlags& flags, const std::string& data_path) {
  const RunConfig config = resolve(flags);
  if (config.checkpoint.empty()) throw ValidationError("export-latents needs --set checkpoint=<path>");
  auto [stored, model] = model_from_checkpoint(config.checkpoint, false);
  const std::vector<Dialogue> data = load_eval_data(config, data_path);
  for (const auto& d : data) validate_dialogue(model, d);
  const fs::path path = output_dir(config) / "latents.csv";
  export_latents(model, data, path.string());
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic causal disentanglement model for dialogue emotion detection"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string data_path;
  bool resume = false, probes = false;

  auto* train = app.add_subcommand("train", "train a model; writes last.ckpt, best.ckpt and train_log.jsonl");
  add_common(train, flags);
  train->add_flag("--resume", resume, "continue from <out>/last.ckpt if present");
  auto* eval = app.add_subcommand("eval", "metrics, confusion matrix and time-batch accuracy of a checkpoint");
  add_common(eval, flags);
  eval->add_option("--data", data_path, "dialogue file (default: the configured test file)");
  eval->add_flag("--probes", probes, "also fit latent-subset probes on the training file");
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with ground-truth latents");
  add_common(synth, flags);
  auto* ablate = app.add_subcommand("ablate", "train and score the ablation grid");
  add_common(ablate, flags);
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full loss at toy sizes");
  add_common(gradcheck, flags);
  auto* exporter = app.add_subcommand("export-latents", "write per-utterance posterior means as CSV");
  add_common(exporter, flags);
  exporter->add_option("--data", data_path, "dialogue file (default: the configured test file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*train) return cmd_train(flags, resume);
    if (*eval) return cmd_eval(flags, data_path, probes);
    if (*synth) return cmd_synth(flags);
    if (*ablate) return cmd_ablate(flags);
    if (*gradcheck) return cmd_gradcheck(flags);
    if (*exporter) return cmd_export(flags, data_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return kRuntimeExit;
}
