#pragma once

// Dialogue feature files and dataset manifests.
//
// A feature file holds one dialogue per line as a JSON object:
//   {"id": "...", "split": "train", "turns": [{"speaker": "A", "u": [...],
//    "f_raw": [...], "label": 3, "text": "..."}, ...]}
// "split" and "text" are optional.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dcdm/model.hpp"

namespace dcdm {

struct SplitCount {
  int dialogues = 0;
  int utterances = 0;  // 0 means unchecked

  bool operator==(const SplitCount&) const = default;
};

struct DatasetManifest {
  std::string name;
  Index u_dim = 0;
  Index f_raw_dim = 0;
  int n_classes = 0;
  std::vector<std::string> class_names;
  SplitCount train_val;
  SplitCount test;

  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest iemocap_manifest(Index u_dim, Index f_raw_dim = 768);
DatasetManifest meld_manifest(Index u_dim, Index f_raw_dim = 768);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct LoadResult {
  std::vector<Dialogue> dialogues;
  std::vector<std::string> warnings;
};

/// Parses a feature file. Every error names the line number, and the dialogue
/// id once it is known. With a manifest, vector lengths and labels are checked
/// against it; without one, the first turn fixes the dimensions.
LoadResult read_dialogues(std::istream& in, const DatasetManifest* manifest = nullptr);
LoadResult load_dialogues(const std::string& path, const DatasetManifest* manifest = nullptr);

std::string dialogue_to_json(const Dialogue& dialogue);
void write_dialogues(std::ostream& out, const std::vector<Dialogue>& dialogues);
void save_dialogues(const std::vector<Dialogue>& dialogues, const std::string& path);

struct Splits {
  std::vector<Dialogue> train;
  std::vector<Dialogue> val;
  std::vector<Dialogue> test;
};

/// Dialogue-level partition. When every dialogue carries a split tag the tags
/// decide; "train" dialogues are further divided when no "val" tag is present.
/// Otherwise the manifest counts assign the first train_val.dialogues dialogues
/// (file order) to train&val and the rest to test. Validation dialogues are a
/// seeded random val_fraction of train&val; each part keeps file order.
Splits split(const std::vector<Dialogue>& dialogues, const DatasetManifest& manifest,
             double val_fraction = 0.1, std::uint64_t seed = 0);

}  // namespace dcdm
