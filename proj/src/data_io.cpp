#include "dcdm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "dcdm/errors.hpp"

namespace dcdm {

using Json = nlohmann::ordered_json;

namespace {

std::string located(std::size_t line, const std::string& id, const std::string& message) {
  std::string out = "line " + std::to_string(line);
  if (!id.empty()) out += ", dialogue '" + id + "'";
  return out + ": " + message;
}

Vector parse_vector(const Json& j, const char* field) {
  if (!j.is_array()) throw ValidationError(std::string("'") + field + "' must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(std::string("'") + field + "' must be an array of numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
    if (!std::isfinite(v(static_cast<Index>(i)))) {
      throw ValidationError(std::string("'") + field + "' contains a non-finite value");
    }
  }
  return v;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const Json& require(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

Turn parse_turn(const Json& j) {
  if (!j.is_object()) throw ValidationError("turn must be an object");
  Turn turn;
  const Json& speaker = require(j, "speaker");
  if (!speaker.is_string()) throw ValidationError("'speaker' must be a string");
  turn.speaker = speaker.get<std::string>();
  turn.u = parse_vector(require(j, "u"), "u");
  turn.f_raw = parse_vector(require(j, "f_raw"), "f_raw");
  const Json& label = require(j, "label");
  if (!label.is_number_integer()) throw ValidationError("'label' must be an integer");
  turn.label = label.get<int>();
  if (auto it = j.find("text"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("'text' must be a string");
    turn.text = it->get<std::string>();
  }
  return turn;
}

}  // namespace

void DatasetManifest::validate() const {
  if (u_dim < 1 || f_raw_dim < 1) throw ValidationError("manifest: u_dim and f_raw_dim must be >= 1");
  if (n_classes < 2) throw ValidationError("manifest: n_classes must be >= 2");
  if (!class_names.empty() && int(class_names.size()) != n_classes) {
    throw ValidationError("manifest: " + std::to_string(class_names.size()) + " class names for " +
                          std::to_string(n_classes) + " classes");
  }
  if (train_val.dialogues < 0 || test.dialogues < 0 || train_val.utterances < 0 || test.utterances < 0) {
    throw ValidationError("manifest: negative split count");
  }
}

DatasetManifest iemocap_manifest(Index u_dim, Index f_raw_dim) {
  DatasetManifest m;
  m.name = "iemocap";
  m.u_dim = u_dim;
  m.f_raw_dim = f_raw_dim;
  m.n_classes = 6;
  m.class_names = {"happy", "sad", "neutral", "angry", "excited", "frustrated"};
  m.train_val = {120, 5810};
  m.test = {31, 1623};
  return m;
}

DatasetManifest meld_manifest(Index u_dim, Index f_raw_dim) {
  DatasetManifest m;
  m.name = "meld";
  m.u_dim = u_dim;
  m.f_raw_dim = f_raw_dim;
  m.n_classes = 7;
  m.class_names = {"anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"};
  m.train_val = {1152, 11098};
  m.test = {280, 2610};
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  Json j;
  j["name"] = m.name;
  j["u_dim"] = m.u_dim;
  j["f_raw_dim"] = m.f_raw_dim;
  j["n_classes"] = m.n_classes;
  j["class_names"] = m.class_names;
  j["splits"]["train_val"] = {{"dialogues", m.train_val.dialogues}, {"utterances", m.train_val.utterances}};
  j["splits"]["test"] = {{"dialogues", m.test.dialogues}, {"utterances", m.test.utterances}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.name = j.value("name", std::string());
    m.u_dim = require(j, "u_dim").get<Index>();
    m.f_raw_dim = require(j, "f_raw_dim").get<Index>();
    m.n_classes = require(j, "n_classes").get<int>();
    m.class_names = j.value("class_names", std::vector<std::string>{});
    if (auto it = j.find("splits"); it != j.end()) {
      auto count = [&](const char* key) {
        SplitCount c;
        if (auto s = it->find(key); s != it->end()) {
          c.dialogues = s->value("dialogues", 0);
          c.utterances = s->value("utterances", 0);
        }
        return c;
      };
      m.train_val = count("train_val");
      m.test = count("test");
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest_to_json(manifest);
  if (!out) throw IoError("write failed for '" + path + "'");
}

LoadResult read_dialogues(std::istream& in, const DatasetManifest* manifest) {
  LoadResult result;
  Index u_dim = manifest ? manifest->u_dim : -1;
  Index f_dim = manifest ? manifest->f_raw_dim : -1;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ValidationError(located(number, "", std::string("malformed JSON: ") + e.what()));
    }
    std::string id;
    try {
      if (!j.is_object()) throw ValidationError("record must be a JSON object");
      const Json& id_json = require(j, "id");
      if (!id_json.is_string()) throw ValidationError("'id' must be a string");
      id = id_json.get<std::string>();
      Dialogue d;
      d.id = id;
      if (auto it = j.find("split"); it != j.end()) {
        if (!it->is_string()) throw ValidationError("'split' must be a string");
        d.split = it->get<std::string>();
      }
      const Json& turns = require(j, "turns");
      if (!turns.is_array()) throw ValidationError("'turns' must be an array");
      if (turns.empty()) throw ValidationError("dialogue has no turns");
      for (std::size_t t = 0; t < turns.size(); ++t) {
        Turn turn = parse_turn(turns[t]);
        if (u_dim < 0) u_dim = turn.u.size();
        if (f_dim < 0) f_dim = turn.f_raw.size();
        if (turn.u.size() != u_dim) {
          throw DimensionError("turn " + std::to_string(t) + ": u has length " + std::to_string(turn.u.size()) +
                               ", expected " + std::to_string(u_dim));
        }
        if (turn.f_raw.size() != f_dim) {
          throw DimensionError("turn " + std::to_string(t) + ": f_raw has length " +
                               std::to_string(turn.f_raw.size()) + ", expected " + std::to_string(f_dim));
        }
        if (turn.label < 0 || (manifest && turn.label >= manifest->n_classes)) {
          throw ValidationError("turn " + std::to_string(t) + ": label " + std::to_string(turn.label) +
                                " out of range");
        }
        d.turns.push_back(std::move(turn));
      }
      result.dialogues.push_back(std::move(d));
    } catch (const DimensionError& e) {
      throw DimensionError(located(number, id, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(located(number, id, e.what()));
    } catch (const Json::exception& e) {
      throw ValidationError(located(number, id, e.what()));
    }
  }
  if (result.dialogues.empty()) result.warnings.push_back("no dialogues found");
  return result;
}

LoadResult load_dialogues(const std::string& path, const DatasetManifest* manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dialogue file '" + path + "'");
  LoadResult result = read_dialogues(in, manifest);
  for (auto& w : result.warnings) w = path + ": " + w;
  return result;
}

std::string dialogue_to_json(const Dialogue& dialogue) {
  Json j;
  j["id"] = dialogue.id;
  if (!dialogue.split.empty()) j["split"] = dialogue.split;
  Json turns = Json::array();
  for (const auto& turn : dialogue.turns) {
    Json t;
    t["speaker"] = turn.speaker;
    t["u"] = vector_json(turn.u);
    t["f_raw"] = vector_json(turn.f_raw);
    t["label"] = turn.label;
    if (turn.text) t["text"] = *turn.text;
    turns.push_back(std::move(t));
  }
  j["turns"] = std::move(turns);
  return j.dump();
}

void write_dialogues(std::ostream& out, const std::vector<Dialogue>& dialogues) {
  for (const auto& d : dialogues) out << dialogue_to_json(d) << '\n';
}

void save_dialogues(const std::vector<Dialogue>& dialogues, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dialogues(out, dialogues);
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

int utterances(const std::vector<Dialogue>& ds) {
  int n = 0;
  for (const auto& d : ds) n += int(d.turns.size());
  return n;
}

void carve_validation(Splits& s, std::vector<Dialogue> train_val, double val_fraction, std::uint64_t seed) {
  const std::size_t n = train_val.size();
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * double(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? s.val : s.train).push_back(std::move(train_val[i]));
}

}  // namespace

Splits split(const std::vector<Dialogue>& dialogues, const DatasetManifest& manifest, double val_fraction,
             std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ValidationError("split: val_fraction must be in [0, 1)");
  Splits s;
  const bool tagged =
      !dialogues.empty() && std::all_of(dialogues.begin(), dialogues.end(), [](const Dialogue& d) { return !d.split.empty(); });
  if (tagged) {
    std::vector<Dialogue> train_val;
    bool has_val = false;
    for (const auto& d : dialogues) has_val = has_val || d.split == "val";
    for (const auto& d : dialogues) {
      if (d.split == "train") {
        (has_val ? s.train : train_val).push_back(d);
      } else if (d.split == "val") {
        s.val.push_back(d);
      } else if (d.split == "test") {
        s.test.push_back(d);
      } else {
        throw ValidationError("split: dialogue '" + d.id + "' has unknown split tag '" + d.split + "'");
      }
    }
    if (!has_val) carve_validation(s, std::move(train_val), val_fraction, seed);
    return s;
  }

  const std::size_t n_train_val = std::size_t(manifest.train_val.dialogues);
  const std::size_t n_test = std::size_t(manifest.test.dialogues);
  if (n_train_val + n_test > dialogues.size()) {
    throw ValidationError("split: manifest asks for " + std::to_string(n_train_val + n_test) +
                          " dialogues but the dataset has " + std::to_string(dialogues.size()));
  }
  if (n_train_val + n_test < dialogues.size()) {
    throw ValidationError("split: manifest counts cover " + std::to_string(n_train_val + n_test) + " of " +
                          std::to_string(dialogues.size()) + " dialogues");
  }
  std::vector<Dialogue> train_val(dialogues.begin(), dialogues.begin() + n_train_val);
  s.test.assign(dialogues.begin() + n_train_val, dialogues.end());
  if (manifest.train_val.utterances > 0 && utterances(train_val) != manifest.train_val.utterances) {
    throw ValidationError("split: train&val has " + std::to_string(utterances(train_val)) +
                          " utterances, manifest says " + std::to_string(manifest.train_val.utterances));
  }
  if (manifest.test.utterances > 0 && utterances(s.test) != manifest.test.utterances) {
    throw ValidationError("split: test has " + std::to_string(utterances(s.test)) + " utterances, manifest says " +
                          std::to_string(manifest.test.utterances));
  }
  carve_validation(s, std::move(train_val), val_fraction, seed);
  return s;
}

}  // namespace dcdm
