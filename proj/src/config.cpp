#include "dcdm/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dcdm/errors.hpp"

namespace dcdm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ValidationError("config: bad value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "on" || text == "1") return true;
  if (text == "false" || text == "off" || text == "0") return false;
  throw ValidationError("config: bad boolean '" + text + "' for " + key);
}

std::string format(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
std::string format(bool b) { return b ? "true" : "false"; }
std::string format(const std::string& s) { return s; }
template <typename T>
  requires std::is_integral_v<T>
std::string format(T x) {
  return std::to_string(x);
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Access>
Entry field(std::string key, Access access) {
  using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  Entry e;
  e.key = key;
  e.set = [key, access](RunConfig& c, const std::string& text) {
    T& target = access(c);
    if constexpr (std::is_same_v<T, std::string>) {
      target = text;
    } else if constexpr (std::is_same_v<T, bool>) {
      target = parse_bool(key, text);
    } else {
      target = parse_number<T>(key, text);
    }
  };
  e.get = [access](const RunConfig& c) { return format(access(const_cast<RunConfig&>(c))); };
  return e;
}

#define DCDM_FIELD(key, member) field(key, [](RunConfig& c) -> auto& { return c.member; })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t{
        DCDM_FIELD("train", train_path),
        DCDM_FIELD("test", test_path),
        DCDM_FIELD("manifest", manifest_path),
        DCDM_FIELD("out", out),
        DCDM_FIELD("checkpoint", checkpoint),
        DCDM_FIELD("seed", seed),
        DCDM_FIELD("epochs", epochs),
        DCDM_FIELD("batch_size", batch_size),
        DCDM_FIELD("lr", lr),
        DCDM_FIELD("weight_decay", weight_decay),
        DCDM_FIELD("lambda_cls", weights.cls),
        DCDM_FIELD("lambda_rec", weights.rec),
        DCDM_FIELD("lambda_kl", weights.kl),
        DCDM_FIELD("val_fraction", val_fraction),
        DCDM_FIELD("u_dim", u_dim),
        DCDM_FIELD("f_raw_dim", f_raw_dim),
        DCDM_FIELD("n_classes", n_classes),
        DCDM_FIELD("s_dim", s_dim),
        DCDM_FIELD("v_dim", v_dim),
        DCDM_FIELD("z_dim", z_dim),
        DCDM_FIELD("p_dim", p_dim),
        DCDM_FIELD("f_dim", f_dim),
        DCDM_FIELD("topic_hidden", topic_hidden),
        DCDM_FIELD("gen_hidden", gen_hidden),
        DCDM_FIELD("cls_hidden", cls_hidden),
    };
    Entry topic;
    topic.key = "topic";
    topic.set = [](RunConfig& c, const std::string& text) {
      try {
        c.topic = parse_topic_source(text);
      } catch (const Error& e) {
        throw ValidationError(std::string("config: ") + e.what());
      }
    };
    topic.get = [](const RunConfig& c) { return std::string(to_string(c.topic)); };
    t.push_back(topic);
    for (Entry e : {
             DCDM_FIELD("attributes", attributes),
             DCDM_FIELD("disentangle", disentangle),
             DCDM_FIELD("literal_z_unit", literal_z_unit),
             DCDM_FIELD("time_batch_size", time_batch_size),
             DCDM_FIELD("time_batch_max", time_batch_max),
             DCDM_FIELD("ablation_seeds", ablation_seeds),
             DCDM_FIELD("synth.s_dim", synth.s_dim),
             DCDM_FIELD("synth.v_dim", synth.v_dim),
             DCDM_FIELD("synth.z_dim", synth.z_dim),
             DCDM_FIELD("synth.p_dim", synth.p_dim),
             DCDM_FIELD("synth.u_dim", synth.u_dim),
             DCDM_FIELD("synth.f_dim", synth.f_dim),
             DCDM_FIELD("synth.f_raw_dim", synth.f_raw_dim),
             DCDM_FIELD("synth.n_classes", synth.n_classes),
             DCDM_FIELD("synth.latent_noise", synth.latent_noise),
             DCDM_FIELD("synth.z_noise", synth.z_noise),
             DCDM_FIELD("synth.z_attribute_gain", synth.z_attribute_gain),
             DCDM_FIELD("synth.emission_noise", synth.emission_noise),
             DCDM_FIELD("synth.emission_scale", synth.emission_scale),
             DCDM_FIELD("synth.radius", synth.radius),
             DCDM_FIELD("synth.persistence", synth.persistence),
             DCDM_FIELD("synth.n_speakers", synth.n_speakers),
             DCDM_FIELD("synth.n_train", synth.n_train),
             DCDM_FIELD("synth.n_test", synth.n_test),
             DCDM_FIELD("synth.turns", synth.turns),
         }) {
      t.push_back(std::move(e));
    }
    return t;
  }();
  return table;
}

#undef DCDM_FIELD

}  // namespace

void RunConfig::validate() const {
  for (Index d : {s_dim, v_dim, z_dim, p_dim, f_dim, topic_hidden, gen_hidden, cls_hidden}) {
    if (d < 1) throw ValidationError("config: all dims must be >= 1");
  }
  if (u_dim < 0 || f_raw_dim < 0 || n_classes < 0) throw ValidationError("config: negative data dims");
  if (!(lr > 0.0)) throw ValidationError("config: lr must be > 0");
  if (weight_decay < 0.0) throw ValidationError("config: weight_decay must be >= 0");
  if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ValidationError("config: val_fraction must be in [0, 1)");
  if (time_batch_size < 0 || time_batch_max < 0) throw ValidationError("config: time batch settings must be >= 0");
  if (ablation_seeds < 1) throw ValidationError("config: ablation_seeds must be >= 1");
  weights.validate();
  synth.validate();
}

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(config, value);
      return;
    }
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(number) + ": expected key = value");
    }
    try {
      set_option(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str());
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + assignment + "'");
  set_option(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string echo(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

ModelConfig model_config(const RunConfig& config) {
  if (config.u_dim < 1 || config.f_raw_dim < 1 || config.n_classes < 2) {
    throw ValidationError("config: u_dim, f_raw_dim and n_classes are unresolved");
  }
  ModelConfig m;
  m.u_dim = config.u_dim;
  m.f_raw_dim = config.f_raw_dim;
  m.n_classes = config.n_classes;
  m.topic_hidden = config.topic_hidden;
  m.f_dim = config.f_dim;
  m.p_dim = config.p_dim;
  m.s_dim = config.s_dim;
  m.v_dim = config.v_dim;
  m.z_dim = config.z_dim;
  m.gen_hidden = config.gen_hidden;
  m.cls_hidden = config.cls_hidden;
  m.topic = config.topic;
  m.attributes = config.attributes;
  m.disentangle = config.disentangle;
  m.literal_z_unit = config.literal_z_unit;
  m.validate();
  return m;
}

TrainOptions train_options(const RunConfig& config) {
  TrainOptions t;
  t.epochs = config.epochs;
  t.batch_size = config.batch_size;
  t.adam.lr = config.lr;
  t.adam.weight_decay = config.weight_decay;
  t.weights = config.weights;
  t.seed = config.seed;
  t.validate();
  return t;
}

}  // namespace dcdm
