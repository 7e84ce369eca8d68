#pragma once

// Dynamic causal disentanglement model: a sequential VAE whose per-utterance
// latent state is split into an emotion/utterance chain s, an emotion/topic
// chain v and an emotion-irrelevant chain z.
//
//   prior      p(a_t | a_{t-1}, P_t)   GRU over [a_{t-1}, P_t] + Gaussian head
//   posterior  q(a_t | a_{t-1}, o_t)   affine unit over [a_{t-1}, U_t, F_t, P_t]
//                                      (z omits F_t) + Gaussian head
//   generator  U_hat from [s, v, z], F_hat from v alone
//   classifier logits from [s, v] alone
//
// P_t is a speaker-specific LSTM summary of that speaker's earlier utterances
// and F_t is the 64-d projection of an externally supplied topic embedding.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dcdm/cells.hpp"

namespace dcdm {

enum class TopicSource { none, recurrent, external };

std::string_view to_string(TopicSource source);
TopicSource parse_topic_source(std::string_view text);

struct ModelConfig {
  Index u_dim = 0;
  Index f_raw_dim = 768;
  Index topic_hidden = 128;
  Index f_dim = 64;
  Index p_dim = 64;
  Index s_dim = 64;
  Index v_dim = 64;
  Index z_dim = 64;
  Index gen_hidden = 64;
  Index cls_hidden = 64;
  Index n_classes = 6;

  TopicSource topic = TopicSource::external;
  bool attributes = true;
  // When false the three chains collapse into one latent of the summed width
  // with a single prior/posterior chain that feeds every head.
  bool disentangle = true;
  // Reads the z posterior unit exactly as printed: s_{t-1} as recurrent input
  // and the s unit's bias.
  bool literal_z_unit = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct Turn {
  std::string speaker;
  Vector u;
  Vector f_raw;
  int label = -1;
  std::optional<std::string> text;

  bool operator==(const Turn&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  // optional "train" / "val" / "test" tag carried by the data file
  std::string split;

  bool operator==(const Dialogue&) const = default;
};

/// Two dense layers with a tanh between them.
struct Mlp {
  Dense hidden;
  Dense out;

  static Mlp create(ParameterSet& params, const std::string& prefix, ParamGroup group, Index in,
                    Index hidden, Index out);
};

Var mlp(const Mlp& net, ParamBinding& bind, const Var& x);

/// One latent chain with its prior and posterior machinery.
struct LatentChain {
  std::string name;
  Index dim = 0;
  GruCell prior_cell;
  GaussianHead prior_head;
  Dense posterior_unit;
  GaussianHead posterior_head;
  ParamId initial;
  bool sees_topic = true;
  // Chain whose previous sample enters this chain's posterior unit.
  std::size_t posterior_source = 0;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  const std::vector<LatentChain>& chains() const { return chains_; }
  std::optional<std::size_t> chain_index(std::string_view name) const;
  Index latent_width(const std::vector<std::size_t>& chains) const;

  const LstmCell& attribute_cell() const { return attribute_cell_; }
  ParamId attribute_initial() const { return attribute_initial_; }
  const Mlp& topic_projection() const { return topic_projection_; }
  const LstmCell& topic_encoder() const { return topic_encoder_; }
  const Mlp& utterance_decoder() const { return utterance_decoder_; }
  const Mlp& topic_decoder() const { return topic_decoder_; }

  // p(E | s, v) and q(E | s, v) are one parameterized classifier; both
  // accessors return the same object.
  const Mlp& prior_classifier() const { return classifier_; }
  const Mlp& posterior_classifier() const { return classifier_; }

  const std::vector<std::size_t>& classifier_inputs() const { return classifier_inputs_; }
  const std::vector<std::size_t>& utterance_inputs() const { return utterance_inputs_; }
  const std::vector<std::size_t>& topic_inputs() const { return topic_inputs_; }

  /// Whether F_hat is scored against F. Only externally supplied topic
  /// features are an observation; the other sources are model-internal.
  bool reconstructs_topic() const { return config_.topic == TopicSource::external; }

 private:
  ModelConfig config_;
  ParameterSet params_;
  std::vector<LatentChain> chains_;
  LstmCell attribute_cell_;
  ParamId attribute_initial_;
  Mlp topic_projection_;
  LstmCell topic_encoder_;
  Mlp utterance_decoder_;
  Mlp topic_decoder_;
  Mlp classifier_;
  std::vector<std::size_t> classifier_inputs_;
  std::vector<std::size_t> utterance_inputs_;
  std::vector<std::size_t> topic_inputs_;
};

/// Supplies standard-normal reparameterization noise.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Vector next(Index n) = 0;
};

class GaussianNoise final : public NoiseSource {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}
  Vector next(Index n) override;

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
};

/// Zero noise: every sample is its posterior mean.
class ZeroNoise final : public NoiseSource {
 public:
  Vector next(Index n) override { return Vector::Zero(n); }
};

/// Replays a fixed sequence, cycling when exhausted.
class ReplayNoise final : public NoiseSource {
 public:
  explicit ReplayNoise(std::vector<Vector> draws) : draws_(std::move(draws)) {}
  Vector next(Index n) override;
  void rewind() { cursor_ = 0; }

 private:
  std::vector<Vector> draws_;
  std::size_t cursor_ = 0;
};

struct LatentStep {
  GaussianDiag prior;
  GaussianDiag posterior;
  Var sample;
};

struct StepTrace {
  std::vector<LatentStep> latents;  // one per chain
  Var attributes;                   // P_t
  Var topic;                        // F_t after projection
  Var utterance;                    // U_t
  Var recon_utterance;
  Var recon_topic;
  Var logits;
};

struct DialogueTrace {
  std::vector<StepTrace> steps;
};

void validate_dialogue(const Model& model, const Dialogue& dialogue);

/// P_t for every turn: the speaker's LSTM state after that speaker's earlier
/// utterances, or the learned initial state on their first turn. Zero vectors
/// when attributes are switched off.
std::vector<Var> personal_attributes(const Model& model, ParamBinding& bind,
                                     const Dialogue& dialogue);

/// Two affine layers with tanh between them, f_raw_dim -> f_dim.
Var topic_project(const Model& model, ParamBinding& bind, const Vector& f_raw);

/// F_t for every turn according to the configured topic source.
std::vector<Var> topic_features(const Model& model, ParamBinding& bind, const Dialogue& dialogue);

std::vector<GaussianDiag> prior_step(const Model& model, ParamBinding& bind,
                                     const std::vector<Var>& previous, const Var& attributes);

std::vector<GaussianDiag> posterior_step(const Model& model, ParamBinding& bind,
                                         const std::vector<Var>& previous, const Var& utterance,
                                         const Var& topic, const Var& attributes);

struct Reconstruction {
  Var utterance;
  Var topic;
};

Reconstruction generate(const Model& model, ParamBinding& bind, const std::vector<Var>& samples);

Var classify(const Model& model, ParamBinding& bind, const std::vector<Var>& samples);

/// Filtering-style pass: each chain is sampled from its posterior and that
/// sample drives the next step's prior and posterior.
DialogueTrace forward_dialogue(const Model& model, ParamBinding& bind, const Dialogue& dialogue,
                               NoiseSource& noise);

/// Learned initial latent samples as tape leaves.
std::vector<Var> initial_latents(const Model& model, ParamBinding& bind);

}  // namespace dcdm
