#pragma once

// Linear-Gaussian structural causal model that emits dialogues in the same
// shape the model consumes, together with the ground-truth latents.
//
//   P_t        = rho * pi_speaker + sqrt(1 - rho^2) * xi_t,  pi, xi ~ N(0, I)
//   a_t        = A_a a_{t-1} + B_a P_t + eps_a        for a in {s, v, z}
//   U_t        = C [s_t; v_t; z_t] + eps
//   F_t        = embed(D v_t + eps)
//   E_t        = argmax G [s_t; v_t]

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "dcdm/model.hpp"

namespace dcdm {

struct SyntheticConfig {
  Index s_dim = 8;
  Index v_dim = 8;
  Index z_dim = 8;
  Index p_dim = 8;
  Index u_dim = 24;
  Index f_dim = 8;
  Index f_raw_dim = 768;
  Index n_classes = 4;
  double latent_noise = 0.1;
  // z is driven mainly by its own exogenous noise: B_z is scaled by
  // z_attribute_gain and eps_z has scale z_noise.
  double z_noise = 1.0;
  double z_attribute_gain = 0.1;
  double emission_noise = 0.1;
  // multiplies C, so U has roughly this many times the latent scale
  double emission_scale = 1.0;
  // spectral radius every transition matrix is rescaled to
  double radius = 0.8;
  // correlation of a speaker's per-turn attributes with their persistent trait
  double persistence = 0.8;
  int n_speakers = 2;
  int n_train = 200;
  int n_test = 50;
  int turns = 12;

  void validate() const;
  bool operator==(const SyntheticConfig&) const = default;
};

struct SyntheticSpec {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::array<Matrix, 3> transition;  // A_s, A_v, A_z
  std::array<Matrix, 3> input;       // B_s, B_v, B_z
  Matrix emit_u;                     // C, u_dim x (s+v+z)
  Matrix emit_f;                     // D, f_dim x v
  Matrix embed_f;                    // f_raw_dim x f_dim, orthonormal columns
  Matrix emit_label;                 // G, n_classes x (s+v)
};

struct LatentState {
  Vector s, v, z;
};

/// One step of the latent chains. Reads only the previous state, this turn's
/// attributes and fresh noise from `rng`.
LatentState advance(const SyntheticSpec& spec, const LatentState& previous, const Vector& attributes,
                    std::mt19937_64& rng);

/// A generated dialogue with the latents that produced it.
struct LabeledLatents {
  Dialogue dialogue;
  std::vector<Vector> s, v, z, p;
};

SyntheticSpec sample_spec(const SyntheticConfig& config, std::uint64_t seed);

/// Largest eigenvalue modulus.
double spectral_radius(const Matrix& m);

LabeledLatents generate_dialogue(const SyntheticSpec& spec, int turns, std::mt19937_64& rng,
                                 const std::string& id = "d0");

/// argmax G [s; v]; ties go to the lowest class index.
int label_from_latents(const SyntheticSpec& spec, const Vector& s, const Vector& v);

/// Dialogue i draws from an engine seeded with (seed, i), so any subset can
/// be regenerated alone.
std::vector<LabeledLatents> generate_corpus(const SyntheticSpec& spec, int count, int turns,
                                            std::uint64_t seed, const std::string& prefix);

struct SyntheticCorpus {
  SyntheticSpec spec;
  std::vector<LabeledLatents> train;
  std::vector<LabeledLatents> test;
};

SyntheticCorpus make_corpus(const SyntheticConfig& config, std::uint64_t seed);

std::vector<Dialogue> dialogues_of(const std::vector<LabeledLatents>& items);

struct ProbeOptions {
  int iterations = 1500;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

/// Multinomial logistic regression fit by full-batch gradient descent on
/// standardized features (zero initialisation, so deterministic), scored on
/// the held-out rows.
double probe(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
             const std::vector<int>& test_y, int n_classes, const ProbeOptions& options = {});

/// Rows are utterances; columns are the concatenated posterior means of the
/// requested chains, computed with zero noise.
Matrix posterior_means(const Model& model, const std::vector<Dialogue>& dialogues,
                       const std::vector<std::size_t>& chains);

Matrix true_latents(const std::vector<LabeledLatents>& items, const std::vector<std::size_t>& chains);

std::vector<int> labels_of(const std::vector<Dialogue>& dialogues);

struct ProbeRow {
  std::string subset;                // e.g. "s,v"
  std::vector<std::size_t> chains;   // 0 = s, 1 = v, 2 = z
  double learned = 0.0;
  double truth = 0.0;
};

struct DisentanglementReport {
  std::vector<ProbeRow> rows;
  double chance = 0.0;  // majority-class rate on the test rows

  const ProbeRow& row(const std::string& subset) const;
};

/// Learned-latent probe accuracy for each of the six subsets, with the
/// truth column left at 0. Needs only the dialogues, so it can run on data
/// loaded from disk.
std::vector<ProbeRow> learned_probe_rows(const Model& model, const std::vector<Dialogue>& train,
                                         const std::vector<Dialogue>& test, const ProbeOptions& options = {});

/// Majority-class rate.
double chance_rate(const std::vector<int>& labels, int n_classes);

/// The six latent subsets z, v, s, {s,z}, {v,z}, {s,v}.
const std::vector<std::vector<std::size_t>>& probe_subsets();

/// Probes are fit on the train items and scored on the test items.
DisentanglementReport disentanglement_report(const Model& model,
                                             const std::vector<LabeledLatents>& train,
                                             const std::vector<LabeledLatents>& test,
                                             const ProbeOptions& options = {});

}  // namespace dcdm
