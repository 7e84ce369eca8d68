#pragma once

// Training objective: negative ELBO assembled from a dialogue trace.
//
//   total = l_cls * cls + l_rec * (recon_u + recon_f) + l_kl * sum_a KL_a
//
// cls is the summed cross-entropy of the shared classifier, recon_* are
// unit-variance Gaussian negative log-likelihoods with constants dropped, and
// KL_a = sum_t KL(q(a_t | ...) || p(a_t | ...)). The likelihood-ratio term
// between p(E | s, v) and q(E | s, v) vanishes identically because both are
// the same classifier.

#include <string>
#include <vector>

#include "dcdm/model.hpp"

namespace dcdm {

struct LossWeights {
  double cls = 1.0;
  double rec = 1.0;
  double kl = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
  double cls = 0.0;
  double recon_u = 0.0;
  double recon_f = 0.0;
  std::vector<double> kl;  // one per latent chain, in model chain order
  double total = 0.0;

  std::vector<double> cls_t;
  std::vector<double> recon_u_t;
  std::vector<double> recon_f_t;
  std::vector<std::vector<double>> kl_t;  // [chain][t]

  double kl_sum() const;
};

struct ReconTerms {
  Var utterance;
  Var topic;
  std::vector<Var> utterance_t;
  std::vector<Var> topic_t;
};

ReconTerms recon_loss(const Model& model, const DialogueTrace& trace, const Dialogue& dialogue);

struct KlTerms {
  std::vector<Var> per_chain;
  std::vector<std::vector<Var>> per_chain_t;
};

KlTerms kl_loss(const DialogueTrace& trace);

struct ClsTerms {
  Var total;
  std::vector<Var> per_step;
};

ClsTerms cls_loss(const DialogueTrace& trace, const Dialogue& dialogue);

/// The log-ratio between the prior and posterior label models. Always 0; throws
/// if the model were ever built with two classifier copies.
double degenerate_label_term(const Model& model);

struct Objective {
  LossBreakdown breakdown;
  Var total;
};

Objective total_loss(const Model& model, const DialogueTrace& trace, const Dialogue& dialogue,
                     const LossWeights& weights);

}  // namespace dcdm
