#include "dcdm/elbo.hpp"

namespace dcdm {

namespace {

void require_aligned(const DialogueTrace& trace, const Dialogue& dialogue, const char* what) {
  if (trace.steps.size() != dialogue.turns.size()) {
    throw DimensionError(std::string(what) + ": trace has " + std::to_string(trace.steps.size()) +
                         " steps, dialogue " + dialogue.id + " has " +
                         std::to_string(dialogue.turns.size()) + " turns");
  }
}

Var fold_sum(Tape& tape, const std::vector<Var>& terms) {
  if (terms.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

std::vector<double> values(const std::vector<Var>& vars) {
  std::vector<double> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.scalar());
  return out;
}

}  // namespace

void LossWeights::validate() const {
  if (!(cls >= 0.0) || !(rec >= 0.0) || !(kl >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
}

double LossBreakdown::kl_sum() const {
  double s = 0.0;
  for (double k : kl) s += k;
  return s;
}

ReconTerms recon_loss(const Model& model, const DialogueTrace& trace, const Dialogue& dialogue) {
  require_aligned(trace, dialogue, "recon_loss");
  ReconTerms out;
  if (trace.steps.empty()) throw ValidationError("recon_loss: empty trace");
  Tape& tape = trace.steps.front().utterance.tape();
  for (const StepTrace& step : trace.steps) {
    out.utterance_t.push_back(ad::half_squared_distance(step.utterance, step.recon_utterance));
    if (model.reconstructs_topic()) {
      out.topic_t.push_back(ad::half_squared_distance(step.topic, step.recon_topic));
    } else {
      out.topic_t.push_back(tape.constant(Matrix::Zero(1, 1)));
    }
  }
  out.utterance = fold_sum(tape, out.utterance_t);
  out.topic = fold_sum(tape, out.topic_t);
  return out;
}

KlTerms kl_loss(const DialogueTrace& trace) {
  if (trace.steps.empty()) throw ValidationError("kl_loss: empty trace");
  Tape& tape = trace.steps.front().utterance.tape();
  const std::size_t n_chains = trace.steps.front().latents.size();
  KlTerms out;
  out.per_chain_t.resize(n_chains);
  for (const StepTrace& step : trace.steps) {
    for (std::size_t i = 0; i < n_chains; ++i) {
      out.per_chain_t[i].push_back(ad::kl_diag(step.latents[i].posterior, step.latents[i].prior));
    }
  }
  for (const auto& terms : out.per_chain_t) out.per_chain.push_back(fold_sum(tape, terms));
  return out;
}

ClsTerms cls_loss(const DialogueTrace& trace, const Dialogue& dialogue) {
  require_aligned(trace, dialogue, "cls_loss");
  if (trace.steps.empty()) throw ValidationError("cls_loss: empty trace");
  ClsTerms out;
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const int label = dialogue.turns[t].label;
    if (label < 0) {
      throw ValidationError("cls_loss: dialogue " + dialogue.id + " turn " + std::to_string(t) +
                            " has no label");
    }
    out.per_step.push_back(ad::softmax_cross_entropy(trace.steps[t].logits, label));
  }
  out.total = fold_sum(trace.steps.front().logits.tape(), out.per_step);
  return out;
}

double degenerate_label_term(const Model& model) {
  if (&model.prior_classifier() != &model.posterior_classifier()) {
    throw Error("prior and posterior label models must be one classifier");
  }
  return 0.0;
}

Objective total_loss(const Model& model, const DialogueTrace& trace, const Dialogue& dialogue,
                     const LossWeights& weights) {
  weights.validate();
  degenerate_label_term(model);
  const ClsTerms cls = cls_loss(trace, dialogue);
  const ReconTerms recon = recon_loss(model, trace, dialogue);
  const KlTerms kl = kl_loss(trace);
  Tape& tape = cls.total.tape();

  const Var kl_total = fold_sum(tape, kl.per_chain);
  const Var total = ad::scale(cls.total, weights.cls) +
                    ad::scale(recon.utterance + recon.topic, weights.rec) +
                    ad::scale(kl_total, weights.kl);

  Objective out;
  LossBreakdown& b = out.breakdown;
  b.cls = cls.total.scalar();
  b.recon_u = recon.utterance.scalar();
  b.recon_f = recon.topic.scalar();
  b.kl = values(kl.per_chain);
  b.total = total.scalar();
  b.cls_t = values(cls.per_step);
  b.recon_u_t = values(recon.utterance_t);
  b.recon_f_t = values(recon.topic_t);
  for (const auto& terms : kl.per_chain_t) b.kl_t.push_back(values(terms));
  out.total = total;
  return out;
}

}  // namespace dcdm
