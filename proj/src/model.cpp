#include "dcdm/model.hpp"

#include <map>

namespace dcdm {

std::string_view to_string(TopicSource source) {
  switch (source) {
    case TopicSource::none:
      return "none";
    case TopicSource::recurrent:
      return "recurrent";
    case TopicSource::external:
      return "external";
  }
  return "unknown";
}

TopicSource parse_topic_source(std::string_view text) {
  if (text == "none") return TopicSource::none;
  if (text == "recurrent" || text == "lstm") return TopicSource::recurrent;
  if (text == "external" || text == "llm") return TopicSource::external;
  throw ValidationError("unknown topic source '" + std::string(text) +
                        "' (expected none, recurrent or external)");
}

void ModelConfig::validate() const {
  const std::pair<const char*, Index> dims[] = {
      {"u_dim", u_dim},         {"f_raw_dim", f_raw_dim},   {"topic_hidden", topic_hidden},
      {"f_dim", f_dim},         {"p_dim", p_dim},           {"s_dim", s_dim},
      {"v_dim", v_dim},         {"z_dim", z_dim},           {"gen_hidden", gen_hidden},
      {"cls_hidden", cls_hidden}, {"n_classes", n_classes}};
  for (const auto& [name, value] : dims) {
    if (value < 1) throw ValidationError(std::string("model config: ") + name + " must be >= 1");
  }
  if (n_classes < 2) throw ValidationError("model config: n_classes must be >= 2");
  if (literal_z_unit && disentangle && s_dim != z_dim) {
    throw ValidationError("model config: literal_z_unit shares the s bias and needs s_dim == z_dim");
  }
}

Mlp Mlp::create(ParameterSet& params, const std::string& prefix, ParamGroup group, Index in,
                Index hidden, Index out) {
  return {Dense::create(params, prefix + ".hidden", group, in, hidden),
          Dense::create(params, prefix + ".out", group, hidden, out)};
}

Var mlp(const Mlp& net, ParamBinding& bind, const Var& x) {
  return dense(net.out, bind, ad::tanh(dense(net.hidden, bind, x)));
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const ModelConfig& c = config_;

  struct ChainSpec {
    std::string name;
    Index dim;
    bool sees_topic;
  };
  std::vector<ChainSpec> specs;
  if (c.disentangle) {
    specs = {{"s", c.s_dim, true}, {"v", c.v_dim, true}, {"z", c.z_dim, false}};
  } else {
    specs = {{"h", c.s_dim + c.v_dim + c.z_dim, true}};
  }

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    LatentChain chain;
    chain.name = spec.name;
    chain.dim = spec.dim;
    chain.sees_topic = spec.sees_topic;
    chain.posterior_source = i;
    chain.prior_cell = GruCell::create(params_, "prior." + spec.name + ".gru", ParamGroup::prior,
                                       spec.dim, c.p_dim);
    chain.prior_head = GaussianHead::create(params_, "prior." + spec.name + ".head",
                                            ParamGroup::prior, spec.dim, spec.dim);

    const bool literal_z = c.literal_z_unit && c.disentangle && spec.name == "z";
    if (literal_z) chain.posterior_source = 0;
    const Index source_dim = specs[chain.posterior_source].dim;
    const Index unit_in = source_dim + c.u_dim + (spec.sees_topic ? c.f_dim : 0) + c.p_dim;
    if (literal_z) {
      chain.posterior_unit.weight = params_.add("posterior.z.unit.W", ParamGroup::posterior,
                                                spec.dim, unit_in, ParamInit::uniform_fan_in);
      chain.posterior_unit.bias = chains_.front().posterior_unit.bias;
      chain.posterior_unit.in = unit_in;
      chain.posterior_unit.out = spec.dim;
    } else {
      chain.posterior_unit = Dense::create(params_, "posterior." + spec.name + ".unit",
                                           ParamGroup::posterior, unit_in, spec.dim);
    }
    chain.posterior_head = GaussianHead::create(params_, "posterior." + spec.name + ".head",
                                                ParamGroup::posterior, spec.dim, spec.dim);
    chain.initial =
        params_.add("initial." + spec.name, ParamGroup::initial_state, spec.dim, 1, ParamInit::zero);
    chains_.push_back(std::move(chain));
  }

  attribute_cell_ = LstmCell::create(params_, "attribute.lstm", ParamGroup::attribute, c.p_dim,
                                     c.u_dim);
  attribute_initial_ = params_.add("attribute.h0", ParamGroup::attribute, c.p_dim, 1, ParamInit::zero);

  if (c.topic == TopicSource::external) {
    topic_projection_ =
        Mlp::create(params_, "topic.proj", ParamGroup::topic, c.f_raw_dim, c.topic_hidden, c.f_dim);
  } else if (c.topic == TopicSource::recurrent) {
    topic_encoder_ = LstmCell::create(params_, "topic.lstm", ParamGroup::topic, c.f_dim, c.u_dim);
  }

  if (c.disentangle) {
    classifier_inputs_ = {0, 1};
    utterance_inputs_ = {0, 1, 2};
    topic_inputs_ = {1};
  } else {
    classifier_inputs_ = {0};
    utterance_inputs_ = {0};
    topic_inputs_ = {0};
  }
  utterance_decoder_ = Mlp::create(params_, "generator.utterance", ParamGroup::generator,
                                   latent_width(utterance_inputs_), c.gen_hidden, c.u_dim);
  topic_decoder_ = Mlp::create(params_, "generator.topic", ParamGroup::generator,
                               latent_width(topic_inputs_), c.gen_hidden, c.f_dim);
  classifier_ = Mlp::create(params_, "classifier", ParamGroup::classifier,
                            latent_width(classifier_inputs_), c.cls_hidden, c.n_classes);
}

std::optional<std::size_t> Model::chain_index(std::string_view name) const {
  for (std::size_t i = 0; i < chains_.size(); ++i) {
    if (chains_[i].name == name) return i;
  }
  return std::nullopt;
}

Index Model::latent_width(const std::vector<std::size_t>& chains) const {
  Index n = 0;
  for (auto i : chains) n += chains_.at(i).dim;
  return n;
}

Vector GaussianNoise::next(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist_(rng_);
  return v;
}

Vector ReplayNoise::next(Index n) {
  if (draws_.empty()) throw Error("ReplayNoise: no recorded draws");
  const Vector& v = draws_[cursor_ % draws_.size()];
  ++cursor_;
  if (v.rows() != n) {
    throw DimensionError("ReplayNoise: recorded draw has length " + std::to_string(v.rows()) +
                         ", requested " + std::to_string(n));
  }
  return v;
}

void validate_dialogue(const Model& model, const Dialogue& dialogue) {
  const ModelConfig& c = model.config();
  if (dialogue.turns.empty()) {
    throw ValidationError("dialogue " + dialogue.id + ": no turns");
  }
  for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
    const Turn& turn = dialogue.turns[t];
    const std::string where = "dialogue " + dialogue.id + " turn " + std::to_string(t);
    if (turn.u.rows() != c.u_dim) {
      throw DimensionError(where + ": u has length " + std::to_string(turn.u.rows()) +
                           ", model expects " + std::to_string(c.u_dim));
    }
    if (c.topic == TopicSource::external && turn.f_raw.rows() != c.f_raw_dim) {
      throw DimensionError(where + ": f_raw has length " + std::to_string(turn.f_raw.rows()) +
                           ", model expects " + std::to_string(c.f_raw_dim));
    }
    if (turn.label >= c.n_classes) {
      throw ValidationError(where + ": label " + std::to_string(turn.label) + " >= n_classes " +
                            std::to_string(c.n_classes));
    }
  }
}

std::vector<Var> personal_attributes(const Model& model, ParamBinding& bind,
                                     const Dialogue& dialogue) {
  Tape& tape = bind.tape();
  const ModelConfig& c = model.config();
  std::vector<Var> out;
  out.reserve(dialogue.turns.size());
  if (!c.attributes) {
    const Var zero = tape.constant(Matrix::Zero(c.p_dim, 1));
    out.assign(dialogue.turns.size(), zero);
    return out;
  }
  const Var c0 = tape.constant(Matrix::Zero(c.p_dim, 1));
  std::map<std::string, LstmState> state;
  for (const Turn& turn : dialogue.turns) {
    auto it = state.find(turn.speaker);
    if (it == state.end()) {
      it = state.emplace(turn.speaker, LstmState{bind(model.attribute_initial()), c0}).first;
    }
    out.push_back(it->second.h);
    it->second = lstm_step(model.attribute_cell(), bind, it->second, tape.constant(turn.u));
  }
  return out;
}

Var topic_project(const Model& model, ParamBinding& bind, const Vector& f_raw) {
  const ModelConfig& c = model.config();
  if (c.topic != TopicSource::external) {
    throw ValidationError("topic_project: model topic source is " +
                          std::string(to_string(c.topic)));
  }
  if (f_raw.rows() != c.f_raw_dim) {
    throw DimensionError("topic_project: input has length " + std::to_string(f_raw.rows()) +
                         ", expected " + std::to_string(c.f_raw_dim));
  }
  return mlp(model.topic_projection(), bind, bind.tape().constant(f_raw));
}

std::vector<Var> topic_features(const Model& model, ParamBinding& bind, const Dialogue& dialogue) {
  Tape& tape = bind.tape();
  const ModelConfig& c = model.config();
  std::vector<Var> out;
  out.reserve(dialogue.turns.size());
  switch (c.topic) {
    case TopicSource::none: {
      const Var zero = tape.constant(Matrix::Zero(c.f_dim, 1));
      out.assign(dialogue.turns.size(), zero);
      break;
    }
    case TopicSource::external:
    {
      Matrix f(c.f_raw_dim, Index(dialogue.turns.size()));
      for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        const Vector& raw = dialogue.turns[t].f_raw;
        if (raw.rows() != c.f_raw_dim) {
          throw DimensionError("topic_features: f_raw has length " + std::to_string(raw.rows()) +
                               ", expected " + std::to_string(c.f_raw_dim));
        }
        f.col(Index(t)) = raw;
      }
      const Var projected = mlp(model.topic_projection(), bind, tape.constant(std::move(f)));
      for (Index t = 0; t < projected.cols(); ++t) out.push_back(ad::column(projected, t));
      break;
    }
    case TopicSource::recurrent: {
      const Var zero = tape.constant(Matrix::Zero(c.f_dim, 1));
      LstmState st{zero, zero};
      for (const Turn& turn : dialogue.turns) {
        st = lstm_step(model.topic_encoder(), bind, st, tape.constant(turn.u));
        out.push_back(st.h);
      }
      break;
    }
  }
  return out;
}

namespace {

void require_latents(const Model& model, const std::vector<Var>& latents, const char* what) {
  if (latents.size() != model.chains().size()) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(model.chains().size()) +
                         " latent chains, got " + std::to_string(latents.size()));
  }
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].rows() != model.chains()[i].dim || latents[i].cols() != 1) {
      throw DimensionError(std::string(what) + ": chain " + model.chains()[i].name + " has shape " +
                           shape_string(latents[i].value()) + ", expected [" +
                           std::to_string(model.chains()[i].dim) + "x1]");
    }
  }
}

Var gather(const std::vector<Var>& latents, const std::vector<std::size_t>& which) {
  if (which.size() == 1) return latents[which.front()];
  std::vector<Var> parts;
  parts.reserve(which.size());
  for (auto i : which) parts.push_back(latents[i]);
  return ad::concat(parts);
}

}  // namespace

std::vector<GaussianDiag> prior_step(const Model& model, ParamBinding& bind,
                                     const std::vector<Var>& previous, const Var& attributes) {
  require_latents(model, previous, "prior_step");
  std::vector<GaussianDiag> out;
  out.reserve(previous.size());
  for (std::size_t i = 0; i < previous.size(); ++i) {
    const LatentChain& chain = model.chains()[i];
    const Var g = gru_step(chain.prior_cell, bind, previous[i], attributes);
    out.push_back(gaussian_head(chain.prior_head, bind, g));
  }
  return out;
}

std::vector<GaussianDiag> posterior_step(const Model& model, ParamBinding& bind,
                                         const std::vector<Var>& previous, const Var& utterance,
                                         const Var& topic, const Var& attributes) {
  require_latents(model, previous, "posterior_step");
  std::vector<GaussianDiag> out;
  out.reserve(previous.size());
  for (const LatentChain& chain : model.chains()) {
    const Var& prev = previous[chain.posterior_source];
    const Var input = chain.sees_topic ? ad::concat<double>({prev, utterance, topic, attributes})
                                       : ad::concat<double>({prev, utterance, attributes});
    const Var unit = dense(chain.posterior_unit, bind, input);
    out.push_back(gaussian_head(chain.posterior_head, bind, unit));
  }
  return out;
}

Reconstruction generate(const Model& model, ParamBinding& bind, const std::vector<Var>& samples) {
  require_latents(model, samples, "generate");
  return {mlp(model.utterance_decoder(), bind, gather(samples, model.utterance_inputs())),
          mlp(model.topic_decoder(), bind, gather(samples, model.topic_inputs()))};
}

Var classify(const Model& model, ParamBinding& bind, const std::vector<Var>& samples) {
  require_latents(model, samples, "classify");
  return mlp(model.posterior_classifier(), bind, gather(samples, model.classifier_inputs()));
}

std::vector<Var> initial_latents(const Model& model, ParamBinding& bind) {
  std::vector<Var> out;
  for (const auto& chain : model.chains()) out.push_back(bind(chain.initial));
  return out;
}

DialogueTrace forward_dialogue(const Model& model, ParamBinding& bind, const Dialogue& dialogue,
                               NoiseSource& noise) {
  validate_dialogue(model, dialogue);
  Tape& tape = bind.tape();
  const std::vector<Var> attributes = personal_attributes(model, bind, dialogue);
  const std::vector<Var> topics = topic_features(model, bind, dialogue);

  DialogueTrace trace;
  trace.steps.reserve(dialogue.turns.size());
  std::vector<Var> previous = initial_latents(model, bind);
  for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
    StepTrace step;
    step.attributes = attributes[t];
    step.topic = topics[t];
    step.utterance = tape.constant(dialogue.turns[t].u);
    const auto priors = prior_step(model, bind, previous, step.attributes);
    const auto posteriors =
        posterior_step(model, bind, previous, step.utterance, step.topic, step.attributes);
    std::vector<Var> samples;
    for (std::size_t i = 0; i < model.chains().size(); ++i) {
      const Var sample = ad::reparam_sample(posteriors[i], noise.next(model.chains()[i].dim));
      samples.push_back(sample);
      step.latents.push_back({priors[i], posteriors[i], sample});
    }
    const Reconstruction recon = generate(model, bind, samples);
    step.recon_utterance = recon.utterance;
    step.recon_topic = recon.topic;
    step.logits = classify(model, bind, samples);
    trace.steps.push_back(std::move(step));
    previous = std::move(samples);
  }
  return trace;
}

}  // namespace dcdm
