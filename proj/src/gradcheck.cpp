#include "dcdm/gradcheck.hpp"

#include <random>

namespace dcdm {

ModelConfig toy_model_config() {
  ModelConfig c;
  c.u_dim = 5;
  c.f_raw_dim = 7;
  c.topic_hidden = 4;
  c.f_dim = 3;
  c.p_dim = 4;
  c.s_dim = 3;
  c.v_dim = 2;
  c.z_dim = 3;
  c.gen_hidden = 4;
  c.cls_hidden = 4;
  c.n_classes = 3;
  return c;
}

GradCheckReport gradcheck_elbo(const ModelConfig& config, const LossWeights& weights, std::uint64_t seed, int turns,
                               const GradCheckOptions& options) {
  Model model(config);
  model.parameters().initialize(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> normal;
  auto gaussian = [&](Index rows, Index cols, double scale) {
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
    return m;
  };
  // zero-initialised tensors (biases, initial states) get a small random
  // offset so that no gradient path is trivially zero
  for (auto& v : model.parameters().values()) v += gaussian(v.rows(), v.cols(), 0.1);

  Dialogue dialogue;
  dialogue.id = "gradcheck";
  std::uniform_int_distribution<int> label(0, int(config.n_classes) - 1);
  for (int t = 0; t < turns; ++t) {
    Turn turn;
    turn.speaker = (t % 3 == 1) ? "B" : "A";
    turn.u = gaussian(config.u_dim, 1, 1.0);
    turn.f_raw = gaussian(config.f_raw_dim, 1, 1.0);
    turn.label = label(rng);
    dialogue.turns.push_back(std::move(turn));
  }
  std::vector<Vector> noise;
  for (int t = 0; t < turns; ++t) {
    for (const auto& chain : model.chains()) noise.push_back(gaussian(chain.dim, 1, 1.0));
  }

  GradObjective<double> objective = [&](const std::vector<Matrix>& values, std::vector<Matrix>* grads) {
    Model local = model;
    local.parameters().values() = values;
    Tape tape;
    ParamBinding bind(tape, local.parameters());
    ReplayNoise replay(noise);
    const DialogueTrace trace = forward_dialogue(local, bind, dialogue, replay);
    const Objective obj = total_loss(local, trace, dialogue, weights);
    if (grads) {
      tape.backward(obj.total);
      *grads = bind.gradients();
    }
    return obj.total.scalar();
  };
  return grad_check(objective, model.parameters().values(), model.parameters().names(), options);
}

}  // namespace dcdm
