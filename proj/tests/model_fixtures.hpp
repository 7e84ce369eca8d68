#pragma once

#include <random>
#include <string>

#include "dcdm/elbo.hpp"
#include "dcdm/numerics/grad_check.hpp"
#include "test_support.hpp"

namespace dcdm::testing {

/// Small dims used by gradient checks and structural tests.
inline ModelConfig toy_config() {
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

inline Dialogue random_dialogue(std::mt19937_64& rng, const ModelConfig& c, int turns,
                                const std::string& id = "d0") {
  Dialogue d;
  d.id = id;
  std::uniform_int_distribution<int> label(0, static_cast<int>(c.n_classes) - 1);
  for (int t = 0; t < turns; ++t) {
    Turn turn;
    turn.speaker = (t % 3 == 1) ? "B" : "A";
    turn.u = random_matrix(rng, c.u_dim, 1);
    turn.f_raw = random_matrix(rng, c.f_raw_dim, 1);
    turn.label = label(rng);
    d.turns.push_back(std::move(turn));
  }
  return d;
}

inline std::vector<Vector> frozen_noise(std::mt19937_64& rng, const Model& model, int turns) {
  std::vector<Vector> draws;
  for (int t = 0; t < turns; ++t) {
    for (const auto& chain : model.chains()) draws.push_back(random_matrix(rng, chain.dim, 1));
  }
  return draws;
}

/// Full single-dialogue objective over every parameter tensor of `model`,
/// with the reparameterization noise frozen.
inline GradObjective<double> elbo_objective(const Model& model, const Dialogue& dialogue,
                                        std::vector<Vector> noise, LossWeights weights = {}) {
  return [&model, &dialogue, noise = std::move(noise), weights](const std::vector<Matrix>& values,
                                                                std::vector<Matrix>* grads) {
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
}

}  // namespace dcdm::testing
