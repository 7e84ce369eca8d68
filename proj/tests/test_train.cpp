#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dcdm/synthetic.hpp"
#include "dcdm/train.hpp"
#include "model_fixtures.hpp"

using namespace dcdm;
using namespace dcdm::testing;

namespace {

SyntheticCorpus small_corpus() {
  SyntheticConfig s;
  s.f_raw_dim = 16;
  s.n_train = 24;
  s.n_test = 8;
  s.turns = 6;
  return make_corpus(s, 3);
}

ModelConfig small_model(const SyntheticConfig& s) {
  ModelConfig c;
  c.u_dim = s.u_dim;
  c.f_raw_dim = s.f_raw_dim;
  c.n_classes = s.n_classes;
  c.topic_hidden = 16;
  c.f_dim = 8;
  c.gen_hidden = 16;
  c.cls_hidden = 16;
  return c;
}

double mean_recon_u(const Model& model, const std::vector<Dialogue>& ds) {
  double total = 0.0;
  int turns = 0;
  for (const auto& d : ds) {
    Tape tape;
    ParamBinding bind(tape, model.parameters());
    ZeroNoise noise;
    const DialogueTrace trace = forward_dialogue(model, bind, d, noise);
    total += total_loss(model, trace, d, {}).breakdown.recon_u;
    turns += int(d.turns.size());
  }
  return total / turns;
}

}  // namespace

TEST_CASE("options are validated") {
  TrainOptions o;
  CHECK_NOTHROW(o.validate());
  o.batch_size = 0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
  o = TrainOptions{};
  o.adam.lr = -1.0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
}

TEST_CASE("batch gradient is the mean of single-dialogue gradients") {
  std::mt19937_64 rng(6);
  const ModelConfig c = toy_config();
  Model model(c);
  model.parameters().initialize(6);
  const Dialogue a = random_dialogue(rng, c, 3, "a"), b = random_dialogue(rng, c, 5, "b");
  const auto both = batch_gradient(model, {&a, &b}, {1, 2}, {});
  const auto ga = batch_gradient(model, {&a}, {1}, {});
  const auto gb = batch_gradient(model, {&b}, {2}, {});
  for (std::size_t i = 0; i < both.size(); ++i) {
    CHECK((both[i] - 0.5 * (ga[i] + gb[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(batch_gradient(model, {&a}, {1, 2}, {}), DimensionError);
  CHECK_THROWS_AS(batch_gradient(model, {}, {}, {}), ValidationError);
}

TEST_CASE("same seed, same log; different seed, different log") {
  const SyntheticCorpus corpus = small_corpus();
  const auto train = dialogues_of(corpus.train), test = dialogues_of(corpus.test);
  const ModelConfig c = small_model(corpus.spec.config);
  TrainOptions o;
  o.epochs = 3;
  o.seed = 21;
  auto run = [&](TrainOptions opt) {
    Trainer t(c, opt);
    std::string log;
    for (const auto& r : t.fit(train, test)) log += r.to_json() + "\n";
    return log;
  };
  const std::string first = run(o);
  CHECK(run(o) == first);
  o.seed = 22;
  CHECK(run(o) != first);
}

TEST_CASE("training lowers the loss and the reconstruction error") {
  const SyntheticCorpus corpus = small_corpus();
  const auto train = dialogues_of(corpus.train), test = dialogues_of(corpus.test);
  const ModelConfig c = small_model(corpus.spec.config);
  TrainOptions o;
  o.epochs = 25;
  o.seed = 5;
  Trainer t(c, o);
  const double before = mean_recon_u(t.model(), test);
  int callbacks = 0;
  const auto log = t.fit(train, test, [&](const EpochRecord& r, const Trainer& tr) {
    ++callbacks;
    CHECK(tr.epoch() == r.epoch);
  });
  REQUIRE(log.size() == 25);
  CHECK(callbacks == 25);
  CHECK(log.back().total < log.front().total);
  for (const auto& r : log) {
    for (double k : r.kl) CHECK(k >= 0.0);
    CHECK(std::isfinite(r.val_weighted_f1));
  }
  CHECK(mean_recon_u(t.model(), test) < before);
  CHECK(t.epoch() == 25);
  CHECK(t.fit(train, test).empty());

  const Model best = t.best_model();
  CHECK(best.config() == c);
}

TEST_CASE("without validation data the latest parameters are kept") {
  const SyntheticCorpus corpus = small_corpus();
  const ModelConfig c = small_model(corpus.spec.config);
  TrainOptions o;
  o.epochs = 2;
  Trainer t(c, o);
  const auto log = t.fit(dialogues_of(corpus.train), {});
  CHECK(std::isnan(log.back().val_weighted_f1));
  CHECK(log.back().to_json().find("\"val_weighted_f1\":null") != std::string::npos);
  CHECK(t.best_model().parameters().values() == t.model().parameters().values());
}
