#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <sstream>

#include "dcdm/eval.hpp"
#include "model_fixtures.hpp"

using namespace dcdm;
using namespace dcdm::testing;

namespace {

Dialogue labelled(const std::vector<int>& labels) {
  Dialogue d;
  d.id = "d";
  for (int y : labels) d.turns.push_back(Turn{"A", Vector::Zero(1), Vector::Zero(1), y, {}});
  return d;
}

}  // namespace

TEST_CASE("metrics on a hand-computed 2x2 matrix") {
  // truth 0: one right, one wrong; truth 1: two right
  const Metrics m = metrics(ConfusionMatrix::from_rows({{1, 1}, {0, 2}}));
  CHECK(std::abs(m.accuracy - 0.75) < 1e-12);
  // class 0: P = 1, R = 1/2, F1 = 2/3. class 1: P = 2/3, R = 1, F1 = 4/5.
  CHECK(std::abs(m.f1[0] - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(m.f1[1] - 0.8) < 1e-12);
  CHECK(std::abs(m.recall[0] - 0.5) < 1e-12);
  CHECK(std::abs(m.recall[1] - 1.0) < 1e-12);
  CHECK(std::abs(m.weighted_f1 - (2 * (2.0 / 3.0) + 2 * 0.8) / 4) < 1e-12);
}

TEST_CASE("metrics: perfect predictor and zero-support class") {
  const Metrics perfect = metrics(ConfusionMatrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 5}}));
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted_f1 == 1.0);

  // class 2 never occurs and is never predicted
  const Metrics m = metrics(ConfusionMatrix::from_rows({{2, 1, 0}, {1, 2, 0}, {0, 0, 0}}));
  CHECK(m.f1[2] == 0.0);
  CHECK(m.recall[2] == 0.0);
  CHECK(std::abs(m.weighted_f1 - 2.0 / 3.0) < 1e-12);

  // predicted but never true: precision 0, support 0
  const Metrics p = metrics(ConfusionMatrix::from_rows({{1, 1}, {0, 0}}));
  CHECK(p.f1[1] == 0.0);
  CHECK(std::abs(p.weighted_f1 - 2.0 / 3.0) < 1e-12);

  CHECK_THROWS_AS(metrics(ConfusionMatrix(3)), ValidationError);
  CHECK_THROWS_AS(ConfusionMatrix::from_rows({{1, 2}, {3}}), DimensionError);
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.add(2, 0), ValidationError);
}

TEST_CASE("metrics against a brute-force oracle") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> truth, pred;
    ConfusionMatrix cm(5);
    for (int i = 0; i < 60; ++i) {
      truth.push_back(cls(rng));
      pred.push_back(rng() % 3 ? truth.back() : cls(rng));
      cm.add(truth.back(), pred.back());
    }
    const Metrics m = metrics(cm);
    double weighted = 0.0, correct = 0.0;
    for (int k = 0; k < 5; ++k) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        tp += truth[i] == k && pred[i] == k;
        fp += truth[i] != k && pred[i] == k;
        fn += truth[i] == k && pred[i] != k;
      }
      const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
      CHECK(std::abs(m.f1[k] - f1) < 1e-12);
      weighted += f1 * (tp + fn);
      correct += tp;
    }
    CHECK(std::abs(m.weighted_f1 - weighted / 60) < 1e-12);
    CHECK(std::abs(m.accuracy - correct / 60) < 1e-12);
  }
}

TEST_CASE("time batches partition the turn positions") {
  // lengths 3, 7, 12; predictions right on even positions only
  std::vector<Dialogue> ds{labelled(std::vector<int>(3, 1)), labelled(std::vector<int>(7, 1)),
                           labelled(std::vector<int>(12, 1))};
  std::vector<std::vector<int>> pred;
  for (const auto& d : ds) {
    std::vector<int> p;
    for (std::size_t t = 0; t < d.turns.size(); ++t) p.push_back(t % 2 == 0 ? 1 : 0);
    pred.push_back(p);
  }
  const auto acc = time_batch_accuracy(pred, ds, 5, 40);
  REQUIRE(acc.size() == 8);
  // positions 1..5: 3 + 5 + 5 turns, right at 1,3,5 -> 2 + 3 + 3
  CHECK(std::abs(acc[0] - 8.0 / 13.0) < 1e-12);
  // positions 6..10: 2 + 5 turns, right at 7,9 -> 1 + 2
  CHECK(std::abs(acc[1] - 3.0 / 7.0) < 1e-12);
  // positions 11..15: 2 turns, right at 11
  CHECK(std::abs(acc[2] - 0.5) < 1e-12);
  for (std::size_t b = 3; b < 8; ++b) CHECK(std::isnan(acc[b]));

  const auto meld = time_batch_accuracy(pred, ds, 1, 8);
  REQUIRE(meld.size() == 8);
  for (int t = 0; t < 7; ++t) CHECK(meld[t] == (t % 2 == 0 ? 1.0 : 0.0));
  CHECK(meld[7] == 0.0);

  CHECK(time_batch_accuracy(pred, ds, 3, 7).size() == 3);
  CHECK_THROWS_AS(time_batch_accuracy(pred, ds, 0, 8), ValidationError);
}

TEST_CASE("predictions and latents from a model") {
  std::mt19937_64 rng(5);
  const ModelConfig c = toy_config();
  Model model(c);
  model.parameters().initialize(5);
  std::vector<Dialogue> ds;
  for (int i = 0; i < 3; ++i) ds.push_back(random_dialogue(rng, c, 2 + i, "d" + std::to_string(i)));

  const auto pred = predict(model, ds);
  REQUIRE(pred.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pred[i].size() == ds[i].turns.size());
  CHECK(predict(model, ds) == pred);
  const ConfusionMatrix cm = confusion(pred, ds, 3);
  CHECK(cm.total() == 9);

  std::ostringstream first, second;
  export_latents(model, ds, first);
  export_latents(model, ds, second);
  CHECK(first.str() == second.str());
  std::istringstream in(first.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("s0,", 0) == 0);
  CHECK(line.substr(line.rfind(',') + 1) == "label");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == c.s_dim + c.v_dim + c.z_dim);
  }
  CHECK(rows == 9);
}
