#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dcdm/numerics/adam.hpp"
#include "dcdm/numerics/gaussian.hpp"
#include "test_support.hpp"

using namespace dcdm;
using dcdm::testing::check_tape_fn;
using dcdm::testing::random_matrix;
using T = ad::Tape<double>;
using V = ad::Var<double>;

namespace {

Matrix col(std::initializer_list<double> xs) {
  Matrix m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("affine: identity and scalar cases") {
  T tape;
  auto y = ad::affine(tape.constant(col({1, 2})), tape.constant(Matrix::Identity(2, 2)),
                      tape.constant(col({0, 0})));
  CHECK(y.value() == col({1, 2}));

  Matrix w(1, 1);
  w << 2;
  auto z = ad::affine(tape.constant(col({1})), tape.constant(w), tape.constant(col({3})));
  CHECK(z.scalar() == 5.0);
}

TEST_CASE("affine: matches a triple-loop product") {
  std::mt19937_64 rng(1);
  const Matrix w = random_matrix(rng, 3, 4);
  const Matrix x = random_matrix(rng, 4, 1);
  const Matrix b = random_matrix(rng, 3, 1);
  T tape;
  auto y = ad::affine(tape.constant(x), tape.constant(w), tape.constant(b));
  for (Index i = 0; i < 3; ++i) {
    double acc = b(i, 0);
    for (Index j = 0; j < 4; ++j) acc += w(i, j) * x(j, 0);
    CHECK(std::abs(y.value()(i, 0) - acc) < 1e-12);
  }
}

TEST_CASE("affine: several columns equal column-wise calls") {
  std::mt19937_64 rng(2);
  const Matrix w = random_matrix(rng, 3, 5), x = random_matrix(rng, 5, 4), b = random_matrix(rng, 3, 1);
  T tape;
  auto y = ad::affine(tape.constant(x), tape.constant(w), tape.constant(b));
  REQUIRE(y.cols() == 4);
  for (Index j = 0; j < 4; ++j) {
    auto yj = ad::affine(tape.constant(Matrix(x.col(j))), tape.constant(w), tape.constant(b));
    CHECK((ad::column(y, j).value() - yj.value()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(ad::column(y, 4), DimensionError);

  auto batched = [](const std::vector<V>& in) {
    const V h = ad::tanh(ad::affine(in[1], in[0], in[2]));
    return ad::cwise_product(ad::column(h, 0), ad::column(h, 2)) + ad::column(h, 3);
  };
  auto report = check_tape_fn(batched, {w, x, b});
  CHECK_MESSAGE(report.passed(), report.summary());
}

TEST_CASE("affine: shape mismatch names both shapes") {
  T tape;
  try {
    ad::affine(tape.constant(Matrix::Zero(3, 1)), tape.constant(Matrix::Zero(2, 2)),
               tape.constant(Matrix::Zero(2, 1)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[3x1]") != std::string::npos);
  }
}

TEST_CASE("activations") {
  T tape;
  CHECK(ad::sigmoid(tape.constant(col({0}))).scalar() == 0.5);
  CHECK(ad::tanh(tape.constant(col({0}))).scalar() == 0.0);
  CHECK(ad::relu(tape.constant(col({-1}))).scalar() == 0.0);
  CHECK(ad::activate(ad::Activation::exp, tape.constant(col({0}))).scalar() == 1.0);

  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(rng, 50, 1, 5.0);
  const Matrix sum = ad::sigmoid(tape.constant(x)).value() + ad::sigmoid(tape.constant(-x)).value();
  CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-15);

  // saturates instead of overflowing
  const auto big = ad::sigmoid(tape.constant(col({-800, 800})));
  CHECK(big.value()(0, 0) == 0.0);
  CHECK(big.value()(1, 0) == 1.0);
  CHECK_THROWS_AS(ad::activate(ad::Activation::tanh, tape.constant(col({NAN}))), NumericError);
}

TEST_CASE("concat and slice") {
  T tape;
  auto c = ad::concat<double>({tape.constant(col({1})), tape.constant(col({2, 3}))});
  CHECK(c.value() == col({1, 2, 3}));
  CHECK_THROWS_AS(ad::concat<double>({tape.constant(Matrix(0, 1)), tape.constant(col({5}))}),
                  DimensionError);
  CHECK_THROWS_AS(ad::concat<double>({}), DimensionError);

  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(rng, 3, 1), b = random_matrix(rng, 4, 1);
  auto ab = ad::concat<double>({tape.constant(a), tape.constant(b)});
  CHECK(ad::slice(ab, 0, 3).value() == a);
  CHECK(ad::slice(ab, 3, 4).value() == b);
}

TEST_CASE("reparam_sample") {
  T tape;
  ad::GaussianDiag<double> g{tape.constant(col({1, -2})), tape.constant(col({0.3, -1}))};
  CHECK(ad::reparam_sample(g, Vector::Zero(2)).value() == g.mean.value());

  ad::GaussianDiag<double> unit{tape.constant(col({1, -2})), tape.constant(col({0, 0}))};
  CHECK(ad::reparam_sample(unit, Vector::Ones(2)).value() == col({2, -1}));
  CHECK_THROWS_AS(ad::reparam_sample(unit, Vector::Ones(3)), DimensionError);
}

TEST_CASE("reparam_sample: Monte-Carlo mean") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const int n = 100000;
  T tape;
  ad::GaussianDiag<double> g{tape.constant(col({0.7})), tape.constant(col({std::log(2.0)}))};
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector eps(1);
    eps << normal(rng);
    T local;
    ad::GaussianDiag<double> gl{local.constant(g.mean.value()), local.constant(g.logvar.value())};
    acc += ad::reparam_sample(gl, eps).scalar();
  }
  const double sigma = std::sqrt(2.0);
  CHECK(std::abs(acc / n - 0.7) < 3.0 * sigma / std::sqrt(double(n)));
}

TEST_CASE("kl_diag: closed form against Monte-Carlo") {
  T tape;
  ad::GaussianDiag<double> std_normal{tape.constant(Matrix::Zero(3, 1)),
                                      tape.constant(Matrix::Zero(3, 1))};
  CHECK(ad::kl_diag(std_normal, std_normal).scalar() == 0.0);

  ad::GaussianDiag<double> q{tape.constant(col({1})), tape.constant(col({0}))};
  ad::GaussianDiag<double> p{tape.constant(col({0})), tape.constant(col({0}))};
  CHECK(std::abs(ad::kl_diag(q, p).scalar() - 0.5) < 1e-15);

  // E_q[log q(x) - log p(x)] estimated by sampling, for a 2-d case with
  // different variances.
  const Matrix qm = col({0.3, -0.5}), qlv = col({-0.4, 0.6});
  const Matrix pm = col({-0.2, 0.1}), plv = col({0.2, -0.3});
  ad::GaussianDiag<double> q2{tape.constant(qm), tape.constant(qlv)};
  ad::GaussianDiag<double> p2{tape.constant(pm), tape.constant(plv)};
  const double closed = ad::kl_diag(q2, p2).scalar();

  auto logpdf = [](const Matrix& x, const Matrix& m, const Matrix& lv) {
    double s = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
      const double var = std::exp(lv(i, 0));
      s += -0.5 * (std::log(2 * M_PI) + lv(i, 0) + (x(i, 0) - m(i, 0)) * (x(i, 0) - m(i, 0)) / var);
    }
    return s;
  };
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    Matrix x(2, 1);
    for (Index i = 0; i < 2; ++i) x(i, 0) = qm(i, 0) + std::exp(0.5 * qlv(i, 0)) * normal(rng);
    const double d = logpdf(x, qm, qlv) - logpdf(x, pm, plv);
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std::abs(mean - closed) < 4.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("kl_diag: non-negative on random pairs, zero on equal inputs") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 1000; ++k) {
    T tape;
    const Matrix m = random_matrix(rng, 4, 1), lv = random_matrix(rng, 4, 1);
    ad::GaussianDiag<double> q{tape.constant(m), tape.constant(lv)};
    ad::GaussianDiag<double> p{tape.constant(random_matrix(rng, 4, 1)),
                               tape.constant(random_matrix(rng, 4, 1))};
    CHECK(ad::kl_diag(q, p).scalar() >= 0.0);
    ad::GaussianDiag<double> q_copy{tape.constant(m), tape.constant(lv)};
    CHECK(std::abs(ad::kl_diag(q, q_copy).scalar()) < 1e-12);
  }
  T tape;
  ad::GaussianDiag<double> a{tape.constant(Matrix::Zero(2, 1)), tape.constant(Matrix::Zero(2, 1))};
  ad::GaussianDiag<double> b{tape.constant(Matrix::Zero(3, 1)), tape.constant(Matrix::Zero(3, 1))};
  CHECK_THROWS_AS(ad::kl_diag(a, b), DimensionError);
}

TEST_CASE("softmax_cross_entropy") {
  T tape;
  CHECK(std::abs(ad::softmax_cross_entropy(tape.constant(Matrix::Constant(5, 1, 0.3)), 2).scalar() -
                 std::log(5.0)) < 1e-15);
  CHECK(ad::softmax_cross_entropy(tape.constant(col({30, -30})), 0).scalar() < 1e-20);
  CHECK_THROWS_AS(ad::softmax_cross_entropy(tape.constant(col({1, 2})), 2), ValidationError);

  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const Matrix z = random_matrix(rng, 6, 1, 2.0);
    const Index label = k % 6;
    double denom = 0.0;
    for (Index i = 0; i < 6; ++i) denom += std::exp(z(i, 0));
    const double naive = -std::log(std::exp(z(label, 0)) / denom);
    const double ce = ad::softmax_cross_entropy(tape.constant(z), label).scalar();
    CHECK(std::abs(ce - naive) < 1e-10);
    CHECK(ce >= 0.0);
    CHECK(std::abs(ad::softmax<double>(z).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("backward: basic cases") {
  T tape;
  auto x = tape.variable(col({3}));
  auto y = ad::cwise_product(x, x);
  tape.backward(y);
  CHECK(tape.grad(x)(0, 0) == 6.0);

  // a variable that never reaches the loss gets a zero gradient
  T t2;
  auto a = t2.variable(col({1, 2}));
  auto unused = t2.variable(col({4, 5, 6}));
  t2.backward(ad::sum(a));
  CHECK(t2.grad(unused) == Matrix::Zero(3, 1));

  CHECK_THROWS_AS(t2.backward(a), DimensionError);
}

TEST_CASE("backward: non-finite loss is rejected") {
  T tape;
  auto x = tape.variable(col({std::numeric_limits<double>::infinity()}));
  CHECK_THROWS_AS(tape.backward(ad::sum(x)), NumericError);
}

TEST_CASE("finite differences: every composite operation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 2 + trial, m = 3 + trial % 2;
    const Matrix w = random_matrix(rng, m, n), x = random_matrix(rng, n, 1),
                 b = random_matrix(rng, m, 1);
    auto chain = [](const std::vector<V>& in) {
      const V h = ad::tanh(ad::affine(in[1], in[0], in[2]));
      const V s = ad::sigmoid(h);
      return ad::cwise_product(s, ad::one_minus(h)) + ad::scale(ad::relu(h), 0.3);
    };
    auto report = check_tape_fn(chain, {w, x, b});
    CHECK_MESSAGE(report.passed(), report.summary());

    auto cat = [](const std::vector<V>& in) {
      return ad::slice(ad::exp(ad::concat<double>({in[0], in[1]})), 1, 3);
    };
    report = check_tape_fn(cat, {x, b});
    CHECK_MESSAGE(report.passed(), report.summary());

    auto eps_rng = rng;
    auto frozen = [&](const std::vector<V>& in) {
      auto r = eps_rng;  // identical noise on every evaluation
      ad::GaussianDiag<double> q{in[0], in[1]}, p{in[2], in[3]};
      const V sample = ad::reparam_sample(q, Vector(random_matrix(r, n, 1)));
      return ad::kl_diag(q, p) + ad::half_squared_distance(sample, in[2]);
    };
    report = check_tape_fn(frozen, {random_matrix(rng, n, 1), random_matrix(rng, n, 1, 0.5),
                                    random_matrix(rng, n, 1), random_matrix(rng, n, 1, 0.5)});
    CHECK_MESSAGE(report.passed(), report.summary());

    auto ce = [](const std::vector<V>& in) {
      return ad::softmax_cross_entropy(ad::affine(in[1], in[0], in[2]), 1);
    };
    report = check_tape_fn(ce, {w, x, b});
    CHECK_MESSAGE(report.passed(), report.summary());

    auto clamped = [](const std::vector<V>& in) { return ad::clamp(in[0], -0.5, 0.5); };
    report = check_tape_fn(clamped, {random_matrix(rng, 6, 1)});
    CHECK_MESSAGE(report.passed(), report.summary());
  }
}

TEST_CASE("tape replay is bitwise deterministic") {
  std::mt19937_64 rng(9);
  const Matrix w = random_matrix(rng, 4, 5), x = random_matrix(rng, 5, 1),
               b = random_matrix(rng, 4, 1);
  auto run = [&]() {
    T tape;
    auto wv = tape.variable(w);
    auto loss = ad::softmax_cross_entropy(ad::tanh(ad::affine(tape.constant(x), wv, tape.constant(b))), 2);
    tape.backward(loss);
    return std::make_pair(loss.scalar(), tape.grad(wv));
  };
  const auto a = run();
  const auto c = run();
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("grad_check: quadratic passes, corrupted partial fails by name") {
  GradObjective<double> quad = [](const std::vector<Matrix>& p, std::vector<Matrix>* g) {
    if (g) *g = {2.0 * p[0], 6.0 * p[1]};
    return p[0].squaredNorm() + 3.0 * p[1].squaredNorm();
  };
  std::mt19937_64 rng(10);
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  auto report = grad_check(quad, {random_matrix(rng, 3, 2), random_matrix(rng, 4, 1)},
                           {"alpha", "beta"}, opt);
  CHECK(report.passed());

  GradObjective<double> corrupted = [&](const std::vector<Matrix>& p, std::vector<Matrix>* g) {
    const double v = quad(p, g);
    if (g) (*g)[1](2, 0) += 0.5;
    return v;
  };
  report = grad_check(corrupted, {random_matrix(rng, 3, 2), random_matrix(rng, 4, 1)},
                      {"alpha", "beta"}, opt);
  CHECK_FALSE(report.passed());
  CHECK(report.entries[0].passed);
  CHECK_FALSE(report.entries[1].passed);
  CHECK(report.summary().find("FAIL beta") != std::string::npos);
}

TEST_CASE("adam_step") {
  // Hand evaluation: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, so the step is
  // lr / (1 + eps).
  std::vector<Matrix> params{Matrix::Zero(1, 1)};
  std::vector<Matrix> grads{Matrix::Ones(1, 1)};
  AdamState<double> state;
  AdamOptions<double> opt;
  CHECK(opt.lr == 0.001);
  CHECK(opt.weight_decay == 0.00005);
  adam_step<double>(params, grads, state, opt);
  CHECK(std::abs(params[0](0, 0) + 0.001 / (1.0 + 1e-8)) < 1e-15);
  CHECK(state.step == 1);

  std::mt19937_64 rng(11);
  std::vector<Matrix> p2{random_matrix(rng, 3, 3)};
  const Matrix before = p2[0];
  std::vector<Matrix> zero{Matrix::Zero(3, 3)};
  AdamState<double> s2;
  AdamOptions<double> no_decay;
  no_decay.weight_decay = 0.0;
  adam_step<double>(p2, zero, s2, no_decay);
  CHECK(p2[0] == before);

  std::vector<Matrix> bad{Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(adam_step<double>(p2, bad, s2, no_decay), DimensionError);
  no_decay.lr = 0.0;
  CHECK_THROWS_AS(adam_step<double>(p2, zero, s2, no_decay), ValidationError);
}

TEST_CASE("adam_step: weight decay acts as an L2 gradient term") {
  std::vector<Matrix> a{Matrix::Constant(2, 1, 3.0)};
  std::vector<Matrix> b{Matrix::Constant(2, 1, 3.0)};
  AdamState<double> sa, sb;
  AdamOptions<double> with_decay;
  with_decay.weight_decay = 0.01;
  AdamOptions<double> explicit_l2;
  explicit_l2.weight_decay = 0.0;
  for (int k = 0; k < 5; ++k) {
    std::vector<Matrix> ga{Matrix::Constant(2, 1, 0.2)};
    std::vector<Matrix> gb{Matrix::Constant(2, 1, 0.2) + 0.01 * b[0]};
    adam_step<double>(a, ga, sa, with_decay);
    adam_step<double>(b, gb, sb, explicit_l2);
  }
  CHECK(a[0] == b[0]);
}

TEST_CASE("tape: value references survive growth") {
  ad::Tape<double> tape;
  const auto a = tape.constant(Matrix::Constant(2, 2, 3.0));
  const Matrix& ref = a.value();
  for (int i = 0; i < 5000; ++i) tape.constant(Matrix::Ones(2, 2));
  CHECK(ref == Matrix::Constant(2, 2, 3.0));
}
