#include "dcdm/synthetic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "dcdm/errors.hpp"

namespace dcdm {

namespace {

Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

Vector noise(std::mt19937_64& rng, Index n, double scale) { return gaussian(rng, n, 1, scale); }

// Resamples until the matrix has full row rank. Gaussian matrices almost
// surely do, so this loops once in practice.
Matrix full_row_rank(std::mt19937_64& rng, Index rows, Index cols) {
  for (;;) {
    Matrix m = gaussian(rng, rows, cols, 1.0 / std::sqrt(double(cols)));
    if (Eigen::FullPivLU<Matrix>(m).rank() == rows) return m;
  }
}

void require_dim(Index value, const char* name) {
  if (value < 1) throw ValidationError(std::string("synthetic config: ") + name + " must be >= 1");
}

std::string subset_name(const std::vector<std::size_t>& chains) {
  static const char* names[] = {"s", "v", "z"};
  std::string out;
  for (std::size_t c : chains) {
    if (!out.empty()) out += ",";
    out += names[c];
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  require_dim(s_dim, "s_dim");
  require_dim(v_dim, "v_dim");
  require_dim(z_dim, "z_dim");
  require_dim(p_dim, "p_dim");
  require_dim(u_dim, "u_dim");
  require_dim(f_dim, "f_dim");
  require_dim(f_raw_dim, "f_raw_dim");
  require_dim(turns, "turns");
  if (n_classes < 2) throw ValidationError("synthetic config: n_classes must be >= 2");
  if (u_dim > s_dim + v_dim + z_dim) {
    throw ValidationError("synthetic config: u_dim exceeds s_dim + v_dim + z_dim, C cannot have full row rank");
  }
  if (f_dim > v_dim) throw ValidationError("synthetic config: f_dim exceeds v_dim, D cannot have full row rank");
  if (n_classes > s_dim + v_dim) {
    throw ValidationError("synthetic config: n_classes exceeds s_dim + v_dim, G cannot have full row rank");
  }
  if (f_raw_dim < f_dim) throw ValidationError("synthetic config: f_raw_dim smaller than f_dim");
  if (!(radius > 0.0 && radius < 0.95)) throw ValidationError("synthetic config: radius must be in (0, 0.95)");
  if (!(persistence >= 0.0 && persistence <= 1.0)) {
    throw ValidationError("synthetic config: persistence must be in [0, 1]");
  }
  if (latent_noise < 0.0 || emission_noise < 0.0 || z_noise < 0.0 || z_attribute_gain < 0.0) {
    throw ValidationError("synthetic config: negative noise scale");
  }
  if (!(emission_scale > 0.0)) throw ValidationError("synthetic config: emission_scale must be > 0");
  if (n_speakers < 1) throw ValidationError("synthetic config: n_speakers must be >= 1");
  if (n_train < 0 || n_test < 0) throw ValidationError("synthetic config: negative corpus size");
}

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SyntheticSpec sample_spec(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  SyntheticSpec spec;
  spec.config = config;
  spec.seed = seed;
  const std::array<Index, 3> dims{config.s_dim, config.v_dim, config.z_dim};
  for (std::size_t a = 0; a < 3; ++a) {
    Matrix A = gaussian(rng, dims[a], dims[a], 1.0 / std::sqrt(double(dims[a])));
    const double r = spectral_radius(A);
    if (r > 0.0) A *= config.radius / r;
    spec.transition[a] = A;
    spec.input[a] = gaussian(rng, dims[a], config.p_dim, 1.0 / std::sqrt(double(config.p_dim)));
    if (a == 2) spec.input[a] *= config.z_attribute_gain;
  }
  spec.emit_u = config.emission_scale *
                full_row_rank(rng, config.u_dim, config.s_dim + config.v_dim + config.z_dim);
  spec.emit_f = full_row_rank(rng, config.f_dim, config.v_dim);
  spec.emit_label = full_row_rank(rng, config.n_classes, config.s_dim + config.v_dim);
  const Matrix basis = gaussian(rng, config.f_raw_dim, config.f_dim, 1.0);
  Eigen::HouseholderQR<Matrix> qr(basis);
  spec.embed_f = qr.householderQ() * Matrix::Identity(config.f_raw_dim, config.f_dim);
  return spec;
}

LatentState advance(const SyntheticSpec& spec, const LatentState& previous, const Vector& attributes,
                    std::mt19937_64& rng) {
  const double sd = spec.config.latent_noise;
  LatentState next;
  next.s = spec.transition[0] * previous.s + spec.input[0] * attributes + noise(rng, spec.config.s_dim, sd);
  next.v = spec.transition[1] * previous.v + spec.input[1] * attributes + noise(rng, spec.config.v_dim, sd);
  next.z = spec.transition[2] * previous.z + spec.input[2] * attributes +
           noise(rng, spec.config.z_dim, spec.config.z_noise);
  return next;
}

int label_from_latents(const SyntheticSpec& spec, const Vector& s, const Vector& v) {
  Vector sv(s.size() + v.size());
  sv << s, v;
  const Vector scores = spec.emit_label * sv;
  Index best = 0;
  for (Index k = 1; k < scores.size(); ++k) {
    if (scores(k) > scores(best)) best = k;
  }
  return static_cast<int>(best);
}

LabeledLatents generate_dialogue(const SyntheticSpec& spec, int turns, std::mt19937_64& rng,
                                 const std::string& id) {
  if (turns < 1) throw ValidationError("generate_dialogue: turns must be >= 1");
  const SyntheticConfig& c = spec.config;
  std::vector<Vector> traits;
  for (int i = 0; i < c.n_speakers; ++i) traits.push_back(noise(rng, c.p_dim, 1.0));
  const double fresh = std::sqrt(1.0 - c.persistence * c.persistence);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> other(1, std::max(1, c.n_speakers - 1));

  LabeledLatents out;
  out.dialogue.id = id;
  LatentState state{Vector::Zero(c.s_dim), Vector::Zero(c.v_dim), Vector::Zero(c.z_dim)};
  int speaker = 0;
  for (int t = 0; t < turns; ++t) {
    if (t > 0 && c.n_speakers > 1 && coin(rng) < 0.7) speaker = (speaker + other(rng)) % c.n_speakers;
    const Vector p = c.persistence * traits[speaker] + fresh * noise(rng, c.p_dim, 1.0);
    state = advance(spec, state, p, rng);

    Vector all(c.s_dim + c.v_dim + c.z_dim);
    all << state.s, state.v, state.z;
    Turn turn;
    turn.speaker = std::string(1, char('A' + speaker));
    turn.u = spec.emit_u * all + noise(rng, c.u_dim, c.emission_noise);
    turn.f_raw = spec.embed_f * (spec.emit_f * state.v + noise(rng, c.f_dim, c.emission_noise));
    turn.label = label_from_latents(spec, state.s, state.v);
    out.dialogue.turns.push_back(std::move(turn));
    out.s.push_back(state.s);
    out.v.push_back(state.v);
    out.z.push_back(state.z);
    out.p.push_back(p);
  }
  return out;
}

std::vector<LabeledLatents> generate_corpus(const SyntheticSpec& spec, int count, int turns,
                                            std::uint64_t seed, const std::string& prefix) {
  std::vector<LabeledLatents> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(i)};
    std::mt19937_64 rng(seq);
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04d", prefix.c_str(), i);
    out.push_back(generate_dialogue(spec, turns, rng, id));
    out.back().dialogue.split = prefix;
  }
  return out;
}

SyntheticCorpus make_corpus(const SyntheticConfig& config, std::uint64_t seed) {
  SyntheticCorpus corpus;
  corpus.spec = sample_spec(config, seed);
  corpus.train = generate_corpus(corpus.spec, config.n_train, config.turns, seed + 1, "train");
  corpus.test = generate_corpus(corpus.spec, config.n_test, config.turns, seed + 2, "test");
  return corpus;
}

std::vector<Dialogue> dialogues_of(const std::vector<LabeledLatents>& items) {
  std::vector<Dialogue> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.dialogue);
  return out;
}

double probe(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
             const std::vector<int>& test_y, int n_classes, const ProbeOptions& options) {
  const Index n = train_x.rows(), d = train_x.cols();
  if (n != Index(train_y.size()) || test_x.rows() != Index(test_y.size())) {
    throw DimensionError("probe: feature rows and label counts differ");
  }
  if (test_x.cols() != d) throw DimensionError("probe: train and test feature widths differ");
  if (test_y.empty()) throw ValidationError("probe: no test rows");
  std::vector<int> seen;
  for (int y : train_y) {
    if (y < 0 || y >= n_classes) throw ValidationError("probe: label out of range");
    if (std::find(seen.begin(), seen.end(), y) == seen.end()) seen.push_back(y);
  }
  if (seen.size() < 2) throw ValidationError("probe: training labels contain a single class");

  const Eigen::RowVectorXd mean = train_x.colwise().mean();
  Eigen::RowVectorXd sd = ((train_x.rowwise() - mean).array().square().colwise().sum() / double(n)).sqrt();
  for (Index j = 0; j < d; ++j) {
    if (sd(j) < 1e-12) sd(j) = 1.0;
  }
  auto standardize = [&](const Matrix& x) {
    Matrix out(x.rows(), d + 1);
    out.leftCols(d) = ((x.rowwise() - mean).array().rowwise() / sd.array()).matrix();
    out.col(d).setOnes();
    return out;
  };
  const Matrix X = standardize(train_x);
  Matrix Y = Matrix::Zero(n, n_classes);
  for (Index i = 0; i < n; ++i) Y(i, train_y[i]) = 1.0;

  Matrix W = Matrix::Zero(d + 1, n_classes);
  for (int it = 0; it < options.iterations; ++it) {
    Matrix scores = X * W;
    for (Index i = 0; i < n; ++i) {
      const double m = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - m).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    Matrix grad = X.transpose() * (scores - Y) / double(n);
    grad.topRows(d) += options.l2 * W.topRows(d);
    W -= options.learning_rate * grad;
  }

  const Matrix scores = standardize(test_x) * W;
  Index correct = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < n_classes; ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    if (best == test_y[i]) ++correct;
  }
  return double(correct) / double(scores.rows());
}

Matrix posterior_means(const Model& model, const std::vector<Dialogue>& dialogues,
                       const std::vector<std::size_t>& chains) {
  Index width = 0;
  for (std::size_t c : chains) {
    if (c >= model.chains().size()) throw ValidationError("posterior_means: no such latent chain");
    width += model.chains()[c].dim;
  }
  Index rows = 0;
  for (const auto& d : dialogues) rows += Index(d.turns.size());
  Matrix out(rows, width);
  Index r = 0;
  for (const auto& d : dialogues) {
    Tape tape;
    ParamBinding bind(tape, model.parameters(), false);
    ZeroNoise zero;
    const DialogueTrace trace = forward_dialogue(model, bind, d, zero);
    for (const auto& step : trace.steps) {
      Index col = 0;
      for (std::size_t c : chains) {
        const Matrix& m = step.latents[c].posterior.mean.value();
        out.block(r, col, 1, m.rows()) = m.transpose();
        col += m.rows();
      }
      ++r;
    }
  }
  return out;
}

Matrix true_latents(const std::vector<LabeledLatents>& items, const std::vector<std::size_t>& chains) {
  if (items.empty()) return Matrix(0, 0);
  const LabeledLatents& first = items.front();
  Index width = 0;
  const std::vector<Vector> LabeledLatents::*members[] = {&LabeledLatents::s, &LabeledLatents::v,
                                                          &LabeledLatents::z};
  for (std::size_t c : chains) {
    if (c > 2) throw ValidationError("true_latents: no such latent chain");
    width += (first.*members[c]).front().size();
  }
  Index rows = 0;
  for (const auto& item : items) rows += Index(item.s.size());
  Matrix out(rows, width);
  Index r = 0;
  for (const auto& item : items) {
    for (std::size_t t = 0; t < item.s.size(); ++t, ++r) {
      Index col = 0;
      for (std::size_t c : chains) {
        const Vector& x = (item.*members[c])[t];
        out.block(r, col, 1, x.size()) = x.transpose();
        col += x.size();
      }
    }
  }
  return out;
}

std::vector<int> labels_of(const std::vector<Dialogue>& dialogues) {
  std::vector<int> out;
  for (const auto& d : dialogues) {
    for (const auto& turn : d.turns) out.push_back(turn.label);
  }
  return out;
}

const ProbeRow& DisentanglementReport::row(const std::string& subset) const {
  for (const auto& r : rows) {
    if (r.subset == subset) return r;
  }
  throw ValidationError("disentanglement report: no row '" + subset + "'");
}

const std::vector<std::vector<std::size_t>>& probe_subsets() {
  static const std::vector<std::vector<std::size_t>> subsets{{2}, {1}, {0}, {0, 2}, {1, 2}, {0, 1}};
  return subsets;
}

double chance_rate(const std::vector<int>& labels, int n_classes) {
  if (labels.empty()) return 0.0;
  std::vector<int> counts(n_classes, 0);
  for (int y : labels) ++counts.at(y);
  return double(*std::max_element(counts.begin(), counts.end())) / double(labels.size());
}

std::vector<ProbeRow> learned_probe_rows(const Model& model, const std::vector<Dialogue>& train,
                                         const std::vector<Dialogue>& test, const ProbeOptions& options) {
  if (!model.config().disentangle) {
    throw ValidationError("latent probes: model has a single undivided latent");
  }
  const std::vector<int> train_y = labels_of(train), test_y = labels_of(test);
  const int k = static_cast<int>(model.config().n_classes);
  std::vector<ProbeRow> rows;
  for (const auto& chains : probe_subsets()) {
    ProbeRow row;
    row.subset = subset_name(chains);
    row.chains = chains;
    row.learned = probe(posterior_means(model, train, chains), train_y, posterior_means(model, test, chains), test_y,
                        k, options);
    rows.push_back(std::move(row));
  }
  return rows;
}

DisentanglementReport disentanglement_report(const Model& model,
                                             const std::vector<LabeledLatents>& train,
                                             const std::vector<LabeledLatents>& test,
                                             const ProbeOptions& options) {
  const std::vector<Dialogue> train_d = dialogues_of(train), test_d = dialogues_of(test);
  const std::vector<int> train_y = labels_of(train_d), test_y = labels_of(test_d);
  const int k = static_cast<int>(model.config().n_classes);
  DisentanglementReport report;
  report.chance = chance_rate(test_y, k);
  report.rows = learned_probe_rows(model, train_d, test_d, options);
  for (auto& row : report.rows) {
    row.truth = probe(true_latents(train, row.chains), train_y, true_latents(test, row.chains), test_y, k, options);
  }
  return report;
}

}  // namespace dcdm
