#include "dcdm/parameters.hpp"

#include <cmath>

namespace dcdm {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::prior:
      return "prior";
    case ParamGroup::posterior:
      return "posterior";
    case ParamGroup::generator:
      return "generator";
    case ParamGroup::classifier:
      return "classifier";
    case ParamGroup::attribute:
      return "attribute";
    case ParamGroup::topic:
      return "topic";
    case ParamGroup::initial_state:
      return "initial_state";
  }
  return "unknown";
}

ParamId ParameterSet::add(std::string name, ParamGroup group, Index rows, Index cols,
                          ParamInit init) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("parameter " + name + ": dims must be >= 1");
  }
  if (find(name)) throw ValidationError("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  groups_.push_back(group);
  inits_.push_back(init);
  values_.push_back(Matrix::Zero(rows, cols));
  return ParamId{values_.size() - 1};
}

void ParameterSet::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    Matrix& m = values_[i];
    switch (inits_[i]) {
      case ParamInit::uniform_fan_in: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
        break;
      }
      case ParamInit::zero:
        m.setZero();
        break;
      case ParamInit::lstm_bias: {
        m.setZero();
        const Index hidden = m.rows() / 4;
        m.middleRows(hidden, hidden).setOnes();
        break;
      }
    }
  }
}

std::optional<ParamId> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return ParamId{i};
  }
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (names_ != other.names_ || groups_ != other.groups_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() ||
        values_[i].cols() != other.values_[i].cols() || values_[i] != other.values_[i]) {
      return false;
    }
  }
  return true;
}

ParamBinding::ParamBinding(Tape& tape, const ParameterSet& params, bool track_gradients)
    : tape_(&tape), params_(&params), bound_(params.size()), track_gradients_(track_gradients) {}

Var ParamBinding::operator()(ParamId id) {
  auto& slot = bound_.at(id.index);
  if (!slot) {
    slot = track_gradients_ ? tape_->variable((*params_)[id]) : tape_->constant((*params_)[id]);
  }
  return *slot;
}

std::vector<Matrix> ParamBinding::gradients() const {
  std::vector<Matrix> grads;
  grads.reserve(bound_.size());
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    const Matrix& v = params_->values()[i];
    grads.push_back(bound_[i] ? tape_->grad(*bound_[i]) : Matrix::Zero(v.rows(), v.cols()));
  }
  return grads;
}

}  // namespace dcdm
