#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dcdm/numerics/tape.hpp"

namespace dcdm {

using Tape = ad::Tape<double>;
using Var = ad::Var<double>;

/// Disjoint groups every learnable tensor belongs to.
enum class ParamGroup { prior, posterior, generator, classifier, attribute, topic, initial_state };

std::string_view to_string(ParamGroup group);

enum class ParamInit {
  uniform_fan_in,  // U(-1/sqrt(cols), 1/sqrt(cols))
  zero,
  lstm_bias,       // zero except the forget-gate block, which is 1
};

struct ParamId {
  std::size_t index = 0;
  bool operator==(const ParamId&) const = default;
};

/// Named, grouped parameter tensors. Values are stored contiguously so the
/// optimizer can work on them as one span.
class ParameterSet {
 public:
  ParamId add(std::string name, ParamGroup group, Index rows, Index cols,
              ParamInit init = ParamInit::uniform_fan_in);

  void initialize(std::uint64_t seed);

  Matrix& operator[](ParamId id) { return values_[id.index]; }
  const Matrix& operator[](ParamId id) const { return values_[id.index]; }

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  ParamGroup group(std::size_t i) const { return groups_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<ParamId> find(std::string_view name) const;
  std::size_t scalar_count() const;

  std::vector<Matrix>& values() { return values_; }
  const std::vector<Matrix>& values() const { return values_; }

  bool operator==(const ParameterSet&) const;

 private:
  std::vector<std::string> names_;
  std::vector<ParamGroup> groups_;
  std::vector<ParamInit> inits_;
  std::vector<Matrix> values_;
};

/// Lazily places parameters on a tape as gradient-collecting leaves and
/// gathers their adjoints after backward().
class ParamBinding {
 public:
  /// With `track_gradients` false the parameters enter as constants, so no
  /// backward closures are recorded (inference mode).
  ParamBinding(Tape& tape, const ParameterSet& params, bool track_gradients = true);

  Var operator()(ParamId id);
  Tape& tape() const { return *tape_; }
  const ParameterSet& parameters() const { return *params_; }

  /// One gradient per parameter; parameters never touched get zeros.
  std::vector<Matrix> gradients() const;

 private:
  Tape* tape_;
  const ParameterSet* params_;
  std::vector<std::optional<Var>> bound_;
  bool track_gradients_;
};

}  // namespace dcdm
