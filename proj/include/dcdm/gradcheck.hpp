#pragma once

#include <cstdint>

#include "dcdm/elbo.hpp"
#include "dcdm/numerics/grad_check.hpp"

namespace dcdm {

/// Small widths for finite-difference checks (every tensor stays under ~100 entries).
ModelConfig toy_model_config();

/// Central-difference check of the full single-dialogue loss with frozen
/// reparameterization noise, over every parameter tensor of a randomly
/// initialised model built from `config`.
GradCheckReport gradcheck_elbo(const ModelConfig& config, const LossWeights& weights, std::uint64_t seed,
                               int turns = 4, const GradCheckOptions& options = {});

}  // namespace dcdm
