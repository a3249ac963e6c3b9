#pragma once

#include <cstdint>
#include <vector>

#include "mpe/model.hpp"

namespace mpe {

struct GibbsConfig {
  std::size_t burn_in = 100;  // sweeps discarded before the first sample
  std::size_t thin = 10;      // sweeps between retained samples, >= 1
  std::uint64_t seed = 0;
};

// Systematic-scan Gibbs sampler over the full joint. Each sweep resamples the
// variables in index order from their conditionals; the chain starts at a
// uniform random assignment drawn from the seed.
std::vector<Assignment> gibbs_sample(const GraphicalModel& model, const GibbsConfig& cfg,
                                     std::size_t n);

}  // namespace mpe
