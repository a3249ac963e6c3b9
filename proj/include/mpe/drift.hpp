#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mpe/model.hpp"
#include "mpe/search.hpp"

namespace mpe {

struct DriftConfig {
  std::size_t h0 = 20;
  double alpha = 0.75;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_taus = false;
  // Per-trial abort threshold.
  std::size_t max_steps = 10'000'000;

  void validate() const;
};

struct DriftResult {
  double mean_tau = 0.0;
  double bound = 0.0;  // h0 / (2 alpha - 1)
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  std::vector<std::uint64_t> taus;  // only with keep_taus
};

// Biased +-1 walk from h0 absorbed at 0: each step draws u ~ U[0,1) and
// moves down when u < alpha. Trial i uses its own stream derived from the
// seed, so runs with different alpha share random numbers.
DriftResult simulate_drift(const DriftConfig& cfg);

// Nearest-rank percentile of sorted data, p in (0, 100].
double nearest_rank(const std::vector<std::uint64_t>& sorted, double p);

struct AlphaEstimate {
  std::optional<double> alpha;
  std::size_t reducing = 0;
  std::size_t nonreducing = 0;
};

// Over consecutive non-restart transitions that start at a positive distance,
// the fraction that strictly reduce the Hamming distance to `reference`.
AlphaEstimate measure_alpha(const Trajectory& t, const Assignment& reference, const QuerySpec& q);

}  // namespace mpe
