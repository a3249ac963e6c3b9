#include "mpe/drift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mpe/rng.hpp"

namespace mpe {

void DriftConfig::validate() const {
  if (h0 < 1) throw ConfigError("h0 must be >= 1");
  if (!(alpha > 0.5 && alpha <= 1.0)) throw ConfigError(fmt::format("alpha must lie in (0.5, 1], got {}", alpha));
  if (trials < 1) throw ConfigError("trials must be >= 1");
}

double nearest_rank(const std::vector<std::uint64_t>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("nearest_rank of empty data");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return static_cast<double>(sorted[rank - 1]);
}

namespace {

std::uint64_t one_walk(const DriftConfig& cfg, std::size_t trial) {
  Rng rng(derive_seed(cfg.seed, trial));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t h = cfg.h0;
  std::uint64_t steps = 0;
  while (h > 0) {
    if (steps == cfg.max_steps)
      throw std::runtime_error(fmt::format("drift trial {} not absorbed after {} steps (alpha={}, h0={}, h={})",
                                           trial, steps, cfg.alpha, cfg.h0, h));
    if (u(rng) < cfg.alpha) {
      --h;
    } else {
      ++h;
    }
    ++steps;
  }
  return steps;
}

}  // namespace

DriftResult simulate_drift(const DriftConfig& cfg) {
  cfg.validate();
  std::vector<std::uint64_t> taus(cfg.trials);
  const std::size_t workers = std::clamp<std::size_t>(cfg.workers, 1, cfg.trials);
  if (workers == 1) {
    for (std::size_t i = 0; i < cfg.trials; ++i) taus[i] = one_walk(cfg, i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < cfg.trials; i += workers) taus[i] = one_walk(cfg, i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  DriftResult r;
  // Integer sum is exact and independent of the worker split.
  const auto total = std::accumulate(taus.begin(), taus.end(), std::uint64_t{0});
  r.mean_tau = static_cast<double>(total) / static_cast<double>(cfg.trials);
  r.bound = static_cast<double>(cfg.h0) / (2.0 * cfg.alpha - 1.0);
  std::vector<std::uint64_t> sorted = taus;
  std::sort(sorted.begin(), sorted.end());
  r.p50 = nearest_rank(sorted, 50);
  r.p90 = nearest_rank(sorted, 90);
  r.p99 = nearest_rank(sorted, 99);
  if (cfg.keep_taus) r.taus = std::move(taus);
  return r;
}

AlphaEstimate measure_alpha(const Trajectory& t, const Assignment& reference, const QuerySpec& q) {
  AlphaEstimate est;
  std::optional<std::size_t> prev;
  t.replay([&](const TrajectoryState& s, const Assignment& x) {
    const std::size_t d = hamming_distance(x, reference, q);
    // Restarts are not 1-flip moves; they only reset the baseline distance.
    if (prev && s.kind != StepKind::restart && s.kind != StepKind::initial && *prev > 0) {
      if (d < *prev) {
        ++est.reducing;
      } else {
        ++est.nonreducing;
      }
    }
    prev = d;
  });
  const std::size_t n = est.reducing + est.nonreducing;
  if (n > 0) est.alpha = static_cast<double>(est.reducing) / static_cast<double>(n);
  return est;
}

}  // namespace mpe
