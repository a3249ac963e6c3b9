#include "mpe/gibbs.hpp"

#include <algorithm>
#include <cmath>

#include "mpe/rng.hpp"

namespace mpe {

std::vector<Assignment> gibbs_sample(const GraphicalModel& model, const GibbsConfig& cfg,
                                     std::size_t n) {
  if (cfg.thin < 1) throw ConfigError("gibbs: thin must be >= 1");
  Rng rng(cfg.seed);
  Assignment x(model.num_vars());
  for (std::size_t v = 0; v < model.num_vars(); ++v)
    x[static_cast<VarIndex>(v)] = static_cast<Value>(uniform_index(rng, model.cardinality(static_cast<VarIndex>(v))));

  std::vector<double> logp;
  std::vector<double> cdf;
  std::size_t sweep = 0;
  auto do_sweep = [&] {
    for (std::size_t vi = 0; vi < model.num_vars(); ++vi) {
      const auto var = static_cast<VarIndex>(vi);
      const std::size_t card = model.cardinality(var);
      logp.assign(card, 0.0);
      for (const auto& inc : model.incident(var)) {
        const Factor& f = model.factor(inc.factor);
        const std::size_t stride = f.strides()[inc.position];
        const std::size_t base = f.index_of(x) - stride * x[var];
        for (std::size_t v = 0; v < card; ++v) logp[v] += f.log_table()[base + stride * v];
      }
      const double mx = *std::max_element(logp.begin(), logp.end());
      if (is_zero_log(mx)) throw SamplingError(vi, sweep);
      cdf.resize(card);
      double acc = 0.0;
      for (std::size_t v = 0; v < card; ++v) cdf[v] = acc += std::exp(logp[v] - mx);
      const double u = uniform01(rng) * acc;
      const auto pick = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      x[var] = static_cast<Value>(std::min<std::size_t>(pick, card - 1));
    }
    ++sweep;
  };

  for (std::size_t s = 0; s < cfg.burn_in; ++s) do_sweep();
  std::vector<Assignment> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < cfg.thin; ++s) do_sweep();
    samples.push_back(x);
  }
  return samples;
}

}  // namespace mpe
