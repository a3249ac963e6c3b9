#include "mpe/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace mpe {

std::vector<double> ll_scorer(const GraphicalModel& model, const Assignment& x, const QuerySpec&,
                              std::span<const Move> moves) {
  std::vector<double> out(moves.size());
  thread_local std::vector<double> per_value;
  constexpr VarIndex kNone = std::numeric_limits<VarIndex>::max();
  VarIndex cached = kNone;
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const Move m = moves[i];
    if (m.var != cached) {
      per_value.resize(model.cardinality(m.var));
      ll_gains_for_var(model, x, m.var, per_value);
      cached = m.var;
    }
    if (m.value == x[m.var])
      throw ContractViolation(fmt::format("move sets variable {} to its current value", m.var));
    out[i] = per_value[m.value];
  }
  return out;
}

std::vector<double> oracle_scores(const Assignment& reference, const Assignment& x,
                                  const QuerySpec&, std::span<const Move> moves) {
  std::vector<double> out(moves.size(), 0.0);
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const Move m = moves[i];
    if (x[m.var] != reference[m.var] && m.value == reference[m.var]) out[i] = 1.0;
  }
  return out;
}

std::vector<double> minmax_normalize(std::span<const double> gains) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double lo = kInf;
  double hi = -kInf;
  bool any_pos_inf = false;
  for (double g : gains) {
    if (g == kInf) {
      any_pos_inf = true;
    } else if (g != -kInf) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
  }
  std::vector<double> out(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double g = gains[i];
    if (g == kInf) {
      out[i] = 1.0;
    } else if (g == -kInf) {
      out[i] = any_pos_inf || lo <= hi ? 0.0 : 0.5;
    } else if (any_pos_inf) {
      out[i] = 0.0;
    } else if (hi > lo) {
      out[i] = (g - lo) / (hi - lo);
    } else {
      out[i] = 0.5;
    }
  }
  return out;
}

std::vector<double> neural_forward(const ScorerWeights& w, const Assignment& x, const QuerySpec&,
                                   std::span<const Move> moves) {
  if (x.size() != w.meta.vocab_offsets.size())
    throw WeightFormatError(fmt::format("weights cover {} variables, state has {}",
                                        w.meta.vocab_offsets.size(), x.size()));
  std::vector<std::size_t> state(x.size());
  for (std::size_t v = 0; v < x.size(); ++v)
    state[v] = w.token(static_cast<VarIndex>(v), x[static_cast<VarIndex>(v)]);
  std::vector<std::size_t> move_tokens(moves.size());
  for (std::size_t i = 0; i < moves.size(); ++i) move_tokens[i] = w.token(moves[i].var, moves[i].value);
  return neural_forward_tokens(w, state, move_tokens);
}

NeuralScorer::NeuralScorer(std::shared_ptr<const ScorerWeights> weights)
    : weights_(std::move(weights)) {
  weights_->validate();
}

std::vector<double> NeuralScorer::score_all(const GraphicalModel&, const Assignment& x,
                                            const QuerySpec& q, std::span<const Move> moves) const {
  return neural_forward(*weights_, x, q, moves);
}

CombinedScorer::CombinedScorer(CombinedConfig cfg, std::shared_ptr<const ScorerWeights> weights)
    : cfg_(cfg), weights_(std::move(weights)) {
  if (!(cfg_.lambda >= 0.0 && cfg_.lambda <= 1.0))
    throw ConfigError(fmt::format("lambda must lie in [0, 1], got {}", cfg_.lambda));
  weights_->validate();
}

std::vector<double> CombinedScorer::score_all(const GraphicalModel& model, const Assignment& x,
                                              const QuerySpec& q, std::span<const Move> moves) const {
  auto out = minmax_normalize(ll_scorer(model, x, q, moves));
  const double lam = cfg_.lambda;
  // At lambda = 0 the neural term contributes exactly nothing.
  if (lam == 0.0) return out;
  const auto nn = neural_forward(*weights_, x, q, moves);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - lam) * out[i] + lam * nn[i];
  return out;
}

}  // namespace mpe
