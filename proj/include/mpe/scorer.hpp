#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mpe/model.hpp"
#include "mpe/weights.hpp"

namespace mpe {

// Scores every candidate move of the current state; larger is better. Output
// is parallel to `moves`. Implementations are read-only after construction
// and may be shared across threads.
class NeighborScorer {
 public:
  virtual ~NeighborScorer() = default;
  virtual std::vector<double> score_all(const GraphicalModel& model, const Assignment& x,
                                        const QuerySpec& q, std::span<const Move> moves) const = 0;
  // True when score_all returns exactly ll_scorer's values.
  virtual bool is_ll_gain() const { return false; }
};

std::vector<double> ll_scorer(const GraphicalModel& model, const Assignment& x, const QuerySpec& q,
                              std::span<const Move> moves);

// 1.0 for moves that strictly reduce the Hamming distance to `reference`.
std::vector<double> oracle_scores(const Assignment& reference, const Assignment& x,
                                  const QuerySpec& q, std::span<const Move> moves);

// Min-max scaling to [0,1]; constant input maps to 0.5. Zero-probability gains
// (-inf) map to 0 and +inf to 1, with finite entries scaled among themselves.
// When any +inf is present every finite entry maps to 0.
std::vector<double> minmax_normalize(std::span<const double> gains);

// Attention forward pass on explicit token lists, one probability per move
// token. The state tokens act as keys/values; order does not matter.
std::vector<double> neural_forward_tokens(const ScorerWeights& w,
                                          std::span<const std::size_t> state_tokens,
                                          std::span<const std::size_t> move_tokens);

// Probability that each move reduces the distance to a good solution. The
// state includes evidence variables.
std::vector<double> neural_forward(const ScorerWeights& w, const Assignment& x, const QuerySpec& q,
                                   std::span<const Move> moves);

class LLScorer final : public NeighborScorer {
 public:
  std::vector<double> score_all(const GraphicalModel& model, const Assignment& x,
                                const QuerySpec& q, std::span<const Move> moves) const override {
    return ll_scorer(model, x, q, moves);
  }
  bool is_ll_gain() const override { return true; }
};

class OracleScorer final : public NeighborScorer {
 public:
  explicit OracleScorer(Assignment reference) : reference_(std::move(reference)) {}
  std::vector<double> score_all(const GraphicalModel&, const Assignment& x, const QuerySpec& q,
                                std::span<const Move> moves) const override {
    return oracle_scores(reference_, x, q, moves);
  }

 private:
  Assignment reference_;
};

class NeuralScorer final : public NeighborScorer {
 public:
  explicit NeuralScorer(std::shared_ptr<const ScorerWeights> weights);
  std::vector<double> score_all(const GraphicalModel& model, const Assignment& x,
                                const QuerySpec& q, std::span<const Move> moves) const override;

 private:
  std::shared_ptr<const ScorerWeights> weights_;
};

struct CombinedConfig {
  double lambda = 0.5;
};

// (1 - lambda) * minmax(LL gain) + lambda * neural probability.
class CombinedScorer final : public NeighborScorer {
 public:
  CombinedScorer(CombinedConfig cfg, std::shared_ptr<const ScorerWeights> weights);
  std::vector<double> score_all(const GraphicalModel& model, const Assignment& x,
                                const QuerySpec& q, std::span<const Move> moves) const override;
  double lambda() const { return cfg_.lambda; }

 private:
  CombinedConfig cfg_;
  std::shared_ptr<const ScorerWeights> weights_;
};

}  // namespace mpe
