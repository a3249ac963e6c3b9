#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mpe/model.hpp"
#include "mpe/scorer.hpp"

namespace mpe {

// All 1-flip moves over the query variables, ordered by (var asc, value asc).
std::vector<Move> enumerate_neighbors(const GraphicalModel& model, const Assignment& x,
                                      const QuerySpec& q);

// Uniform random values on the query variables, evidence applied.
Assignment random_assignment(const GraphicalModel& model, const QuerySpec& q, std::uint64_t seed);

struct RestartPolicy {
  enum class Kind {
    // No restarts. Search ends when the best score is <= 0 (no improving
    // neighbor under a gain-like scorer).
    never,
    // Restart when the best raw LL gain over the neighborhood is <= 0,
    // whatever the scorer.
    on_local_optimum,
    // Restart every `interval` steps; otherwise always apply the argmax.
    fixed_interval,
  };
  Kind kind = Kind::on_local_optimum;
  std::size_t interval = 0;

  static RestartPolicy never() { return {Kind::never, 0}; }
  static RestartPolicy on_local_optimum() { return {Kind::on_local_optimum, 0}; }
  static RestartPolicy fixed_interval(std::size_t k) { return {Kind::fixed_interval, k}; }
};

struct GlsConfig {
  double penalty_weight = 1.0;
  // Penalty rounds allowed at one local optimum before the best augmented
  // move is applied anyway.
  std::size_t max_penalty_rounds = 100;
};

struct SearchConfig {
  std::size_t max_steps = 4000;
  RestartPolicy restart = RestartPolicy::on_local_optimum();
  std::uint64_t seed = 0;
  std::optional<GlsConfig> gls;
  // Optional wall-clock cut-off on top of max_steps.
  std::optional<double> time_limit_seconds;
  // Off: only the initial state, best and final state are kept.
  bool record_states = true;
  bool time_steps = false;
};

enum class StepKind : std::uint8_t {
  initial,
  scored,   // argmax of the search scorer
  greedy,   // collector: LL-gain argmax
  guided,   // collector: random distance-reducing move
  random,   // collector: guided branch found no reducing move
  restart,
};

const char* to_string(StepKind kind);

struct TrajectoryState {
  std::size_t step = 0;
  double f = 0.0;
  StepKind kind = StepKind::initial;
  Move move{};                          // valid for move kinds
  std::optional<Assignment> snapshot;   // full state for initial/restart states
};

class Trajectory {
 public:
  std::vector<TrajectoryState> states;
  Assignment best;
  double best_f = kZeroLog;
  Assignment final_state;
  std::vector<std::size_t> restarts;
  std::vector<double> step_seconds;
  std::size_t steps_taken = 0;
  bool stalled = false;

  void start(const Assignment& x0, double f, bool record);
  void push_move(std::size_t step, Move m, const Assignment& after, double f, StepKind kind, bool record);
  void push_restart(std::size_t step, const Assignment& after, double f, bool record);

  // Calls fn(state, assignment_after_state) in order.
  void replay(const std::function<void(const TrajectoryState&, const Assignment&)>& fn) const;
  std::vector<Assignment> assignments() const;
  // Best F over recorded states with step <= s.
  double best_at(std::size_t s) const;

 private:
  void observe(const Assignment& x, double f);
};

// Best-improvement search driven by `scorer`; ties go to the lowest
// (var, value). One step per applied move or restart.
Trajectory greedy_search(const GraphicalModel& model, const QuerySpec& q,
                         const NeighborScorer& scorer, const SearchConfig& cfg, const Assignment& x0);

// Per-factor penalty counts indexed like the factor's table.
class PenaltyTable {
 public:
  explicit PenaltyTable(const GraphicalModel& model);
  std::uint32_t count(std::size_t factor, std::size_t index) const { return counts_[factor][index]; }
  void increment(std::size_t factor, std::size_t index) { ++counts_[factor][index]; }
  std::uint64_t total() const;

 private:
  std::vector<std::vector<std::uint32_t>> counts_;
};

struct GlsRun {
  Trajectory trajectory;
  PenaltyTable penalties;
  std::size_t penalty_rounds = 0;
};

using PenaltyObserver = std::function<void(const PenaltyTable&)>;

// Guided local search: selection by scorer - w * (penalty change); at a local
// optimum of LL gain - w * (penalty change) the max-utility factor
// instantiations are penalized instead of restarting.
GlsRun run_gls_plus(const GraphicalModel& model, const QuerySpec& q, const NeighborScorer& scorer,
                    const SearchConfig& cfg, const Assignment& x0,
                    const PenaltyObserver& on_penalty = {});

Trajectory gls_plus_search(const GraphicalModel& model, const QuerySpec& q,
                           const NeighborScorer& scorer, const SearchConfig& cfg,
                           const Assignment& x0);

// State collector for dataset generation: each step a fair coin picks the
// LL-greedy move or a random move that reduces the distance to `reference`.
// Restarts every stl/5 steps. Starts from a seeded random assignment.
Trajectory collect_states(const GraphicalModel& model, const QuerySpec& q,
                          const Assignment& reference, std::size_t stl, std::uint64_t seed);

// Line-delimited JSON: one {"step","f","kind"[, "move"][, "assignment"]} per state.
void write_trajectory(std::ostream& out, const Trajectory& t, bool with_assignments);
Trajectory read_trajectory(std::istream& in);

}  // namespace mpe
