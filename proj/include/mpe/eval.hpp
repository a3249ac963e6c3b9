#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpe/model.hpp"
#include "mpe/scorer.hpp"
#include "mpe/search.hpp"
#include "mpe/weights.hpp"

namespace mpe {

// A search configuration to compare. cfg.gls selects GLS+; cfg.seed is
// replaced by the per-query seed.
struct Method {
  std::string name;
  std::shared_ptr<const NeighborScorer> scorer;
  SearchConfig cfg;
};

struct RunResult {
  std::size_t query = 0;
  std::string method;
  // step -> best F seen up to and including that step
  std::map<std::size_t, double> checkpoints;
  double sec_per_step_mean = 0.0;
  double sec_per_step_sd = 0.0;
  std::optional<std::string> error;
};

struct MatrixConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// One result per (query, method), ordered query-major. Query i starts every
// method from the same random assignment and search seed. A failing run is
// recorded with `error` set and no checkpoints.
std::vector<RunResult> run_matrix(const GraphicalModel& model, const std::vector<QuerySpec>& queries,
                                  const std::vector<Method>& methods,
                                  const std::vector<std::size_t>& checkpoints,
                                  const MatrixConfig& mc = MatrixConfig{});

// Results of one method, in query order.
std::vector<RunResult> select_method(const std::vector<RunResult>& all, const std::string& method);

// Mean over queries of 1 (a better), 0.5 (tie), 0 (a worse) at `step`, x100.
// Values within 1e-9 relative count as ties.
double win_percentage(const std::vector<RunResult>& a, const std::vector<RunResult>& b, std::size_t step);

// Mean of (F_treat - F_base) / |F_base| x100. Queries whose baseline is 0 or
// either value is non-finite are skipped with a warning; `used` receives the
// number of queries that counted.
double pct_improvement(const std::vector<RunResult>& base, const std::vector<RunResult>& treat,
                       std::size_t step, std::size_t* used = nullptr);

struct SummaryRow {
  std::string method_a;
  std::string method_b;
  std::size_t step = 0;
  double win_pct = 0.0;
  double pct_impr = 0.0;  // NaN when no query qualifies
};

// Every method other than `baseline` against it, at every checkpoint.
std::vector<SummaryRow> summarize(const std::vector<RunResult>& all, const std::vector<std::string>& methods,
                                  const std::string& baseline, const std::vector<std::size_t>& checkpoints);

struct SweepRow {
  double lambda = 0.0;
  std::map<std::size_t, double> mean;
  std::map<std::size_t, double> sd;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::size_t selected = 0;  // row with the largest mean F at the last checkpoint
  double selected_lambda() const { return rows.at(selected).lambda; }
};

// Greedy search with the combined scorer for each lambda over the same queries.
SweepTable lambda_sweep(const GraphicalModel& model, const std::vector<QuerySpec>& queries,
                        std::shared_ptr<const ScorerWeights> weights, const std::vector<double>& lambdas,
                        const SearchConfig& cfg, const std::vector<std::size_t>& checkpoints,
                        const MatrixConfig& mc = MatrixConfig{});

// Mean and sample standard deviation of one method's checkpoint F.
std::pair<double, double> checkpoint_stats(const std::vector<RunResult>& rs, std::size_t step);

// Shortest round-tripping text for a real; "-inf", "inf", "nan" otherwise.
std::string format_real(double v);

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_sweep_csv(std::ostream& out, const SweepTable& table);

// Checks a checkpoint list: nonempty, strictly ascending, positive, <= max_steps.
void check_checkpoints(const std::vector<std::size_t>& checkpoints, std::size_t max_steps);

}  // namespace mpe
