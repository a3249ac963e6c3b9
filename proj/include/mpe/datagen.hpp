#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mpe/gibbs.hpp"
#include "mpe/model.hpp"
#include "mpe/search.hpp"

namespace mpe {

// Query set size for ratio qr over n variables: floor(qr * n).
std::size_t query_size(double qr, std::size_t n);

// Samples x from the model, picks floor(qr * n) query variables uniformly
// without replacement and observes the rest at x. Returns (query, x).
std::pair<QuerySpec, Assignment> generate_query(const GraphicalModel& model, double qr,
                                                std::uint64_t seed,
                                                const GibbsConfig& gibbs = GibbsConfig{});

// Either a wall-clock budget or, for reproducible runs, a step budget.
struct AnytimeBudget {
  std::optional<double> seconds;
  std::optional<std::size_t> steps;

  static AnytimeBudget wall_clock(double s) { return {s, std::nullopt}; }
  static AnytimeBudget step_limit(std::size_t n) { return {std::nullopt, n}; }
};

struct AnytimeConfig {
  std::size_t restart_interval = 1000;
  GlsConfig gls{};
};

// GLS+ with restarts at fixed intervals; returns the incumbent.
Assignment solve_mpe_anytime(const GraphicalModel& model, const QuerySpec& q,
                             const AnytimeBudget& budget, std::uint64_t seed,
                             const AnytimeConfig& cfg = AnytimeConfig{});

struct LabeledMove {
  Move move;
  bool label;
};

// Full neighborhood of x with label = [d_H(x', ref) < d_H(x, ref)].
std::vector<LabeledMove> label_neighbors(const GraphicalModel& model, const Assignment& x,
                                         const Assignment& reference, const QuerySpec& q);

struct TrainingRecord {
  std::map<VarIndex, Value> evidence;
  Assignment state;
  std::vector<LabeledMove> neighbors;
};

struct DatagenConfig {
  double qr_lo = 0.8;
  double qr_hi = 0.95;
  AnytimeBudget budget = AnytimeBudget::wall_clock(300.0);
  // Collection step limit. Deliberately no default: 500 and 2500 both have
  // a claim, so callers must choose.
  std::size_t stl = 0;
  std::size_t num_queries = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  GibbsConfig gibbs{};
  AnytimeConfig anytime{};
  // Fraction of records whose labels are recomputed from scratch as a check.
  double verify_fraction = 0.01;

  void validate() const;
};

using RecordSink = std::function<void(const TrainingRecord&)>;

struct DatagenSummary {
  std::size_t queries_ok = 0;
  std::size_t queries_failed = 0;
  std::size_t records = 0;
  std::size_t verified = 0;
};

// Generates num_queries queries and streams one record per collected state,
// in query order. Failed queries are logged and skipped.
DatagenSummary collect_dataset(const GraphicalModel& model, const DatagenConfig& cfg,
                               const RecordSink& sink);

// Line-delimited JSON dataset (docs/dataset_format.md).
class DatasetWriter {
 public:
  DatasetWriter(std::ostream& out, const GraphicalModel& model);
  void write(const TrainingRecord& r);
  RecordSink sink() {
    return [this](const TrainingRecord& r) { write(r); };
  }

 private:
  std::ostream& out_;
};

}  // namespace mpe
