#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "mpe/errors.hpp"

namespace mpe {

using VarIndex = std::uint32_t;
using Value = std::uint32_t;

// Log-space stand-in for a zero probability.
inline constexpr double kZeroLog = -std::numeric_limits<double>::infinity();

inline bool is_zero_log(double v) { return v == kZeroLog; }

class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::size_t n, Value fill = 0) : values_(n, fill) {}
  explicit Assignment(std::vector<Value> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  Value operator[](VarIndex i) const { return values_[i]; }
  Value& operator[](VarIndex i) { return values_[i]; }
  std::span<const Value> values() const { return values_; }
  std::vector<Value>& raw() { return values_; }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::vector<Value> values_;
};

// A factor over `scope` stored as a flat natural-log table. Row-major with the
// last scope variable varying fastest, matching the UAI table order.
class Factor {
 public:
  Factor(std::vector<VarIndex> scope, std::vector<double> log_table);

  std::span<const VarIndex> scope() const { return scope_; }
  std::span<const double> log_table() const { return log_table_; }
  std::span<const std::size_t> strides() const { return strides_; }
  double max_entry() const { return max_entry_; }

  // Table index of the instantiation selected by x.
  std::size_t index_of(const Assignment& x) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < scope_.size(); ++k) idx += strides_[k] * x[scope_[k]];
    return idx;
  }
  double value(const Assignment& x) const { return log_table_[index_of(x)]; }

 private:
  friend class GraphicalModel;
  void bind(std::span<const std::size_t> cardinalities);

  std::vector<VarIndex> scope_;
  std::vector<double> log_table_;
  std::vector<std::size_t> strides_;
  double max_entry_ = kZeroLog;
};

// Where a variable sits inside one of its incident factors.
struct Incidence {
  std::uint32_t factor;
  std::uint32_t position;
};

// Immutable problem definition. Safe to share across threads.
class GraphicalModel {
 public:
  GraphicalModel(std::vector<std::size_t> cardinalities, std::vector<Factor> factors);

  std::size_t num_vars() const { return cardinalities_.size(); }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t cardinality(VarIndex v) const { return cardinalities_[v]; }
  std::span<const std::size_t> cardinalities() const { return cardinalities_; }
  std::span<const Factor> factors() const { return factors_; }
  const Factor& factor(std::size_t f) const { return factors_[f]; }
  std::span<const Incidence> incident(VarIndex v) const {
    return {incidence_.data() + incidence_begin_[v], incidence_.data() + incidence_begin_[v + 1]};
  }
  // Factor ids whose scope contains v, ascending.
  std::vector<std::size_t> var_to_factors(VarIndex v) const;

  bool valid(const Assignment& x) const;

 private:
  std::vector<std::size_t> cardinalities_;
  std::vector<Factor> factors_;
  std::vector<Incidence> incidence_;
  std::vector<std::size_t> incidence_begin_;
};

// Partition of the variables into query variables Q and evidence E = X \ Q.
class QuerySpec {
 public:
  QuerySpec() = default;
  QuerySpec(const GraphicalModel& model, std::map<VarIndex, Value> evidence);

  // Every variable is a query variable.
  static QuerySpec all_query(const GraphicalModel& model) { return QuerySpec(model, {}); }

  std::span<const VarIndex> query_vars() const { return query_vars_; }
  const std::map<VarIndex, Value>& evidence() const { return evidence_; }
  bool is_query(VarIndex v) const { return is_query_[v] != 0; }
  std::size_t num_vars() const { return is_query_.size(); }

  bool consistent(const Assignment& x) const;
  void apply_evidence(Assignment& x) const;

 private:
  std::vector<VarIndex> query_vars_;
  std::map<VarIndex, Value> evidence_;
  std::vector<std::uint8_t> is_query_;
};

struct Move {
  VarIndex var;
  Value value;
  friend bool operator==(const Move&, const Move&) = default;
};

inline Assignment apply(Assignment x, Move m) {
  x[m.var] = m.value;
  return x;
}

// F(x): sum of the selected log entries over all factors.
double log_potential_sum(const GraphicalModel& model, const Assignment& x);

// F(x') - F(x) touching only factors incident to m.var. A move between two
// zero-probability states reports 0.
double ll_gain(const GraphicalModel& model, const Assignment& x, Move m);

// LL gain of every value of `var` (the current value gets 0) written into out.
void ll_gains_for_var(const GraphicalModel& model, const Assignment& x, VarIndex var,
                      std::span<double> out);

std::size_t hamming_distance(const Assignment& a, const Assignment& b, const QuerySpec& q);

}  // namespace mpe
