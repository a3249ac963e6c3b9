#include "mpe/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mpe {

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t offset)
    : std::runtime_error(line > 0 ? fmt::format("line {}, offset {}: {}", line, offset, what)
                                  : what),
      line_(line),
      offset_(offset) {}

SamplingError::SamplingError(std::size_t variable, std::size_t sweep)
    : std::runtime_error(fmt::format(
          "gibbs: every value of variable {} has zero probability (sweep {})", variable, sweep)),
      variable_(variable),
      sweep_(sweep) {}

Factor::Factor(std::vector<VarIndex> scope, std::vector<double> log_table)
    : scope_(std::move(scope)), log_table_(std::move(log_table)) {}

void Factor::bind(std::span<const std::size_t> cardinalities) {
  std::vector<VarIndex> sorted = scope_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractViolation("factor scope contains a repeated variable");

  strides_.assign(scope_.size(), 1);
  std::size_t size = 1;
  for (std::size_t k = scope_.size(); k-- > 0;) {
    if (scope_[k] >= cardinalities.size())
      throw ContractViolation(fmt::format("factor scope variable {} out of range", scope_[k]));
    strides_[k] = size;
    size *= cardinalities[scope_[k]];
  }
  if (size != log_table_.size())
    throw ContractViolation(
        fmt::format("factor table has {} entries, scope requires {}", log_table_.size(), size));

  max_entry_ = kZeroLog;
  for (double v : log_table_) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw ContractViolation("factor table entry is not a finite log value");
    max_entry_ = std::max(max_entry_, v);
  }
}

GraphicalModel::GraphicalModel(std::vector<std::size_t> cardinalities, std::vector<Factor> factors)
    : cardinalities_(std::move(cardinalities)), factors_(std::move(factors)) {
  for (std::size_t c : cardinalities_)
    if (c == 0) throw ContractViolation("variable with empty domain");

  std::vector<std::size_t> degree(num_vars(), 0);
  for (auto& f : factors_) {
    f.bind(cardinalities_);
    for (VarIndex v : f.scope()) ++degree[v];
  }
  incidence_begin_.assign(num_vars() + 1, 0);
  for (std::size_t v = 0; v < num_vars(); ++v)
    incidence_begin_[v + 1] = incidence_begin_[v] + degree[v];
  incidence_.resize(incidence_begin_.back());
  std::vector<std::size_t> fill(incidence_begin_.begin(), incidence_begin_.end() - 1);
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    auto scope = factors_[f].scope();
    for (std::size_t k = 0; k < scope.size(); ++k)
      incidence_[fill[scope[k]]++] = {static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(k)};
  }
}

std::vector<std::size_t> GraphicalModel::var_to_factors(VarIndex v) const {
  std::vector<std::size_t> out;
  for (const auto& inc : incident(v)) out.push_back(inc.factor);
  return out;
}

bool GraphicalModel::valid(const Assignment& x) const {
  if (x.size() != num_vars()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[static_cast<VarIndex>(i)] >= cardinalities_[i]) return false;
  return true;
}

QuerySpec::QuerySpec(const GraphicalModel& model, std::map<VarIndex, Value> evidence)
    : evidence_(std::move(evidence)), is_query_(model.num_vars(), 1) {
  for (const auto& [var, val] : evidence_) {
    if (var >= model.num_vars())
      throw ContractViolation(fmt::format("evidence variable {} out of range", var));
    if (val >= model.cardinality(var))
      throw ContractViolation(
          fmt::format("evidence value {} outside domain of variable {}", val, var));
    is_query_[var] = 0;
  }
  for (std::size_t v = 0; v < is_query_.size(); ++v)
    if (is_query_[v]) query_vars_.push_back(static_cast<VarIndex>(v));
}

bool QuerySpec::consistent(const Assignment& x) const {
  if (x.size() != is_query_.size()) return false;
  for (const auto& [var, val] : evidence_)
    if (x[var] != val) return false;
  return true;
}

void QuerySpec::apply_evidence(Assignment& x) const {
  for (const auto& [var, val] : evidence_) x[var] = val;
}

double log_potential_sum(const GraphicalModel& model, const Assignment& x) {
  double total = 0.0;
  for (const auto& f : model.factors()) {
    const double v = f.value(x);
    if (is_zero_log(v)) return kZeroLog;
    total += v;
  }
  return total;
}

namespace {

// Per-factor differences summed over the incidence list of `var`, with the
// zero sentinel tracked separately so that -inf never meets -inf.
struct GainAccumulator {
  double finite = 0.0;
  std::size_t zeros_before = 0;
  std::size_t zeros_after = 0;

  void add(double before, double after) {
    const bool zb = is_zero_log(before);
    const bool za = is_zero_log(after);
    zeros_before += zb;
    zeros_after += za;
    if (!zb && !za) finite += after - before;
  }

  double result() const {
    if (zeros_before == 0 && zeros_after == 0) return finite;
    if (zeros_before == 0) return kZeroLog;
    if (zeros_after == 0) return std::numeric_limits<double>::infinity();
    return 0.0;
  }
};

}  // namespace

double ll_gain(const GraphicalModel& model, const Assignment& x, Move m) {
  const Value cur = x[m.var];
  if (m.value == cur)
    throw ContractViolation(fmt::format("move sets variable {} to its current value", m.var));
  if (m.value >= model.cardinality(m.var))
    throw ContractViolation(fmt::format("move value {} outside domain of variable {}", m.value, m.var));
  GainAccumulator acc;
  const auto delta = static_cast<std::ptrdiff_t>(m.value) - static_cast<std::ptrdiff_t>(cur);
  for (const auto& inc : model.incident(m.var)) {
    const Factor& f = model.factor(inc.factor);
    const std::size_t idx = f.index_of(x);
    const auto table = f.log_table();
    acc.add(table[idx], table[idx + delta * static_cast<std::ptrdiff_t>(f.strides()[inc.position])]);
  }
  return acc.result();
}

void ll_gains_for_var(const GraphicalModel& model, const Assignment& x, VarIndex var,
                      std::span<double> out) {
  const std::size_t card = model.cardinality(var);
  const Value cur = x[var];
  thread_local std::vector<GainAccumulator> accs;
  accs.assign(card, GainAccumulator{});
  for (const auto& inc : model.incident(var)) {
    const Factor& f = model.factor(inc.factor);
    const std::size_t stride = f.strides()[inc.position];
    const std::size_t base = f.index_of(x) - stride * cur;
    const auto table = f.log_table();
    const double before = table[base + stride * cur];
    for (std::size_t v = 0; v < card; ++v)
      if (v != cur) accs[v].add(before, table[base + stride * v]);
  }
  for (std::size_t v = 0; v < card; ++v) out[v] = v == cur ? 0.0 : accs[v].result();
}

std::size_t hamming_distance(const Assignment& a, const Assignment& b, const QuerySpec& q) {
  if (a.size() != q.num_vars() || b.size() != q.num_vars())
    throw ContractViolation("hamming_distance: assignment size does not match query");
  for (const auto& [var, val] : q.evidence())
    if (a[var] != val || b[var] != val)
      throw ContractViolation(fmt::format("hamming_distance: evidence mismatch at variable {}", var));
  std::size_t d = 0;
  for (VarIndex v : q.query_vars()) d += a[v] != b[v];
  return d;
}

}  // namespace mpe
