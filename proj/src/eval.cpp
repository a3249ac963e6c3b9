#include "mpe/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mpe/rng.hpp"

namespace mpe {

void check_checkpoints(const std::vector<std::size_t>& checkpoints, std::size_t max_steps) {
  if (checkpoints.empty()) throw ConfigError("at least one checkpoint is required");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] == 0) throw ConfigError("checkpoints must be positive");
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) throw ConfigError("checkpoints must be strictly ascending");
  }
  if (checkpoints.back() > max_steps)
    throw ConfigError(fmt::format("last checkpoint {} exceeds max_steps {}", checkpoints.back(), max_steps));
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (!std::isfinite(mean)) return {mean, std::numeric_limits<double>::quiet_NaN()};
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

RunResult run_one(const GraphicalModel& model, const QuerySpec& q, std::size_t qi, const Method& m,
                  const std::vector<std::size_t>& checkpoints, std::uint64_t seed) {
  RunResult r;
  r.query = qi;
  r.method = m.name;
  try {
    if (!m.scorer) throw ConfigError(fmt::format("method '{}' has no scorer", m.name));
    check_checkpoints(checkpoints, m.cfg.max_steps);
    const std::uint64_t qseed = derive_seed(seed, qi);
    const Assignment x0 = random_assignment(model, q, derive_seed(qseed, 0));
    SearchConfig cfg = m.cfg;
    cfg.seed = derive_seed(qseed, 1);
    cfg.record_states = true;
    cfg.time_steps = true;
    const Trajectory t = cfg.gls ? gls_plus_search(model, q, *m.scorer, cfg, x0)
                                 : greedy_search(model, q, *m.scorer, cfg, x0);
    for (std::size_t s : checkpoints) r.checkpoints[s] = t.best_at(s);
    std::tie(r.sec_per_step_mean, r.sec_per_step_sd) = mean_sd(t.step_seconds);
    if (t.step_seconds.empty()) r.sec_per_step_mean = r.sec_per_step_sd = 0.0;
  } catch (const std::exception& e) {
    r.checkpoints.clear();
    r.error = e.what();
    spdlog::warn("eval: query {} method '{}' failed: {}", qi, m.name, e.what());
  }
  return r;
}

}  // namespace

std::vector<RunResult> run_matrix(const GraphicalModel& model, const std::vector<QuerySpec>& queries,
                                  const std::vector<Method>& methods,
                                  const std::vector<std::size_t>& checkpoints, const MatrixConfig& mc) {
  for (const auto& m : methods) check_checkpoints(checkpoints, m.cfg.max_steps);
  const std::size_t cells = queries.size() * methods.size();
  std::vector<RunResult> out(cells);
  auto cell = [&](std::size_t c) {
    const std::size_t qi = c / methods.size();
    out[c] = run_one(model, queries[qi], qi, methods[c % methods.size()], checkpoints, mc.seed);
  };
  const std::size_t workers = std::clamp<std::size_t>(mc.workers, 1, std::max<std::size_t>(cells, 1));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) cell(c);
      });
  }
  return out;
}

std::vector<RunResult> select_method(const std::vector<RunResult>& all, const std::string& method) {
  std::vector<RunResult> out;
  for (const auto& r : all)
    if (r.method == method) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.query < y.query; });
  return out;
}

namespace {

double checkpoint_of(const RunResult& r, std::size_t step) {
  auto it = r.checkpoints.find(step);
  if (it == r.checkpoints.end())
    throw EvaluationError(fmt::format("query {} method '{}' has no checkpoint at step {}{}", r.query, r.method,
                                      step, r.error ? " (run failed: " + *r.error + ")" : std::string{}));
  return it->second;
}

// Pairs results by query id; both sides must cover the same ids.
std::vector<std::pair<const RunResult*, const RunResult*>> pair_up(const std::vector<RunResult>& a,
                                                                  const std::vector<RunResult>& b) {
  if (a.size() != b.size()) throw EvaluationError("result sets cover different numbers of queries");
  std::map<std::size_t, const RunResult*> by_id;
  for (const auto& r : b)
    if (!by_id.emplace(r.query, &r).second) throw EvaluationError(fmt::format("duplicate query id {}", r.query));
  std::vector<std::pair<const RunResult*, const RunResult*>> out;
  for (const auto& r : a) {
    auto it = by_id.find(r.query);
    if (it == by_id.end()) throw EvaluationError(fmt::format("query {} missing from the second result set", r.query));
    out.emplace_back(&r, it->second);
  }
  return out;
}

bool tied(double x, double y) {
  if (x == y) return true;  // covers equal infinities
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
}

}  // namespace

double win_percentage(const std::vector<RunResult>& a, const std::vector<RunResult>& b, std::size_t step) {
  const auto pairs = pair_up(a, b);
  if (pairs.empty()) throw EvaluationError("win percentage over an empty query set");
  double score = 0.0;
  for (const auto& [ra, rb] : pairs) {
    const double fa = checkpoint_of(*ra, step);
    const double fb = checkpoint_of(*rb, step);
    if (tied(fa, fb)) {
      score += 0.5;
    } else if (fa > fb) {
      score += 1.0;
    }
  }
  return score / static_cast<double>(pairs.size()) * 100.0;
}

double pct_improvement(const std::vector<RunResult>& base, const std::vector<RunResult>& treat, std::size_t step,
                       std::size_t* used) {
  const auto pairs = pair_up(base, treat);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [rs, rd] : pairs) {
    const double ls = checkpoint_of(*rs, step);
    const double ld = checkpoint_of(*rd, step);
    if (ls == 0.0 || !std::isfinite(ls) || !std::isfinite(ld)) {
      spdlog::warn("pct_improvement: query {} skipped at step {} (baseline F={}, treated F={})", rs->query, step,
                   ls, ld);
      continue;
    }
    sum += (ld - ls) / std::abs(ls);
    ++n;
  }
  if (used) *used = n;
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(n) * 100.0;
}

std::vector<SummaryRow> summarize(const std::vector<RunResult>& all, const std::vector<std::string>& methods,
                                  const std::string& baseline, const std::vector<std::size_t>& checkpoints) {
  const auto base = select_method(all, baseline);
  std::vector<SummaryRow> rows;
  for (const auto& m : methods) {
    if (m == baseline) continue;
    const auto treat = select_method(all, m);
    for (std::size_t s : checkpoints)
      rows.push_back({m, baseline, s, win_percentage(treat, base, s), pct_improvement(base, treat, s)});
  }
  return rows;
}

std::pair<double, double> checkpoint_stats(const std::vector<RunResult>& rs, std::size_t step) {
  std::vector<double> fs;
  fs.reserve(rs.size());
  for (const auto& r : rs) fs.push_back(checkpoint_of(r, step));
  return mean_sd(fs);
}

SweepTable lambda_sweep(const GraphicalModel& model, const std::vector<QuerySpec>& queries,
                        std::shared_ptr<const ScorerWeights> weights, const std::vector<double>& lambdas,
                        const SearchConfig& cfg, const std::vector<std::size_t>& checkpoints,
                        const MatrixConfig& mc) {
  if (lambdas.empty()) throw ConfigError("lambda sweep needs at least one lambda");
  if (queries.empty()) throw ConfigError("lambda sweep needs at least one query");
  check_checkpoints(checkpoints, cfg.max_steps);
  std::vector<Method> methods;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    SearchConfig c = cfg;
    c.gls.reset();
    methods.push_back({fmt::format("lambda#{}", i),
                       std::make_shared<CombinedScorer>(CombinedConfig{lambdas[i]}, weights), c});
  }
  const auto all = run_matrix(model, queries, methods, checkpoints, mc);
  SweepTable table;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const auto rs = select_method(all, methods[i].name);
    SweepRow row;
    row.lambda = lambdas[i];
    for (std::size_t s : checkpoints) std::tie(row.mean[s], row.sd[s]) = checkpoint_stats(rs, s);
    table.rows.push_back(std::move(row));
  }
  const std::size_t last = checkpoints.back();
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    if (table.rows[i].mean.at(last) > table.rows[table.selected].mean.at(last)) table.selected = i;
  return table;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return fmt::format("{}", v);
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << "query,method,step,F,sec_per_step\n";
  for (const auto& r : results)
    for (const auto& [step, f] : r.checkpoints)
      out << r.query << ',' << r.method << ',' << step << ',' << format_real(f) << ','
          << format_real(r.sec_per_step_mean) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method_a,method_b,step,win_pct,pct_impr\n";
  for (const auto& r : rows)
    out << r.method_a << ',' << r.method_b << ',' << r.step << ',' << format_real(r.win_pct) << ','
        << format_real(r.pct_impr) << '\n';
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "lambda,step,mean_F,sd_F,selected\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    for (const auto& [step, m] : row.mean)
      out << format_real(row.lambda) << ',' << step << ',' << format_real(m) << ',' << format_real(row.sd.at(step))
          << ',' << (i == table.selected ? 1 : 0) << '\n';
  }
}

}  // namespace mpe
