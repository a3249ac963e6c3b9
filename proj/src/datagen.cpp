#include "mpe/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mpe/rng.hpp"
#include "mpe/uai.hpp"

namespace mpe {

std::size_t query_size(double qr, std::size_t n) {
  if (!(qr > 0.0 && qr < 1.0)) throw ConfigError(fmt::format("query ratio must lie in (0, 1), got {}", qr));
  // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(qr * static_cast<double>(n) + 1e-9));
}

std::pair<QuerySpec, Assignment> generate_query(const GraphicalModel& model, double qr,
                                                std::uint64_t seed, const GibbsConfig& gibbs) {
  const std::size_t k = query_size(qr, model.num_vars());
  if (k == 0) throw ConfigError("query ratio selects no query variables for this model");
  GibbsConfig g = gibbs;
  g.seed = derive_seed(seed, 0);
  Assignment x = gibbs_sample(model, g, 1).front();

  Rng rng(derive_seed(seed, 1));
  std::vector<VarIndex> order(model.num_vars());
  std::iota(order.begin(), order.end(), VarIndex{0});
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::uint8_t> is_query(model.num_vars(), 0);
  for (std::size_t i = 0; i < k; ++i) is_query[order[i]] = 1;
  std::map<VarIndex, Value> evidence;
  for (std::size_t v = 0; v < model.num_vars(); ++v)
    if (!is_query[v]) evidence.emplace(static_cast<VarIndex>(v), x[static_cast<VarIndex>(v)]);
  return {QuerySpec(model, std::move(evidence)), std::move(x)};
}

Assignment solve_mpe_anytime(const GraphicalModel& model, const QuerySpec& q,
                             const AnytimeBudget& budget, std::uint64_t seed,
                             const AnytimeConfig& cfg) {
  if (budget.seconds && !(*budget.seconds > 0.0)) throw ConfigError("anytime budget must be positive");
  if (budget.steps && *budget.steps == 0) throw ConfigError("anytime step budget must be positive");
  if (!budget.seconds && !budget.steps) throw ConfigError("anytime solver needs a budget");
  SearchConfig sc;
  sc.max_steps = budget.steps.value_or(std::numeric_limits<std::size_t>::max());
  sc.time_limit_seconds = budget.seconds;
  sc.restart = RestartPolicy::fixed_interval(cfg.restart_interval);
  sc.seed = derive_seed(seed, 1);
  sc.gls = cfg.gls;
  sc.record_states = false;
  const Assignment x0 = random_assignment(model, q, derive_seed(seed, 0));
  return gls_plus_search(model, q, LLScorer{}, sc, x0).best;
}

std::vector<LabeledMove> label_neighbors(const GraphicalModel& model, const Assignment& x,
                                         const Assignment& reference, const QuerySpec& q) {
  if (!q.consistent(x) || !q.consistent(reference))
    throw ContractViolation("label_neighbors: assignment disagrees with the evidence");
  std::vector<LabeledMove> out;
  for (const Move& m : enumerate_neighbors(model, x, q))
    out.push_back({m, x[m.var] != reference[m.var] && m.value == reference[m.var]});
  return out;
}

void DatagenConfig::validate() const {
  if (!(qr_lo > 0.0 && qr_lo <= qr_hi && qr_hi < 1.0))
    throw ConfigError(fmt::format("query ratio range must satisfy 0 < lo <= hi < 1, got [{}, {}]", qr_lo, qr_hi));
  if (budget.seconds && !(*budget.seconds > 0.0)) throw ConfigError("budget must be positive");
  if (budget.steps && *budget.steps == 0) throw ConfigError("step budget must be positive");
  if (!budget.seconds && !budget.steps) throw ConfigError("datagen needs a solver budget");
  if (stl < 1) throw ConfigError("stl must be set (>= 1)");
  if (num_queries < 1) throw ConfigError("number of queries must be >= 1");
}

namespace {

// A label disagreed with a from-scratch distance recomputation. Never skipped.
class LabelSoundnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QueryResult {
  bool ok = false;
  std::vector<TrainingRecord> records;
  std::size_t verified = 0;
};

// Runs one query end to end. Records go to `emit` as they are produced.
std::size_t run_query(const GraphicalModel& model, const DatagenConfig& cfg, std::size_t i,
                      const std::function<void(TrainingRecord&&)>& emit) {
  const std::uint64_t seed = derive_seed(cfg.seed, i);
  Rng rng(derive_seed(seed, 0));
  const double qr = cfg.qr_lo == cfg.qr_hi
                        ? cfg.qr_lo
                        : std::uniform_real_distribution<double>(cfg.qr_lo, cfg.qr_hi)(rng);
  auto [q, sample] = generate_query(model, qr, derive_seed(seed, 1), cfg.gibbs);
  const Assignment reference = solve_mpe_anytime(model, q, cfg.budget, derive_seed(seed, 2), cfg.anytime);
  const Trajectory traj = collect_states(model, q, reference, cfg.stl, derive_seed(seed, 3));

  std::size_t verified = 0;
  std::bernoulli_distribution check(std::clamp(cfg.verify_fraction, 0.0, 1.0));
  traj.replay([&](const TrajectoryState&, const Assignment& x) {
    TrainingRecord r{q.evidence(), x, label_neighbors(model, x, reference, q)};
    if (check(rng)) {
      const std::size_t d = hamming_distance(x, reference, q);
      for (const auto& lm : r.neighbors) {
        const bool expect = hamming_distance(apply(x, lm.move), reference, q) < d;
        if (expect != lm.label)
          throw LabelSoundnessError(fmt::format("label mismatch at move ({}, {})", lm.move.var, lm.move.value));
      }
      ++verified;
    }
    emit(std::move(r));
  });
  return verified;
}

}  // namespace

DatagenSummary collect_dataset(const GraphicalModel& model, const DatagenConfig& cfg,
                               const RecordSink& sink) {
  cfg.validate();
  DatagenSummary summary;
  const std::size_t n = cfg.num_queries;
  const std::size_t workers = std::clamp<std::size_t>(cfg.workers, 1, n);

  auto report_failure = [&](std::size_t i, const std::exception& e) {
    spdlog::warn("datagen: query {} failed: {}", i, e.what());
    ++summary.queries_failed;
  };

  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      // Buffer per query so a failing query emits nothing.
      std::vector<TrainingRecord> buf;
      try {
        summary.verified += run_query(model, cfg, i, [&](TrainingRecord&& r) { buf.push_back(std::move(r)); });
      } catch (const LabelSoundnessError&) {
        throw;
      } catch (const std::exception& e) {
        report_failure(i, e);
        continue;
      }
      for (const auto& r : buf) sink(r);
      summary.records += buf.size();
      ++summary.queries_ok;
      spdlog::debug("datagen: query {} done, {} records", i, buf.size());
    }
  } else {
    std::vector<QueryResult> results(n);
    std::vector<std::uint8_t> done(n, 0);
    std::vector<std::string> errors(n);
    std::exception_ptr fatal;
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        QueryResult res;
        try {
          res.verified = run_query(model, cfg, i, [&](TrainingRecord&& r) { res.records.push_back(std::move(r)); });
          res.ok = true;
        } catch (const LabelSoundnessError&) {
          std::lock_guard lock(mu);
          if (!fatal) fatal = std::current_exception();
        } catch (const std::exception& e) {
          std::lock_guard lock(mu);
          errors[i] = e.what();
        }
        std::lock_guard lock(mu);
        results[i] = std::move(res);
        done[i] = 1;
        cv.notify_all();
      }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::size_t i = 0; i < n; ++i) {
      QueryResult res;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return done[i] != 0; });
        res = std::move(results[i]);
      }
      if (!res.ok) {
        if (!errors[i].empty()) {
          spdlog::warn("datagen: query {} failed: {}", i, errors[i]);
          ++summary.queries_failed;
        }
        continue;
      }
      for (const auto& r : res.records) sink(r);
      summary.records += res.records.size();
      summary.verified += res.verified;
      ++summary.queries_ok;
    }
    pool.clear();
    if (fatal) std::rethrow_exception(fatal);
  }
  if (summary.queries_ok == 0) throw std::runtime_error("datagen: every query failed");
  return summary;
}

DatasetWriter::DatasetWriter(std::ostream& out, const GraphicalModel& model) : out_(out) {
  nlohmann::json header;
  header["format"] = 1;
  header["model_hash"] = model_hash(model);
  header["num_vars"] = model.num_vars();
  header["cardinalities"] = std::vector<std::size_t>(model.cardinalities().begin(), model.cardinalities().end());
  out_ << header.dump() << '\n';
}

void DatasetWriter::write(const TrainingRecord& r) {
  nlohmann::json j;
  nlohmann::json ev = nlohmann::json::object();
  for (const auto& [var, val] : r.evidence) ev[std::to_string(var)] = val;
  j["evidence"] = std::move(ev);
  j["state"] = r.state.values();
  nlohmann::json nb = nlohmann::json::array();
  for (const auto& lm : r.neighbors) nb.push_back({lm.move.var, lm.move.value, lm.label ? 1 : 0});
  j["neighbors"] = std::move(nb);
  out_ << j.dump() << '\n';
}

}  // namespace mpe
