#include "mpe/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "mpe/rng.hpp"

namespace mpe {

std::vector<Move> enumerate_neighbors(const GraphicalModel& model, const Assignment& x,
                                      const QuerySpec& q) {
  std::vector<Move> moves;
  for (VarIndex v : q.query_vars()) {
    const std::size_t card = model.cardinality(v);
    for (std::size_t val = 0; val < card; ++val)
      if (val != x[v]) moves.push_back({v, static_cast<Value>(val)});
  }
  return moves;
}

namespace {

void randomize_query(const GraphicalModel& model, const QuerySpec& q, Assignment& x, Rng& rng) {
  for (VarIndex v : q.query_vars()) x[v] = static_cast<Value>(uniform_index(rng, model.cardinality(v)));
}

// First index of the maximum; NaN never wins.
std::size_t argmax(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best] || (std::isnan(xs[best]) && !std::isnan(xs[i]))) best = i;
  return best;
}

double max_of(std::span<const double> xs) { return xs[argmax(xs)]; }

double advance_f(const GraphicalModel& model, const Assignment& after, double f, double gain) {
  if (std::isfinite(f) && std::isfinite(gain)) return f + gain;
  return log_potential_sum(model, after);
}

void check_start(const GraphicalModel& model, const QuerySpec& q, const Assignment& x0) {
  if (!model.valid(x0)) throw ContractViolation("initial assignment is not valid for the model");
  if (!q.consistent(x0)) throw ContractViolation("initial assignment disagrees with the evidence");
  if (q.query_vars().empty()) throw ConfigError("search needs at least one query variable");
}

}  // namespace

Assignment random_assignment(const GraphicalModel& model, const QuerySpec& q, std::uint64_t seed) {
  Rng rng(seed);
  Assignment x(model.num_vars());
  q.apply_evidence(x);
  randomize_query(model, q, x, rng);
  return x;
}

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::initial: return "initial";
    case StepKind::scored: return "scored";
    case StepKind::greedy: return "greedy";
    case StepKind::guided: return "guided";
    case StepKind::random: return "random";
    case StepKind::restart: return "restart";
  }
  return "?";
}

// --- Trajectory -------------------------------------------------------------

void Trajectory::start(const Assignment& x0, double f, bool) {
  states.clear();
  restarts.clear();
  step_seconds.clear();
  states.push_back({0, f, StepKind::initial, {}, x0});
  best = x0;
  best_f = f;
  final_state = x0;
  steps_taken = 0;
  stalled = false;
}

void Trajectory::observe(const Assignment& x, double f) {
  if (f > best_f) {
    best = x;
    best_f = f;
  }
}

void Trajectory::push_move(std::size_t step, Move m, const Assignment& after, double f,
                           StepKind kind, bool record) {
  if (record) states.push_back({step, f, kind, m, std::nullopt});
  steps_taken = step;
  observe(after, f);
}

void Trajectory::push_restart(std::size_t step, const Assignment& after, double f, bool record) {
  if (record) states.push_back({step, f, StepKind::restart, {}, after});
  restarts.push_back(step);
  steps_taken = step;
  observe(after, f);
}

void Trajectory::replay(
    const std::function<void(const TrajectoryState&, const Assignment&)>& fn) const {
  Assignment cur;
  for (const auto& s : states) {
    if (s.snapshot) {
      cur = *s.snapshot;
    } else {
      cur[s.move.var] = s.move.value;
    }
    fn(s, cur);
  }
}

std::vector<Assignment> Trajectory::assignments() const {
  std::vector<Assignment> out;
  out.reserve(states.size());
  replay([&](const TrajectoryState&, const Assignment& x) { out.push_back(x); });
  return out;
}

double Trajectory::best_at(std::size_t s) const {
  if (states.size() <= 1 && steps_taken > 0) return best_f;
  double b = kZeroLog;
  bool any = false;
  for (const auto& st : states) {
    if (st.step > s) break;
    if (!any || st.f > b) b = st.f;
    any = true;
  }
  return b;
}

// --- Penalties --------------------------------------------------------------

PenaltyTable::PenaltyTable(const GraphicalModel& model) {
  counts_.reserve(model.num_factors());
  for (const auto& f : model.factors()) counts_.emplace_back(f.log_table().size(), 0u);
}

std::uint64_t PenaltyTable::total() const {
  std::uint64_t t = 0;
  for (const auto& c : counts_)
    for (auto v : c) t += v;
  return t;
}

namespace {

void penalty_deltas(const GraphicalModel& model, const Assignment& x, std::span<const Move> moves,
                    const PenaltyTable& pen, std::vector<double>& out) {
  out.assign(moves.size(), 0.0);
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const Move m = moves[i];
    double d = 0.0;
    for (const auto& inc : model.incident(m.var)) {
      const Factor& f = model.factor(inc.factor);
      const std::size_t stride = f.strides()[inc.position];
      const std::size_t idx = f.index_of(x);
      const std::size_t idx2 = idx - stride * x[m.var] + stride * m.value;
      d += static_cast<double>(pen.count(inc.factor, idx2)) - static_cast<double>(pen.count(inc.factor, idx));
    }
    out[i] = d;
  }
}

// --- Search loop shared by greedy and GLS+ ----------------------------------

class SearchRunner {
 public:
  SearchRunner(const GraphicalModel& model, const QuerySpec& q, const NeighborScorer& scorer,
               const SearchConfig& cfg, PenaltyTable* penalties, const PenaltyObserver* observer)
      : model_(model), q_(q), scorer_(scorer), cfg_(cfg), pen_(penalties), observer_(observer) {
    if (pen_) {
      for (std::size_t f = 0; f < model.num_factors(); ++f) {
        const auto scope = model.factor(f).scope();
        if (std::any_of(scope.begin(), scope.end(), [&](VarIndex v) { return q.is_query(v); }))
          active_factors_.push_back(f);
      }
    }
  }

  Trajectory run(const Assignment& x0) {
    check_start(model_, q_, x0);
    if (cfg_.restart.kind == RestartPolicy::Kind::fixed_interval && cfg_.restart.interval == 0)
      throw ConfigError("fixed_interval restart policy needs a positive interval");
    if (cfg_.max_steps < 1) throw ConfigError("max_steps must be >= 1");

    Rng rng(cfg_.seed);
    Assignment x = x0;
    double f = log_potential_sum(model_, x);
    Trajectory t;
    const bool record = cfg_.record_states;
    t.start(x, f, record);

    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    std::optional<Clock::time_point> deadline;
    if (cfg_.time_limit_seconds)
      deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                          std::chrono::duration<double>(*cfg_.time_limit_seconds));

    std::vector<double> dpen;
    std::vector<double> aug;
    std::vector<double> sel;
    for (std::size_t step = 1; step <= cfg_.max_steps; ++step) {
      const auto step_start = Clock::now();
      if (deadline && step_start >= *deadline) break;

      const bool interval_restart = cfg_.restart.kind == RestartPolicy::Kind::fixed_interval &&
                                    step % cfg_.restart.interval == 0;
      if (interval_restart) {
        restart(x, f, rng, t, step);
      } else {
        const auto moves = enumerate_neighbors(model_, x, q_);
        const auto ll = ll_scorer(model_, x, q_, moves);
        if (!pen_ && cfg_.restart.kind == RestartPolicy::Kind::on_local_optimum && max_of(ll) <= 0.0) {
          restart(x, f, rng, t, step);
        } else {
          std::vector<double> scores = scorer_.is_ll_gain() ? ll : scorer_.score_all(model_, x, q_, moves);
          if (scores.size() != moves.size())
            throw ContractViolation("scorer returned the wrong number of scores");
          if (pen_) {
            const double w = cfg_.gls->penalty_weight;
            penalty_deltas(model_, x, moves, *pen_, dpen);
            auto augment = [&] {
              aug.resize(ll.size());
              for (std::size_t i = 0; i < ll.size(); ++i) aug[i] = ll[i] - w * dpen[i];
            };
            augment();
            if (max_of(aug) <= 0.0) {
              const std::size_t cap = w == 0.0 ? 1 : std::max<std::size_t>(1, cfg_.gls->max_penalty_rounds);
              for (std::size_t round = 0; round < cap; ++round) {
                penalize(x);
                penalty_deltas(model_, x, moves, *pen_, dpen);
                augment();
                if (max_of(aug) > 0.0) break;
              }
            }
            sel.resize(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i) sel[i] = scores[i] - w * dpen[i];
          } else {
            sel = std::move(scores);
          }
          const std::size_t best = argmax(sel);
          if (!pen_ && cfg_.restart.kind == RestartPolicy::Kind::never && !(sel[best] > 0.0)) {
            t.stalled = true;
            break;
          }
          const Move m = moves[best];
          x[m.var] = m.value;
          f = advance_f(model_, x, f, ll[best]);
          t.push_move(step, m, x, f, StepKind::scored, record);
        }
      }
      if (cfg_.time_steps)
        t.step_seconds.push_back(std::chrono::duration<double>(Clock::now() - step_start).count());
    }
    t.final_state = x;
    return t;
  }

  std::size_t penalty_rounds() const { return penalty_rounds_; }

 private:
  void restart(Assignment& x, double& f, Rng& rng, Trajectory& t, std::size_t step) {
    randomize_query(model_, q_, x, rng);
    f = log_potential_sum(model_, x);
    t.push_restart(step, x, f, cfg_.record_states);
  }

  // Utility u = (max entry - current entry) / (1 + penalty); every factor at
  // the maximal utility gets its current instantiation penalized.
  void penalize(const Assignment& x) {
    double best_u = -1.0;
    chosen_.clear();
    for (std::size_t fi : active_factors_) {
      const Factor& fac = model_.factor(fi);
      const std::size_t idx = fac.index_of(x);
      const double cur = fac.log_table()[idx];
      const double u = is_zero_log(cur) ? std::numeric_limits<double>::infinity()
                                        : (fac.max_entry() - cur) / (1.0 + pen_->count(fi, idx));
      if (u > best_u) {
        best_u = u;
        chosen_.clear();
      }
      if (u == best_u) chosen_.emplace_back(fi, idx);
    }
    for (const auto& [fi, idx] : chosen_) pen_->increment(fi, idx);
    ++penalty_rounds_;
    if (observer_ && *observer_) (*observer_)(*pen_);
  }

  const GraphicalModel& model_;
  const QuerySpec& q_;
  const NeighborScorer& scorer_;
  const SearchConfig& cfg_;
  PenaltyTable* pen_;
  const PenaltyObserver* observer_;
  std::vector<std::size_t> active_factors_;
  std::vector<std::pair<std::size_t, std::size_t>> chosen_;
  std::size_t penalty_rounds_ = 0;
};

}  // namespace

Trajectory greedy_search(const GraphicalModel& model, const QuerySpec& q,
                         const NeighborScorer& scorer, const SearchConfig& cfg, const Assignment& x0) {
  SearchConfig plain = cfg;
  plain.gls.reset();
  return SearchRunner(model, q, scorer, plain, nullptr, nullptr).run(x0);
}

GlsRun run_gls_plus(const GraphicalModel& model, const QuerySpec& q, const NeighborScorer& scorer,
                    const SearchConfig& cfg, const Assignment& x0, const PenaltyObserver& on_penalty) {
  if (!cfg.gls) throw ConfigError("gls_plus_search requires a GLS configuration");
  if (!(cfg.gls->penalty_weight >= 0.0)) throw ConfigError("penalty weight must be nonnegative");
  GlsRun out{Trajectory{}, PenaltyTable(model), 0};
  SearchRunner runner(model, q, scorer, cfg, &out.penalties, &on_penalty);
  out.trajectory = runner.run(x0);
  out.penalty_rounds = runner.penalty_rounds();
  return out;
}

Trajectory gls_plus_search(const GraphicalModel& model, const QuerySpec& q,
                           const NeighborScorer& scorer, const SearchConfig& cfg,
                           const Assignment& x0) {
  return run_gls_plus(model, q, scorer, cfg, x0).trajectory;
}

Trajectory collect_states(const GraphicalModel& model, const QuerySpec& q,
                          const Assignment& reference, std::size_t stl, std::uint64_t seed) {
  if (!q.consistent(reference)) throw ContractViolation("reference disagrees with the evidence");
  if (q.query_vars().empty()) throw ConfigError("search needs at least one query variable");
  Rng rng(seed);
  Assignment x(model.num_vars());
  q.apply_evidence(x);
  randomize_query(model, q, x, rng);
  double f = log_potential_sum(model, x);

  Trajectory t;
  t.start(x, f, true);
  const std::size_t interval = stl / 5;
  std::bernoulli_distribution coin(0.5);
  std::vector<std::size_t> reducing;
  for (std::size_t step = 1; step <= stl; ++step) {
    if (interval > 0 && step % interval == 0) {
      randomize_query(model, q, x, rng);
      f = log_potential_sum(model, x);
      t.push_restart(step, x, f, true);
      continue;
    }
    const auto moves = enumerate_neighbors(model, x, q);
    const auto ll = ll_scorer(model, x, q, moves);
    std::size_t pick = 0;
    StepKind kind;
    if (coin(rng)) {
      pick = argmax(ll);
      kind = StepKind::greedy;
    } else {
      reducing.clear();
      for (std::size_t i = 0; i < moves.size(); ++i)
        if (x[moves[i].var] != reference[moves[i].var] && moves[i].value == reference[moves[i].var])
          reducing.push_back(i);
      if (!reducing.empty()) {
        pick = reducing[uniform_index(rng, reducing.size())];
        kind = StepKind::guided;
      } else {
        pick = uniform_index(rng, moves.size());
        kind = StepKind::random;
      }
    }
    const Move m = moves[pick];
    x[m.var] = m.value;
    f = advance_f(model, x, f, ll[pick]);
    t.push_move(step, m, x, f, kind, true);
  }
  t.final_state = x;
  return t;
}

// --- Export -----------------------------------------------------------------

namespace {

nlohmann::json f_to_json(double f) {
  if (std::isfinite(f)) return f;
  return f < 0 ? "-inf" : "inf";
}

double f_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return kZeroLog;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw std::runtime_error(fmt::format("bad F value '{}'", s));
  }
  return j.get<double>();
}

}  // namespace

void write_trajectory(std::ostream& out, const Trajectory& t, bool with_assignments) {
  t.replay([&](const TrajectoryState& s, const Assignment& x) {
    nlohmann::json j;
    j["step"] = s.step;
    j["f"] = f_to_json(s.f);
    j["kind"] = to_string(s.kind);
    if (!s.snapshot) j["move"] = {s.move.var, s.move.value};
    if (with_assignments || s.snapshot) j["assignment"] = x.values();
    out << j.dump() << '\n';
  });
}

Trajectory read_trajectory(std::istream& in) {
  Trajectory t;
  std::string line;
  std::size_t line_no = 0;
  Assignment cur;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("bad trajectory record: {}", e.what()), line_no, 1);
    }
    TrajectoryState s;
    s.step = j.at("step").get<std::size_t>();
    s.f = f_from_json(j.at("f"));
    const auto kind = j.at("kind").get<std::string>();
    static const std::pair<const char*, StepKind> kinds[] = {
        {"initial", StepKind::initial}, {"scored", StepKind::scored}, {"greedy", StepKind::greedy},
        {"guided", StepKind::guided},   {"random", StepKind::random}, {"restart", StepKind::restart}};
    auto it = std::find_if(std::begin(kinds), std::end(kinds), [&](auto& k) { return kind == k.first; });
    if (it == std::end(kinds)) throw ParseError(fmt::format("unknown step kind '{}'", kind), line_no, 1);
    s.kind = it->second;
    if (j.contains("move")) s.move = {j["move"][0].get<VarIndex>(), j["move"][1].get<Value>()};
    const bool is_full = s.kind == StepKind::initial || s.kind == StepKind::restart;
    if (j.contains("assignment")) {
      cur = Assignment(j["assignment"].get<std::vector<Value>>());
      if (is_full) s.snapshot = cur;
    } else if (is_full) {
      throw ParseError("initial/restart record without assignment", line_no, 1);
    } else {
      if (t.states.empty()) throw ParseError("trajectory does not start with a full state", line_no, 1);
      cur[s.move.var] = s.move.value;
    }
    if (t.states.empty()) {
      t.start(cur, s.f, true);
      continue;
    }
    if (s.kind == StepKind::restart) {
      t.push_restart(s.step, cur, s.f, true);
    } else {
      t.push_move(s.step, s.move, cur, s.f, s.kind, true);
    }
  }
  t.final_state = cur;
  return t;
}

}  // namespace mpe
