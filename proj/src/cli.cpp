#include "mpe/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "mpe/datagen.hpp"
#include "mpe/drift.hpp"
#include "mpe/eval.hpp"
#include "mpe/gibbs.hpp"
#include "mpe/plot.hpp"
#include "mpe/rng.hpp"
#include "mpe/scorer.hpp"
#include "mpe/search.hpp"
#include "mpe/uai.hpp"
#include "mpe/weights.hpp"

namespace fs = std::filesystem;

namespace mpe {

namespace {

// Thrown for bad flag combinations found after parsing; maps to exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model;
  std::string model_pos;
  std::string evid;
  std::string query_ratio = "0.8:0.95";
  std::optional<double> budget_seconds;
  std::optional<std::size_t> budget_steps;
  std::optional<std::size_t> stl;
  std::size_t steps = 4000;
  std::string checkpoints = "500,1000,2000,4000";
  std::string method = "greedy";
  std::string restart = "local";
  double penalty_weight = 1.0;
  std::string weights;
  std::string lambda;
  std::uint64_t seed = 0;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out;
  bool csv = false;
  bool plots = false;
  std::size_t queries = 10;
  std::size_t samples = 10;
  std::size_t burn_in = 100;
  std::size_t thin = 10;
  double verify_fraction = 0.01;
  double alpha = 0.75;
  std::size_t h0 = 20;
  std::size_t trials = 100000;
  std::string trajectory;
  std::string reference;
  std::string log_level = "info";
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  return parts;
}

double parse_real(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(fmt::format("{}: '{}' is not a number", what, s));
  }
}

std::vector<double> parse_reals(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(parse_real(p, what));
  if (out.empty()) throw UsageError(fmt::format("{}: empty list", what));
  return out;
}

std::vector<std::size_t> parse_checkpoints(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& p : split(s, ',')) {
    const double v = parse_real(p, "--checkpoints");
    if (!(v >= 1) || v != std::floor(v)) throw UsageError(fmt::format("--checkpoints: '{}' is not a positive count", p));
    out.push_back(static_cast<std::size_t>(v));
  }
  check_checkpoints(out, std::numeric_limits<std::size_t>::max());
  return out;
}

std::pair<double, double> parse_ratio(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 1) {
    const double v = parse_real(parts[0], "--query-ratio");
    return {v, v};
  }
  if (parts.size() != 2) throw UsageError("--query-ratio expects 'x' or 'lo:hi'");
  return {parse_real(parts[0], "--query-ratio"), parse_real(parts[1], "--query-ratio")};
}

RestartPolicy parse_restart(const std::string& s) {
  if (s == "local") return RestartPolicy::on_local_optimum();
  if (s == "never") return RestartPolicy::never();
  const double k = parse_real(s, "--restart");
  if (!(k >= 1) || k != std::floor(k)) throw UsageError("--restart expects local, never or a positive interval");
  return RestartPolicy::fixed_interval(static_cast<std::size_t>(k));
}

Assignment parse_assignment_text(const std::string& text, const GraphicalModel& model) {
  std::vector<Value> vals;
  std::istringstream in(text);
  long long v = 0;
  while (in >> v) {
    if (v < 0) throw ParseError("negative value in assignment", 0, 0);
    vals.push_back(static_cast<Value>(v));
  }
  if (!in.eof()) throw ParseError("assignment file holds a non-integer token", 0, 0);
  Assignment x(std::move(vals));
  if (x.size() != model.num_vars() || !model.valid(x))
    throw ParseError(fmt::format("assignment has {} values or is out of domain for a {}-variable model", x.size(),
                                 model.num_vars()),
                     0, 0);
  return x;
}

std::string join_values(const Assignment& x) { return fmt::format("{}", fmt::join(x.values(), " ")); }

class Session {
 public:
  Session(Options& o, CLI::App& app, std::ostream& out) : o_(o), app_(app), out_(out) {}

  const GraphicalModel& model() {
    if (!model_) {
      const std::string path = !o_.model_pos.empty() ? o_.model_pos : o_.model;
      if (path.empty()) throw UsageError("a model file is required (--model or positional)");
      model_ = std::make_unique<GraphicalModel>(load_uai(path));
      spdlog::info("loaded {}: {} variables, {} factors", path, model_->num_vars(), model_->num_factors());
    }
    return *model_;
  }

  QuerySpec query() {
    if (o_.evid.empty()) return QuerySpec::all_query(model());
    return QuerySpec(model(), parse_evidence(read_text_file(o_.evid), model()));
  }

  std::shared_ptr<const ScorerWeights> weights() {
    if (o_.weights.empty()) return nullptr;
    auto w = std::make_shared<ScorerWeights>(load_weights(o_.weights));
    w->validate_for(model());
    return w;
  }

  // Creates the output directory and records the resolved options there.
  void manifest(const std::string& sub) {
    if (o_.out.empty()) return;
    fs::create_directories(o_.out);
    std::ofstream m(fs::path(o_.out) / "manifest.toml");
    if (!m) throw std::runtime_error(fmt::format("cannot write manifest in {}", o_.out));
    // Flat key = "value" lines that --config reads back.
    for (const CLI::Option* opt : app_.get_options()) {
      const std::string key = opt->get_single_name();
      if (!opt->get_configurable() || opt->get_lnames().empty() || key == "config" || key == "help" ||
          key == "version")
        continue;
      std::string value;
      if (key == "model" && !o_.model_pos.empty()) {
        value = o_.model_pos;
      } else if (opt->count() > 0) {
        value = fmt::format("{}", fmt::join(opt->results(), ","));
      } else {
        value = opt->get_default_str();
      }
      if (value.empty()) continue;
      m << fmt::format("{} = \"{}\"\n", key, value);
    }
    m << "\n[manifest]\n";
    m << fmt::format("tool_version = \"{}\"\n", kToolVersion);
    m << fmt::format("subcommand = \"{}\"\n", sub);
    const auto* cfg = app_.get_config_ptr();
    m << fmt::format("config_file = \"{}\"\n", cfg && cfg->count() ? cfg->as<std::string>() : std::string{});
    m << fmt::format("seed = {}\n", o_.seed);
    m << fmt::format("output_directory = \"{}\"\n", o_.out);
    if (!m) throw std::runtime_error("failed writing the manifest");
  }

  // Results file in --out, or standard output when no directory was given.
  std::ostream& result_stream(const std::string& name) {
    if (o_.out.empty()) return out_;
    file_.close();
    file_.open(fs::path(o_.out) / name, std::ios::binary);
    if (!file_) throw std::runtime_error(fmt::format("cannot write {}", (fs::path(o_.out) / name).string()));
    return file_;
  }

  fs::path out_path(const std::string& name) const {
    if (o_.out.empty()) throw UsageError("--csv/--plots need an output directory (--out)");
    return fs::path(o_.out) / name;
  }

  std::vector<QuerySpec> generated_queries(std::uint64_t seed) {
    if (!o_.evid.empty()) return {query()};
    const auto [lo, hi] = parse_ratio(o_.query_ratio);
    if (!(lo > 0.0 && lo <= hi && hi < 1.0)) throw ConfigError("--query-ratio must satisfy 0 < lo <= hi < 1");
    GibbsConfig g;
    g.burn_in = o_.burn_in;
    g.thin = o_.thin;
    std::vector<QuerySpec> qs;
    for (std::size_t i = 0; i < o_.queries; ++i) {
      const std::uint64_t s = derive_seed(seed, i);
      Rng rng(derive_seed(s, 0));
      const double qr = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
      qs.push_back(generate_query(model(), qr, derive_seed(s, 1), g).first);
    }
    return qs;
  }

 private:
  Options& o_;
  CLI::App& app_;
  std::ostream& out_;
  std::unique_ptr<GraphicalModel> model_;
  std::ofstream file_;
};

int run_validate(Options&, Session& s, std::ostream& out) {
  const auto& m = s.model();
  std::size_t max_card = 0;
  for (auto c : m.cardinalities()) max_card = std::max(max_card, c);
  out << "variables " << m.num_vars() << '\n';
  out << "factors " << m.num_factors() << '\n';
  out << "max_cardinality " << max_card << '\n';
  out << "hash " << model_hash(m) << '\n';
  return 0;
}

int run_sample(Options& o, Session& s, std::ostream&) {
  const auto& m = s.model();
  GibbsConfig g{o.burn_in, o.thin, o.seed};
  s.manifest("sample");
  auto& dst = s.result_stream("samples.txt");
  for (const auto& x : gibbs_sample(m, g, o.samples)) dst << join_values(x) << '\n';
  return 0;
}

int run_solve(Options& o, Session& s, std::ostream& out) {
  const auto& m = s.model();
  const QuerySpec q = s.query();
  auto w = s.weights();
  if (!o.lambda.empty() && !w) throw UsageError("--lambda needs --weights");
  std::shared_ptr<const NeighborScorer> scorer = std::make_shared<LLScorer>();
  if (w) {
    const double lambda = o.lambda.empty() ? 1.0 : parse_real(o.lambda, "--lambda");
    scorer = std::make_shared<CombinedScorer>(CombinedConfig{lambda}, w);
  }
  SearchConfig cfg;
  cfg.max_steps = o.steps;
  cfg.restart = parse_restart(o.restart);
  cfg.seed = derive_seed(o.seed, 1);
  if (o.method == "gls+") {
    cfg.gls = GlsConfig{o.penalty_weight};
    if (cfg.restart.kind == RestartPolicy::Kind::on_local_optimum) cfg.restart = RestartPolicy::never();
  }
  s.manifest("solve");
  const Assignment x0 = random_assignment(m, q, derive_seed(o.seed, 0));
  const Trajectory t = cfg.gls ? gls_plus_search(m, q, *scorer, cfg, x0) : greedy_search(m, q, *scorer, cfg, x0);
  out << "method " << o.method << '\n';
  out << "steps " << t.steps_taken << '\n';
  out << "restarts " << t.restarts.size() << '\n';
  out << "stalled " << (t.stalled ? 1 : 0) << '\n';
  out << "final_F " << format_real(log_potential_sum(m, t.final_state)) << '\n';
  out << "best_F " << format_real(t.best_f) << '\n';
  out << "best_assignment " << join_values(t.best) << '\n';
  if (!o.out.empty()) write_trajectory(s.result_stream("trajectory.jsonl"), t, false);
  return 0;
}

int run_datagen(Options& o, Session& s, std::ostream& out) {
  const auto& m = s.model();
  DatagenConfig cfg;
  std::tie(cfg.qr_lo, cfg.qr_hi) = parse_ratio(o.query_ratio);
  if (o.budget_seconds && o.budget_steps) throw UsageError("give either --budget-seconds or --budget-steps");
  if (o.budget_steps) cfg.budget = AnytimeBudget::step_limit(*o.budget_steps);
  if (o.budget_seconds) cfg.budget = AnytimeBudget::wall_clock(*o.budget_seconds);
  if (!o.stl) throw UsageError("datagen needs --stl");
  cfg.stl = *o.stl;
  cfg.num_queries = o.queries;
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  cfg.gibbs.burn_in = o.burn_in;
  cfg.gibbs.thin = o.thin;
  cfg.anytime.gls.penalty_weight = o.penalty_weight;
  cfg.verify_fraction = o.verify_fraction;
  cfg.validate();
  if (!cfg.budget.steps)
    spdlog::warn("datagen: wall-clock solver budget; output depends on machine speed (use --budget-steps)");
  s.manifest("datagen");
  DatasetWriter writer(s.result_stream("dataset.jsonl"), m);
  const auto sum = collect_dataset(m, cfg, writer.sink());
  spdlog::info("datagen: {} queries ok, {} failed, {} records, {} label-checked", sum.queries_ok,
               sum.queries_failed, sum.records, sum.verified);
  if (!o.out.empty()) {
    out << "queries_ok " << sum.queries_ok << '\n';
    out << "queries_failed " << sum.queries_failed << '\n';
    out << "records " << sum.records << '\n';
  }
  return 0;
}

int run_drift(Options& o, Session& s, std::ostream& out) {
  if (!o.trajectory.empty()) {
    if (o.reference.empty()) throw UsageError("--trajectory needs --reference");
    const auto& m = s.model();
    const QuerySpec q = s.query();
    const Assignment ref = parse_assignment_text(read_text_file(o.reference), m);
    std::ifstream in(o.trajectory);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", o.trajectory));
    const Trajectory t = read_trajectory(in);
    s.manifest("drift");
    const auto est = measure_alpha(t, ref, q);
    out << "alpha_hat " << (est.alpha ? format_real(*est.alpha) : std::string("absent")) << '\n';
    out << "reducing " << est.reducing << '\n';
    out << "nonreducing " << est.nonreducing << '\n';
    return 0;
  }
  DriftConfig cfg;
  cfg.alpha = o.alpha;
  cfg.h0 = o.h0;
  cfg.trials = o.trials;
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  cfg.keep_taus = o.csv;
  cfg.validate();
  if (o.csv) s.out_path("taus.csv");
  s.manifest("drift");
  const auto r = simulate_drift(cfg);
  out << "alpha " << format_real(cfg.alpha) << '\n';
  out << "h0 " << cfg.h0 << '\n';
  out << "trials " << cfg.trials << '\n';
  out << fmt::format("bound {:.1f}\n", r.bound);
  out << "mean_tau " << format_real(r.mean_tau) << '\n';
  out << "rel_error " << format_real(std::abs(r.mean_tau - r.bound) / r.bound) << '\n';
  out << "p50 " << r.p50 << "\np90 " << r.p90 << "\np99 " << r.p99 << '\n';
  if (o.csv) {
    std::ofstream c(s.out_path("taus.csv"));
    c << "trial,tau\n";
    for (std::size_t i = 0; i < r.taus.size(); ++i) c << i << ',' << r.taus[i] << '\n';
  }
  return 0;
}

std::vector<Series> curves(const std::vector<RunResult>& all, const std::vector<std::string>& names,
                           const std::vector<std::size_t>& cps) {
  std::vector<Series> out;
  for (const auto& n : names) {
    Series s{n, {}};
    const auto rs = select_method(all, n);
    for (std::size_t c : cps) {
      try {
        s.points.emplace_back(static_cast<double>(c), checkpoint_stats(rs, c).first);
      } catch (const EvaluationError&) {
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

int run_eval(Options& o, Session& s, std::ostream& out) {
  const auto& m = s.model();
  const auto cps = parse_checkpoints(o.checkpoints);
  auto w = s.weights();
  SearchConfig base;
  base.max_steps = o.steps;
  base.restart = parse_restart(o.restart);
  check_checkpoints(cps, base.max_steps);
  SearchConfig gls = base;
  gls.gls = GlsConfig{o.penalty_weight};
  if (gls.restart.kind == RestartPolicy::Kind::on_local_optimum) gls.restart = RestartPolicy::never();

  std::vector<Method> methods;
  auto ll = std::make_shared<LLScorer>();
  if (o.method == "greedy" || o.method == "all") methods.push_back({"greedy", ll, base});
  if (o.method == "gls+" || o.method == "all") methods.push_back({"gls+", ll, gls});
  if (methods.empty()) throw UsageError("--method must be greedy, gls+ or all");
  if (!o.lambda.empty() && !w) throw UsageError("--lambda needs --weights");
  if (w) {
    const double lambda = o.lambda.empty() ? 0.5 : parse_real(o.lambda, "--lambda");
    auto sc = std::make_shared<CombinedScorer>(CombinedConfig{lambda}, w);
    const auto n = methods.size();
    for (std::size_t i = 0; i < n; ++i) methods.push_back({"neural-" + methods[i].name, sc, methods[i].cfg});
  }
  if (o.csv) s.out_path("results.csv");
  if (o.plots) s.out_path("curves.svg");
  const auto queries = s.generated_queries(derive_seed(o.seed, 0));
  s.manifest("eval");
  const auto all = run_matrix(m, queries, methods, cps, {derive_seed(o.seed, 1), o.workers});

  std::vector<std::string> names;
  for (const auto& me : methods) names.push_back(me.name);
  std::size_t failures = 0;
  for (const auto& r : all) failures += r.error ? 1 : 0;
  out << fmt::format("{:<16} {:>7} {:>14} {:>12} {:>12}\n", "method", "step", "mean_F", "sd_F", "sec/step");
  for (const auto& n : names) {
    const auto rs = select_method(all, n);
    double spm = 0.0;
    for (const auto& r : rs) spm += r.sec_per_step_mean;
    spm /= static_cast<double>(std::max<std::size_t>(rs.size(), 1));
    for (std::size_t c : cps) {
      try {
        const auto [mean, sd] = checkpoint_stats(rs, c);
        out << fmt::format("{:<16} {:>7} {:>14.6g} {:>12.4g} {:>12.3g}\n", n, c, mean, sd, spm);
      } catch (const EvaluationError& e) {
        out << fmt::format("{:<16} {:>7} {:>14}\n", n, c, "failed");
      }
    }
  }
  std::vector<SummaryRow> summary;
  if (names.size() > 1 && failures == 0) {
    summary = summarize(all, names, names.front(), cps);
    out << fmt::format("\n{:<16} {:<10} {:>7} {:>9} {:>10}\n", "method", "vs", "step", "win_pct", "pct_impr");
    for (const auto& r : summary)
      out << fmt::format("{:<16} {:<10} {:>7} {:>9.2f} {:>10.3f}\n", r.method_a, r.method_b, r.step, r.win_pct,
                         r.pct_impr);
  }
  if (failures) spdlog::warn("eval: {} of {} runs failed; metrics skipped", failures, all.size());
  if (o.csv) {
    std::ofstream r(s.out_path("results.csv"));
    write_results_csv(r, all);
    std::ofstream sm(s.out_path("summary.csv"));
    write_summary_csv(sm, summary);
  }
  if (o.plots) write_svg(s.out_path("curves.svg"), "Best log-likelihood", "step", "mean best F", curves(all, names, cps));
  return failures ? 2 : 0;
}

int run_sweep(Options& o, Session& s, std::ostream& out) {
  s.model();
  auto w = s.weights();
  if (!w) throw UsageError("sweep needs --weights");
  const auto lambdas = parse_reals(o.lambda.empty() ? "0.2,0.5,0.7,1.0" : o.lambda, "--lambda");
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("every lambda must lie in [0, 1]");
  const auto cps = parse_checkpoints(o.checkpoints);
  SearchConfig cfg;
  cfg.max_steps = o.steps;
  cfg.restart = parse_restart(o.restart);
  check_checkpoints(cps, cfg.max_steps);
  if (o.csv) s.out_path("sweep.csv");
  if (o.plots) s.out_path("sweep.svg");
  const auto queries = s.generated_queries(derive_seed(o.seed, 0));
  s.manifest("sweep");
  const auto table = lambda_sweep(s.model(), queries, w, lambdas, cfg, cps, {derive_seed(o.seed, 1), o.workers});
  out << fmt::format("{:>8} {:>7} {:>14} {:>12}\n", "lambda", "step", "mean_F", "sd_F");
  for (const auto& row : table.rows)
    for (std::size_t c : cps)
      out << fmt::format("{:>8.3g} {:>7} {:>14.6g} {:>12.4g}\n", row.lambda, c, row.mean.at(c), row.sd.at(c));
  out << "selected_lambda " << format_real(table.selected_lambda()) << '\n';
  if (o.csv) {
    std::ofstream c(s.out_path("sweep.csv"));
    write_sweep_csv(c, table);
  }
  if (o.plots) {
    std::vector<Series> ser;
    for (const auto& row : table.rows) {
      Series se{fmt::format("lambda={}", row.lambda), {}};
      for (std::size_t c : cps) se.points.emplace_back(static_cast<double>(c), row.mean.at(c));
      ser.push_back(std::move(se));
    }
    write_svg(s.out_path("sweep.svg"), "Lambda sweep", "step", "mean best F", ser);
  }
  return 0;
}

void setup_logging(const std::string& level, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("mpels", sink);
  logger->set_pattern("[%l] %v");
  if (level == "quiet") {
    logger->set_level(spdlog::level::err);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    logger->set_level(spdlog::level::info);
  }
  spdlog::set_default_logger(logger);
}

// The logger writes to `err`, which may not outlive cli_main.
class LoggerScope {
 public:
  LoggerScope(const std::string& level, std::ostream& err) : saved_(spdlog::default_logger()) {
    setup_logging(level, err);
  }
  ~LoggerScope() { spdlog::set_default_logger(saved_); }
  LoggerScope(const LoggerScope&) = delete;
  LoggerScope& operator=(const LoggerScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> saved_;
};

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stochastic local search for MPE inference in discrete graphical models", "mpels"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::ignore);
  app.require_subcommand(1);

  app.add_option("--model", o.model, "UAI model file");
  app.add_option("--evid", o.evid, "UAI evidence file (default: every variable is a query variable)");
  app.add_option("--query-ratio", o.query_ratio, "Query ratio for generated queries, 'x' or 'lo:hi'");
  app.add_option("--budget-seconds", o.budget_seconds, "Anytime solver wall-clock budget per query");
  app.add_option("--budget-steps", o.budget_steps, "Anytime solver step budget per query (reproducible)");
  app.add_option("--stl", o.stl, "State collection step limit per query (required by datagen)");
  app.add_option("--steps", o.steps, "Search steps")->capture_default_str();
  app.add_option("--checkpoints", o.checkpoints, "Comma-separated checkpoint steps")->capture_default_str();
  app.add_option("--method", o.method, "greedy, gls+ (eval also accepts all)")->capture_default_str();
  app.add_option("--restart", o.restart, "Restart policy: local, never, or an interval")->capture_default_str();
  app.add_option("--penalty-weight", o.penalty_weight, "GLS+ penalty weight")->capture_default_str();
  app.add_option("--weights", o.weights, "Scorer weight file");
  app.add_option("--lambda", o.lambda, "Neural mixing weight (sweep: comma-separated list)");
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--workers", o.workers, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory (manifest and result files)");
  app.add_flag("--csv", o.csv, "Write CSV files into --out");
  app.add_flag("--plots", o.plots, "Write SVG plots into --out");
  app.add_option("--queries", o.queries, "Number of generated queries")->capture_default_str();
  app.add_option("--samples", o.samples, "Number of Gibbs samples")->capture_default_str();
  app.add_option("--burn-in", o.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  app.add_option("--thin", o.thin, "Gibbs sweeps between samples")->capture_default_str();
  app.add_option("--verify-fraction", o.verify_fraction, "Share of records label-checked in datagen")
      ->capture_default_str();
  app.add_option("--alpha", o.alpha, "Drift: probability of a reducing step")->capture_default_str();
  app.add_option("--h0", o.h0, "Drift: initial distance")->capture_default_str();
  app.add_option("--trials", o.trials, "Drift: number of walks")->capture_default_str();
  app.add_option("--trajectory", o.trajectory, "Drift: trajectory JSONL to measure alpha on");
  app.add_option("--reference", o.reference, "Drift: reference assignment file");
  app.add_option("--log-level", o.log_level, "quiet, info or debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}))
      ->capture_default_str();

  for (CLI::Option* opt : app.get_options()) opt->capture_default_str();

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(Options&, Session&, std::ostream&);
  };
  const Sub subs[] = {
      {"validate", "Parse a model and print its size", run_validate},
      {"sample", "Draw Gibbs samples", run_sample},
      {"solve", "Run greedy or GLS+ search on one query", run_solve},
      {"datagen", "Generate a labeled training dataset", run_datagen},
      {"drift", "Simulate the drift walk or measure alpha on a trajectory", run_drift},
      {"eval", "Compare methods over generated queries", run_eval},
      {"sweep", "Sweep the neural mixing weight", run_sweep},
  };
  std::vector<CLI::App*> handles;
  for (const auto& sub : subs) {
    auto* h = app.add_subcommand(sub.name, sub.help);
    h->fallthrough();
    if (std::string(sub.name) != "drift") h->add_option("model_file", o.model_pos, "UAI model file");
    handles.push_back(h);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  const LoggerScope logging(o.log_level, err);

  try {
    Session session(o, app, out);
    for (std::size_t i = 0; i < handles.size(); ++i)
      if (handles[i]->parsed()) return subs[i].run(o, session, out);
    return 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const WeightFormatError& e) {
    err << "weight file error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace mpe
